//! Similarity kernels over type vectors, plain and diagonal-mask weighted.
//!
//! A [`DiagonalMask`] holds the diagonal of `W`, so that
//! `masked_dot(t1, t2) = t1ᵀ W t2` and
//! `masked_cosine(t1, t2) = t1ᵀ W t2 / (√(t1ᵀ W t1) · √(t2ᵀ W t2))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typer::TypeVector;

/// Which kernel a mask is used with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Dot,
    Cosine,
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMode::Dot => "dot",
            ScoreMode::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ScoreMode::Dot),
            "cosine" => Ok(ScoreMode::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown score mode {other:?}"))),
        }
    }
}

/// Diagonal weights over the type inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMask {
    weights: Vec<f64>,
    mode: ScoreMode,
}

impl DiagonalMask {
    /// Cosine-mode weights are clipped into `[0, 1]`.
    pub fn new(weights: Vec<f64>, mode: ScoreMode) -> Result<Self> {
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(Error::OutOfRange {
                what: "mask weight".into(),
                index,
                value,
            });
        }
        let mut mask = Self { weights, mode };
        if mode == ScoreMode::Cosine {
            mask.clip();
        }
        Ok(mask)
    }

    pub fn ones(len: usize, mode: ScoreMode) -> Self {
        Self {
            weights: vec![1.0; len],
            mode,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub(crate) fn clip(&mut self) {
        for w in &mut self.weights {
            *w = w.clamp(0.0, 1.0);
        }
    }

    /// Fraction of weights with magnitude below `1e-6`.
    pub fn sparsity(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.iter().filter(|w| w.abs() < SPARSITY_EPS).count() as f64 / self.weights.len() as f64
    }

    /// Scores with the kernel matching this mask's mode.
    pub fn score(&self, t1: &TypeVector, t2: &TypeVector) -> Result<f64> {
        match self.mode {
            ScoreMode::Dot => masked_dot(t1, t2, self),
            ScoreMode::Cosine => masked_cosine(t1, t2, self),
        }
    }
}

/// Weights below this magnitude count as zero in [`DiagonalMask::sparsity`].
pub const SPARSITY_EPS: f64 = 1e-6;

fn check_pair(t1: &TypeVector, t2: &TypeVector) -> Result<()> {
    if t1.vocab_id() != t2.vocab_id() || t1.len() != t2.len() {
        return Err(Error::VocabularyMismatch);
    }
    Ok(())
}

fn check_mask(t: &TypeVector, mask: &DiagonalMask) -> Result<()> {
    if mask.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: mask.len(),
        });
    }
    Ok(())
}

pub(crate) fn dot_raw(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub(crate) fn masked_dot_raw(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((x, y), wj) in a.iter().zip(b).zip(w) {
        acc += wj * (x * y);
    }
    acc
}

/// `num / √(n1 · n2)`; undefined unless both norms are positive.
pub(crate) fn normalize(num: f64, n1: f64, n2: f64) -> Result<f64> {
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(num / (n1 * n2).sqrt())
}

pub(crate) fn cosine_raw(a: &[f64], b: &[f64]) -> Result<f64> {
    normalize(dot_raw(a, b), dot_raw(a, a), dot_raw(b, b))
}

pub(crate) fn masked_cosine_raw(a: &[f64], b: &[f64], w: &[f64]) -> Result<f64> {
    normalize(masked_dot_raw(a, b, w), masked_dot_raw(a, a, w), masked_dot_raw(b, b, w))
}

/// `Σ_j t1_j t2_j`.
pub fn dot(t1: &TypeVector, t2: &TypeVector) -> Result<f64> {
    check_pair(t1, t2)?;
    Ok(dot_raw(t1.values(), t2.values()))
}

/// Cosine similarity; a zero-norm input is an error rather than 0.
pub fn cosine(t1: &TypeVector, t2: &TypeVector) -> Result<f64> {
    check_pair(t1, t2)?;
    cosine_raw(t1.values(), t2.values())
}

/// `Σ_j w_j t1_j t2_j`.
pub fn masked_dot(t1: &TypeVector, t2: &TypeVector, mask: &DiagonalMask) -> Result<f64> {
    check_pair(t1, t2)?;
    check_mask(t1, mask)?;
    Ok(masked_dot_raw(t1.values(), t2.values(), mask.weights()))
}

/// Cosine under the `W`-weighted inner product. Errors when either weighted norm is not positive.
pub fn masked_cosine(t1: &TypeVector, t2: &TypeVector, mask: &DiagonalMask) -> Result<f64> {
    check_pair(t1, t2)?;
    check_mask(t1, mask)?;
    masked_cosine_raw(t1.values(), t2.values(), mask.weights())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TypeVocabulary, VocabId};

    const ID: VocabId = VocabId(7);

    fn tv(v: &[f64]) -> TypeVector {
        TypeVector::new(v.to_vec(), ID).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&tv(&[1.0, 0.0]), &tv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dot(&tv(&[0.5, 0.5]), &tv(&[0.5, 0.5])).unwrap(), 0.5);
    }

    #[test]
    fn cosine_examples() {
        let t = tv(&[0.3, 0.7, 0.1]);
        assert_eq!(cosine(&t, &t).unwrap(), 1.0);
        assert_eq!(cosine(&tv(&[1.0, 0.0]), &tv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine(&tv(&[1.0, 1.0, 0.0, 0.0]), &tv(&[1.0, 0.0, 1.0, 0.0])).unwrap(), 0.5);
        assert!(matches!(cosine(&tv(&[0.0, 0.0]), &t), Err(Error::VocabularyMismatch)));
        assert!(matches!(cosine(&tv(&[0.0, 0.0]), &tv(&[1.0, 0.0])), Err(Error::UndefinedSimilarity)));
    }

    #[test]
    fn vocabulary_mismatch() {
        let other = TypeVocabulary::from_entries(vec![("x".into(), 1), ("y".into(), 1)]).unwrap();
        let a = TypeVector::new(vec![0.5, 0.5], other.id()).unwrap();
        assert!(matches!(dot(&a, &tv(&[0.5, 0.5])), Err(Error::VocabularyMismatch)));
    }

    #[test]
    fn masked_examples() {
        let (a, b) = (tv(&[0.2, 0.9, 0.4]), tv(&[0.6, 0.1, 0.8]));
        let ones = DiagonalMask::ones(3, ScoreMode::Dot);
        assert_eq!(masked_dot(&a, &b, &ones).unwrap(), dot(&a, &b).unwrap());
        let zeros = DiagonalMask::new(vec![0.0; 3], ScoreMode::Dot).unwrap();
        assert_eq!(masked_dot(&a, &b, &zeros).unwrap(), 0.0);

        let ones = DiagonalMask::ones(3, ScoreMode::Cosine);
        assert!((masked_cosine(&a, &b, &ones).unwrap() - cosine(&a, &b).unwrap()).abs() <= 1e-9);

        let m = DiagonalMask::new(vec![0.0, 1.0], ScoreMode::Cosine).unwrap();
        assert_eq!(masked_cosine(&tv(&[1.0, 0.5]), &tv(&[0.0, 0.5]), &m).unwrap(), 1.0);
        assert!(matches!(
            masked_cosine(&tv(&[1.0, 0.0]), &tv(&[0.0, 0.5]), &m),
            Err(Error::UndefinedSimilarity)
        ));
        assert!(masked_dot(&a, &b, &DiagonalMask::ones(2, ScoreMode::Dot)).is_err());
    }

    #[test]
    fn cosine_masks_are_clipped() {
        let m = DiagonalMask::new(vec![-0.5, 0.5, 1.5], ScoreMode::Cosine).unwrap();
        assert_eq!(m.weights(), &[0.0, 0.5, 1.0]);
        let d = DiagonalMask::new(vec![-0.5, 1.5], ScoreMode::Dot).unwrap();
        assert_eq!(d.weights(), &[-0.5, 1.5]);
        assert!(DiagonalMask::new(vec![f64::NAN], ScoreMode::Dot).is_err());
    }

    #[test]
    fn sparsity_statistic() {
        let m = DiagonalMask::new(vec![0.0, 1e-7, -1e-7, 0.5], ScoreMode::Dot).unwrap();
        assert_eq!(m.sparsity(), 0.75);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..=1.0, n)
        }

        proptest! {
            #[test]
            fn kernels_are_symmetric(a in probs(12), b in probs(12), w in probs(12)) {
                let (a, b) = (tv(&a), tv(&b));
                let m = DiagonalMask::new(w, ScoreMode::Cosine).unwrap();
                prop_assert_eq!(dot(&a, &b).unwrap(), dot(&b, &a).unwrap());
                prop_assert_eq!(masked_dot(&a, &b, &m).unwrap(), masked_dot(&b, &a, &m).unwrap());
                if let (Ok(x), Ok(y)) = (cosine(&a, &b), cosine(&b, &a)) {
                    prop_assert_eq!(x, y);
                }
                if let (Ok(x), Ok(y)) = (masked_cosine(&a, &b, &m), masked_cosine(&b, &a, &m)) {
                    prop_assert_eq!(x, y);
                }
            }

            #[test]
            fn masked_dot_is_linear(a in probs(8), b in probs(8), w in prop::collection::vec(-2.0f64..2.0, 8), s in 0.0f64..1.0) {
                let m = DiagonalMask::new(w, ScoreMode::Dot).unwrap();
                let scaled: Vec<f64> = a.iter().map(|x| s * x).collect();
                let lhs = masked_dot(&tv(&scaled), &tv(&b), &m).unwrap();
                let rhs = s * masked_dot(&tv(&a), &tv(&b), &m).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }

            #[test]
            fn masked_cosine_in_unit_interval(a in probs(10), b in probs(10), w in probs(10)) {
                let m = DiagonalMask::new(w, ScoreMode::Cosine).unwrap();
                if let Ok(c) = masked_cosine(&tv(&a), &tv(&b), &m) {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
                }
            }

            #[test]
            fn zeroed_dimensions_are_inert(a in probs(6), b in probs(6), w in probs(6), j in 0usize..6, v in 0.0f64..=1.0) {
                let mut w = w;
                w[j] = 0.0;
                let m = DiagonalMask::new(w, ScoreMode::Cosine).unwrap();
                let mut a2 = a.clone();
                a2[j] = v;
                prop_assert_eq!(masked_dot(&tv(&a), &tv(&b), &m).unwrap(), masked_dot(&tv(&a2), &tv(&b), &m).unwrap());
                match (masked_cosine(&tv(&a), &tv(&b), &m), masked_cosine(&tv(&a2), &tv(&b), &m)) {
                    (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "definedness changed"),
                }
            }

            #[test]
            fn cosine_scale_invariant(a in probs(9), b in probs(9), s in 0.01f64..1.0) {
                let scaled: Vec<f64> = a.iter().map(|x| s * x).collect();
                if let Ok(c) = cosine(&tv(&a), &tv(&b)) {
                    let c2 = cosine(&tv(&scaled), &tv(&b)).unwrap();
                    prop_assert!((c - c2).abs() <= 1e-12);
                }
            }
        }
    }
}
