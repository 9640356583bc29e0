//! Task-specific type reduction.
//!
//! A diagonal mask `W` is learned on a binary downstream task with an L1 penalty
//! that drives uninformative type weights to exactly zero. The surviving type set
//! is then cut down to the largest-magnitude fraction of weights and vectors are
//! projected onto it.
//!
//! Training minimizes
//!
//! ```text
//! mean_i BCE(σ(a · sim_W(left_i, right_i) + b), y_i) + λ Σ_j |w_j|
//! ```
//!
//! by full-batch (or minibatch) subgradient steps. The penalty step is truncated
//! at zero: a weight the penalty would push across zero stops at zero, and at
//! zero the penalty contributes no subgradient. In cosine mode weights are
//! clipped into `[0, 1]` after every update.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TypeVocabulary, VocabId};
use crate::error::{Error, Result};
use crate::sim::{masked_dot_raw, DiagonalMask, ScoreMode};
use crate::tasks::NedInstance;
use crate::typer::{sigmoid, TypeVector};

/// Two vectors and whether they belong together.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPair {
    pub left: TypeVector,
    pub right: TypeVector,
    pub label: bool,
}

impl BinaryPair {
    pub fn new(left: TypeVector, right: TypeVector, label: bool) -> Result<Self> {
        if left.vocab_id() != right.vocab_id() || left.len() != right.len() {
            return Err(Error::VocabularyMismatch);
        }
        Ok(Self { left, right, label })
    }
}

/// Turns NED instances into one positive pair (mention, gold candidate) and one
/// negative pair (mention, random other candidate) each. Instances with a single
/// candidate are skipped; the second return value counts them.
pub fn make_binary_ned_pairs(instances: &[NedInstance], seed: u64) -> Result<(Vec<BinaryPair>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(2 * instances.len());
    let mut skipped = 0;
    for inst in instances {
        let n = inst.candidate_vecs.len();
        if inst.gold_index >= n {
            return Err(Error::InvalidArgument(format!(
                "gold index {} out of range for {n} candidates",
                inst.gold_index
            )));
        }
        if n < 2 {
            skipped += 1;
            continue;
        }
        let mut neg = rng.random_range(0..n - 1);
        if neg >= inst.gold_index {
            neg += 1;
        }
        pairs.push(BinaryPair::new(
            inst.mention_vec.clone(),
            inst.candidate_vecs[inst.gold_index].clone(),
            true,
        )?);
        pairs.push(BinaryPair::new(inst.mention_vec.clone(), inst.candidate_vecs[neg].clone(), false)?);
    }
    Ok((pairs, skipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskTrainConfig {
    pub lambda_l1: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub scorer: ScoreMode,
    /// Pairs per update; `None` uses the whole training set for every step.
    pub batch_size: Option<usize>,
}

impl Default for MaskTrainConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 1e-3,
            lr: 0.1,
            epochs: 200,
            seed: 0,
            scorer: ScoreMode::Cosine,
            batch_size: None,
        }
    }
}

/// A mask together with the logistic calibrators `σ(scale · sim + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedScorer {
    pub mask: DiagonalMask,
    pub scale: f64,
    pub bias: f64,
}

impl MaskedScorer {
    pub fn similarity(&self, left: &TypeVector, right: &TypeVector) -> Result<f64> {
        self.mask.score(left, right)
    }

    /// Probability that the pair is positive.
    pub fn probability(&self, left: &TypeVector, right: &TypeVector) -> Result<f64> {
        Ok(sigmoid(self.scale * self.similarity(left, right)? + self.bias))
    }

    pub fn predict(&self, pair: &BinaryPair) -> Result<bool> {
        Ok(self.scale * self.similarity(&pair.left, &pair.right)? + self.bias > 0.0)
    }

    /// Fraction of pairs predicted correctly. Pairs whose similarity is undefined count as wrong.
    pub fn accuracy(&self, pairs: &[BinaryPair]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("no pairs to score".into()));
        }
        let mut correct = 0usize;
        for pair in pairs {
            match self.predict(pair) {
                Ok(p) if p == pair.label => correct += 1,
                Ok(_) | Err(Error::UndefinedSimilarity) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(correct as f64 / pairs.len() as f64)
    }

    /// Keeps the weights of `reduced`'s types and zeroes every other weight.
    pub fn restricted_to(&self, reduced: &ReducedVocabulary) -> Result<Self> {
        if self.mask.len() != reduced.parent_len() {
            return Err(Error::DimensionMismatch {
                expected: reduced.parent_len(),
                found: self.mask.len(),
            });
        }
        let mut weights = vec![0.0; self.mask.len()];
        for &i in reduced.kept_indices() {
            weights[i] = self.mask.weights()[i];
        }
        Ok(Self {
            mask: DiagonalMask::new(weights, self.mask.mode())?,
            ..*self
        })
    }

    /// The same scorer expressed over the reduced vocabulary.
    pub fn projected(&self, reduced: &ReducedVocabulary) -> Result<Self> {
        if self.mask.len() != reduced.parent_len() {
            return Err(Error::DimensionMismatch {
                expected: reduced.parent_len(),
                found: self.mask.len(),
            });
        }
        let weights = reduced.kept_indices().iter().map(|&i| self.mask.weights()[i]).collect();
        Ok(Self {
            mask: DiagonalMask::new(weights, self.mask.mode())?,
            ..*self
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskTrainOutcome {
    pub scorer: MaskedScorer,
    /// Fraction of weights with `|w_j| < 1e-6`.
    pub sparsity: f64,
    /// Penalized objective on the training pairs after each epoch.
    pub objective: Vec<f64>,
}

struct PairScore {
    sim: f64,
    defined: bool,
}

fn pair_score(pair: &BinaryPair, w: &[f64], mode: ScoreMode) -> (PairScore, f64, f64) {
    let (x, y) = (pair.left.values(), pair.right.values());
    match mode {
        ScoreMode::Dot => (
            PairScore {
                sim: masked_dot_raw(x, y, w),
                defined: true,
            },
            0.0,
            0.0,
        ),
        ScoreMode::Cosine => {
            let num = masked_dot_raw(x, y, w);
            let p = masked_dot_raw(x, x, w);
            let q = masked_dot_raw(y, y, w);
            if p > 0.0 && q > 0.0 {
                (
                    PairScore {
                        sim: num / (p * q).sqrt(),
                        defined: true,
                    },
                    p,
                    q,
                )
            } else {
                (PairScore { sim: 0.0, defined: false }, p, q)
            }
        }
    }
}

fn logistic_loss(z: f64, label: bool) -> f64 {
    // log(1 + e^{-z}) for positives, log(1 + e^{z}) for negatives, computed stably.
    let m = if label { -z } else { z };
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Penalized objective `mean BCE + λ‖w‖₁` of a scorer on `pairs`. Pairs with an
/// undefined cosine are scored with similarity 0.
pub fn mask_objective(scorer: &MaskedScorer, pairs: &[BinaryPair], lambda_l1: f64) -> f64 {
    let w = scorer.mask.weights();
    let data: f64 = pairs
        .iter()
        .map(|pair| {
            let (s, _, _) = pair_score(pair, w, scorer.mask.mode());
            logistic_loss(scorer.scale * s.sim + scorer.bias, pair.label)
        })
        .sum::<f64>()
        / pairs.len() as f64;
    data + lambda_l1 * w.iter().map(|x| x.abs()).sum::<f64>()
}

fn check_pairs(pairs: &[BinaryPair]) -> Result<(usize, VocabId)> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::EmptyInput("no pairs to train a mask on".into()))?;
    let (len, id) = (first.left.len(), first.left.vocab_id());
    for p in pairs {
        if p.left.vocab_id() != id || p.right.vocab_id() != id || p.left.len() != len || p.right.len() != len {
            return Err(Error::VocabularyMismatch);
        }
    }
    Ok((len, id))
}

/// Learns a sparse diagonal mask and its calibrators on `pairs`.
///
/// The mask starts at all ones. The calibrators start so that the initial
/// logits are standardized: `scale = 1 / std(sim)`, `bias = −mean(sim) · scale`.
pub fn train_mask(pairs: &[BinaryPair], config: &MaskTrainConfig) -> Result<MaskTrainOutcome> {
    let (n_types, _) = check_pairs(pairs)?;
    if !(config.lambda_l1 >= 0.0) || !config.lambda_l1.is_finite() {
        return Err(Error::InvalidArgument("lambda_l1 must be a finite value ≥ 0".into()));
    }
    if !(config.lr > 0.0) {
        return Err(Error::InvalidArgument("lr must be positive".into()));
    }
    if config.batch_size == Some(0) {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let mode = config.scorer;
    let mut w = vec![1.0; n_types];

    let initial: Vec<f64> = pairs.iter().map(|p| pair_score(p, &w, mode).0.sim).collect();
    let mean = initial.iter().sum::<f64>() / initial.len() as f64;
    let var = initial.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / initial.len() as f64;
    let mut scale = 1.0 / var.sqrt().max(1e-6);
    let mut bias = -mean * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batch_size = config.batch_size.unwrap_or(pairs.len()).min(pairs.len());
    let mut grad_w = vec![0.0; n_types];
    let mut objective = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.batch_size.is_some() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let (mut grad_scale, mut grad_bias) = (0.0, 0.0);
            for &i in chunk {
                let pair = &pairs[i];
                let (s, p, q) = pair_score(pair, &w, mode);
                let z = scale * s.sim + bias;
                let residual = sigmoid(z) - if pair.label { 1.0 } else { 0.0 };
                grad_scale += residual * s.sim;
                grad_bias += residual;
                if !s.defined {
                    continue;
                }
                let (x, y) = (pair.left.values(), pair.right.values());
                let r = residual * scale;
                match mode {
                    ScoreMode::Dot => {
                        for j in 0..n_types {
                            grad_w[j] += r * x[j] * y[j];
                        }
                    }
                    ScoreMode::Cosine => {
                        // ∂s/∂w_j = x_j y_j / √(PQ) − s/2 · (x_j²/P + y_j²/Q)
                        let inv = 1.0 / (p * q).sqrt();
                        let half = 0.5 * s.sim;
                        for j in 0..n_types {
                            let ds = x[j] * y[j] * inv - half * (x[j] * x[j] / p + y[j] * y[j] / q);
                            grad_w[j] += r * ds;
                        }
                    }
                }
            }
            let m = chunk.len() as f64;
            let step = config.lr / m;
            scale -= step * grad_scale;
            bias -= step * grad_bias;
            let shrink = config.lr * config.lambda_l1;
            for (wj, g) in w.iter_mut().zip(&grad_w) {
                let v = *wj - step * g;
                // Truncated penalty step: stop at zero instead of crossing it.
                *wj = if v > shrink {
                    v - shrink
                } else if v < -shrink {
                    v + shrink
                } else {
                    0.0
                };
                if mode == ScoreMode::Cosine {
                    *wj = wj.clamp(0.0, 1.0);
                }
            }
        }
        let scorer = MaskedScorer {
            mask: DiagonalMask::new(w.clone(), mode).map_err(|_| Error::Divergence {
                epoch,
                step: 0,
                loss: f64::NAN,
            })?,
            scale,
            bias,
        };
        let obj = mask_objective(&scorer, pairs, config.lambda_l1);
        if !obj.is_finite() || !scale.is_finite() || !bias.is_finite() {
            return Err(Error::Divergence {
                epoch,
                step: 0,
                loss: obj,
            });
        }
        objective.push(obj);
    }

    let mask = DiagonalMask::new(w, mode)?;
    Ok(MaskTrainOutcome {
        sparsity: mask.sparsity(),
        scorer: MaskedScorer { mask, scale, bias },
        objective,
    })
}

/// A subset of a parent vocabulary, in parent order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVocabulary {
    kept: Vec<usize>,
    parent_id: VocabId,
    parent_len: usize,
    reduced: TypeVocabulary,
    old_to_new: HashMap<usize, usize>,
}

impl ReducedVocabulary {
    /// Builds the subset of `parent` at `kept` (sorted and deduplicated here).
    pub fn from_indices(parent: &TypeVocabulary, mut kept: Vec<usize>) -> Result<Self> {
        kept.sort_unstable();
        kept.dedup();
        if let Some(&last) = kept.last() {
            if last >= parent.len() {
                return Err(Error::DimensionMismatch {
                    expected: parent.len(),
                    found: last + 1,
                });
            }
        }
        let entries = kept
            .iter()
            .map(|&i| (parent.types()[i].clone(), parent.counts()[i]))
            .collect();
        let reduced = TypeVocabulary::from_entries(entries)?;
        let old_to_new = kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        Ok(Self {
            kept,
            parent_id: parent.id(),
            parent_len: parent.len(),
            reduced,
            old_to_new,
        })
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn parent_id(&self) -> VocabId {
        self.parent_id
    }

    pub fn parent_len(&self) -> usize {
        self.parent_len
    }

    /// The reduced inventory; projected vectors are indexed by it.
    pub fn vocab(&self) -> &TypeVocabulary {
        &self.reduced
    }

    pub fn new_position(&self, old: usize) -> Option<usize> {
        self.old_to_new.get(&old).copied()
    }

    /// Writes `{"parent_types": n, "kept_indices": [...]}`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = ReducedFile {
            parent_types: self.parent_len,
            kept_indices: self.kept.clone(),
        };
        let text = serde_json::to_string(&doc).expect("index list serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, parent: &TypeVocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ReducedFile =
            serde_json::from_str(&text).map_err(|e| Error::malformed(1, format!("invalid index list: {e}")))?;
        if doc.parent_types != parent.len() {
            return Err(Error::Incompatible(format!(
                "reduced vocabulary was built over {} types, model has {}",
                doc.parent_types,
                parent.len()
            )));
        }
        Self::from_indices(parent, doc.kept_indices)
    }
}

#[derive(Serialize, Deserialize)]
struct ReducedFile {
    parent_types: usize,
    kept_indices: Vec<usize>,
}

/// Number of types kept when pruning `n` types to `fraction`: `⌈fraction · n⌉`,
/// with products that are integers up to rounding error treated as exact.
pub fn kept_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Keeps the `⌈fraction · |T|⌉` types with the largest `|w_j|`, ties to the lower index.
pub fn prune_top_fraction(mask: &DiagonalMask, fraction: f64, vocab: &TypeVocabulary) -> Result<ReducedVocabulary> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if mask.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            found: mask.len(),
        });
    }
    let w = mask.weights();
    let k = kept_count(w.len(), fraction);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    ReducedVocabulary::from_indices(vocab, order)
}

/// Restricts `t` to the kept types, in parent order.
pub fn project_vector(t: &TypeVector, reduced: &ReducedVocabulary) -> Result<TypeVector> {
    if t.vocab_id() != reduced.parent_id() || t.len() != reduced.parent_len() {
        return Err(Error::VocabularyMismatch);
    }
    let values = reduced.kept_indices().iter().map(|&i| t.values()[i]).collect();
    TypeVector::new(values, reduced.vocab().id())
}

pub fn project_pairs(pairs: &[BinaryPair], reduced: &ReducedVocabulary) -> Result<Vec<BinaryPair>> {
    pairs
        .iter()
        .map(|p| {
            Ok(BinaryPair {
                left: project_vector(&p.left, reduced)?,
                right: project_vector(&p.right, reduced)?,
                label: p.label,
            })
        })
        .collect()
}

/// First line of a mask file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskHeader {
    pub mode: ScoreMode,
    pub lambda: f64,
    pub seed: u64,
    pub scale: f64,
    pub bias: f64,
}

#[derive(Serialize, Deserialize)]
struct MaskRow {
    index: usize,
    r#type: String,
    weight: f64,
}

/// Writes a mask file: a header line followed by one `{"index", "type", "weight"}` row per type.
pub fn write_mask(
    mut writer: impl Write,
    scorer: &MaskedScorer,
    config: &MaskTrainConfig,
    vocab: &TypeVocabulary,
) -> Result<()> {
    if scorer.mask.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            found: scorer.mask.len(),
        });
    }
    let header = MaskHeader {
        mode: scorer.mask.mode(),
        lambda: config.lambda_l1,
        seed: config.seed,
        scale: scorer.scale,
        bias: scorer.bias,
    };
    let io = |e| Error::io("<writer>", e);
    writeln!(writer, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
    for (index, (name, &weight)) in vocab.types().iter().zip(scorer.mask.weights()).enumerate() {
        let row = MaskRow {
            index,
            r#type: name.clone(),
            weight,
        };
        writeln!(writer, "{}", serde_json::to_string(&row).expect("row serializes")).map_err(io)?;
    }
    Ok(())
}

pub fn save_mask(
    path: impl AsRef<Path>,
    scorer: &MaskedScorer,
    config: &MaskTrainConfig,
    vocab: &TypeVocabulary,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mask(&mut w, scorer, config, vocab)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a mask file written for `vocab`.
pub fn load_mask(path: impl AsRef<Path>, vocab: &TypeVocabulary) -> Result<(MaskHeader, MaskedScorer)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{} is empty", path.display())))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: MaskHeader =
        serde_json::from_str(&first).map_err(|e| Error::malformed(1, format!("invalid mask header: {e}")))?;
    let mut weights = vec![None; vocab.len()];
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: MaskRow = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(idx + 1, format!("invalid mask row: {e}")))?;
        if vocab.name(row.index) != Some(row.r#type.as_str()) {
            return Err(Error::malformed(
                idx + 1,
                format!("type {:?} at index {} does not match the vocabulary", row.r#type, row.index),
            ));
        }
        weights[row.index] = Some(row.weight);
    }
    let weights: Option<Vec<f64>> = weights.into_iter().collect();
    let weights = weights.ok_or_else(|| Error::Incompatible("mask does not cover every type".into()))?;
    let scorer = MaskedScorer {
        mask: DiagonalMask::new(weights, header.mode)?,
        scale: header.scale,
        bias: header.bias,
    };
    Ok((header, scorer))
}
