//! Summed binary cross-entropy and its analytic gradients.

use std::collections::BTreeMap;

use super::{sigmoid, EncodedInput, TypeVector, TyperModel};
use crate::corpus::GoldTypeVector;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPSILON: f64 = 1e-12;

/// A featurized example with its gold indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: EncodedInput,
    pub gold: GoldTypeVector,
}

fn bce_term(p: f64, positive: bool) -> f64 {
    let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    if positive {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `Σ_j −[g_j ln p_j + (1 − g_j) ln(1 − p_j)]`.
pub fn bce_loss(pred: &TypeVector, gold: &GoldTypeVector) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    Ok(pred
        .values()
        .iter()
        .enumerate()
        .map(|(j, &p)| bce_term(p, gold.get(j)))
        .sum())
}

/// Total loss of `batch` under `model`.
pub fn batch_loss(model: &TyperModel, batch: &[TrainingExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let t = model.type_probabilities(&model.encode(&ex.input))?;
        total += bce_loss(&t, &ex.gold)?;
    }
    Ok(total)
}

/// Gradients shaped like the model parameters. Embedding gradients are sparse:
/// only rows of buckets that occur in the batch are present.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: BTreeMap<usize, Vec<f64>>,
    pub projection: Vec<f64>,
    pub bias: Vec<f64>,
    pub type_matrix: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &TyperModel) -> Self {
        Self {
            embeddings: BTreeMap::new(),
            projection: vec![0.0; model.projection().len()],
            bias: vec![0.0; model.bias().len()],
            type_matrix: vec![0.0; model.type_matrix().len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.projection
            .iter()
            .chain(&self.bias)
            .chain(&self.type_matrix)
            .chain(self.embeddings.values().flatten())
            .all(|x| x.is_finite())
    }
}

/// Analytic gradients of the summed BCE over `batch`; returns `(loss, gradients)`.
pub fn loss_gradients(model: &TyperModel, batch: &[TrainingExample]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("gradient batch is empty".into()));
    }
    let d = model.dim();
    let n_types = model.vocab().len();
    let mut grads = Gradients::zeros(model);
    let mut loss = 0.0;
    let mut dh = vec![0.0; d];
    let mut dz = vec![0.0; d];

    for ex in batch {
        if ex.gold.len() != n_types {
            return Err(Error::DimensionMismatch {
                expected: n_types,
                found: ex.gold.len(),
            });
        }
        let fwd = model.forward(&ex.input);
        let h = &fwd.hidden;

        // Output layer: dL/dlogit_j = p_j − g_j.
        dh.iter_mut().for_each(|x| *x = 0.0);
        for (j, row) in model.type_matrix().chunks_exact(d).enumerate() {
            let logit: f64 = row.iter().zip(h).map(|(e, x)| e * x).sum();
            let p = sigmoid(logit);
            let g = ex.gold.get(j);
            loss += bce_term(p, g);
            let delta = p - if g { 1.0 } else { 0.0 };
            let grow = &mut grads.type_matrix[j * d..(j + 1) * d];
            for k in 0..d {
                grow[k] += delta * h[k];
                dh[k] += delta * row[k];
            }
        }

        // tanh.
        for k in 0..d {
            dz[k] = dh[k] * (1.0 - h[k] * h[k]);
        }

        // Projection and bias.
        let mut d_mention = vec![0.0; d];
        let mut d_context = vec![0.0; d];
        for r in 0..d {
            grads.bias[r] += dz[r];
            let row = &model.projection()[r * 2 * d..(r + 1) * 2 * d];
            let grow = &mut grads.projection[r * 2 * d..(r + 1) * 2 * d];
            for k in 0..d {
                grow[k] += dz[r] * fwd.mention_avg[k];
                grow[d + k] += dz[r] * fwd.context_avg[k];
                d_mention[k] += dz[r] * row[k];
                d_context[k] += dz[r] * row[d + k];
            }
        }

        // Averaged token embeddings.
        for (ids, upstream) in [
            (ex.input.mention_ids(), &d_mention),
            (ex.input.context_ids(), &d_context),
        ] {
            let rows: Vec<usize> = ids.iter().filter_map(|&id| EncodedInput::bucket_of(id)).collect();
            if rows.is_empty() {
                continue;
            }
            let scale = 1.0 / rows.len() as f64;
            for row in rows {
                let g = grads.embeddings.entry(row).or_insert_with(|| vec![0.0; d]);
                for k in 0..d {
                    g[k] += upstream[k] * scale;
                }
            }
        }
    }
    Ok((loss, grads))
}
