//! Macro-averaged precision, recall and F1 for multi-label typing.

use serde::{Deserialize, Serialize};

use super::TypeVector;
use crate::corpus::GoldTypeVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypingScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Predicted set per example is `{j : p_j > threshold}`.
///
/// Per-example precision is 1 when nothing is predicted; per-example recall is 1
/// when the gold set is empty. Both are averaged over examples and F1 is taken
/// from the averages.
pub fn typing_metrics(preds: &[TypeVector], golds: &[GoldTypeVector], threshold: f64) -> Result<TypingScores> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    if preds.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            found: preds.len(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    for (pred, gold) in preds.iter().zip(golds) {
        if pred.len() != gold.len() {
            return Err(Error::DimensionMismatch {
                expected: gold.len(),
                found: pred.len(),
            });
        }
        let mut predicted = 0usize;
        let mut hits = 0usize;
        for (j, &p) in pred.values().iter().enumerate() {
            if p > threshold {
                predicted += 1;
                if gold.get(j) {
                    hits += 1;
                }
            }
        }
        p_sum += if predicted == 0 { 1.0 } else { hits as f64 / predicted as f64 };
        r_sum += if gold.popcount() == 0 {
            1.0
        } else {
            hits as f64 / gold.popcount() as f64
        };
    }
    let n = preds.len() as f64;
    let (precision, recall) = (p_sum / n, r_sum / n);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(TypingScores {
        precision,
        recall,
        f1,
    })
}
