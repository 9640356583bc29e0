//! Interpretable entity representations.
//!
//! An entity mention in context is represented by a vector of per-type
//! probabilities from a multi-label typing model. Each component is named by a
//! fine-grained type, so the vectors can be compared directly with dot product or
//! cosine, shrunk to a task-relevant subset of types, and edited by hand-written
//! rules.
//!
//! - [`corpus`]: typing datasets, the type vocabulary and gold labels.
//! - [`typer`]: the typing model, its training loop, checkpoints and vector files.
//! - [`sim`]: dot and cosine kernels, optionally weighted by a diagonal mask.
//! - [`reduce`]: L1-regularized mask learning and type-set pruning.
//! - [`rules`]: post-hoc rules that overwrite selected type probabilities.
//! - [`tasks`]: coreference arc prediction and entity disambiguation harnesses.

pub mod corpus;
pub mod error;
pub mod reduce;
pub mod rules;
pub mod sim;
pub mod tasks;
pub mod tokenize;
pub mod typer;

pub use corpus::{GoldTypeVector, TypeVocabulary, TypingExample, VocabId};
pub use error::{Error, ErrorClass, Result};
pub use sim::{DiagonalMask, ScoreMode};
pub use typer::{Embedder, HiddenVector, ModelConfig, TypeVector, TyperModel};
