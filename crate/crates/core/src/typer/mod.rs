//! The typing model: `(mention, context)` → hidden vector `h` → `t = σ(E·h)`.
//!
//! The encoder is a small bag-of-tokens network. Tokens are hashed into a fixed
//! number of buckets, each bucket owns a learned `d`-dimensional embedding, and
//!
//! ```text
//! h = tanh(A · [avg(mention embeddings); avg(context embeddings)] + b)
//! ```
//!
//! with `A` of shape `d × 2d`. The type matrix `E` (`|T| × d`) maps `h` to one
//! logit per type and an element-wise sigmoid turns those into probabilities.

mod checkpoint;
mod external;
mod loss;
mod metrics;
mod train;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, read_checkpoint, save_checkpoint, write_checkpoint};
pub use external::{import_external_vectors, read_external_vectors, write_type_vectors, StoredVector, VectorKind, VectorRecord, VectorStore};
pub use loss::{batch_loss, bce_loss, loss_gradients, Gradients, TrainingExample, PROB_EPSILON};
pub use metrics::{typing_metrics, TypingScores};
pub use train::{evaluate_typing, train, train_with_observer, EpochStats, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TypeVocabulary, VocabId};
use crate::error::{Error, Result};
use crate::tokenize::fnv1a;

/// Per-type probabilities over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeVector {
    probs: Vec<f64>,
    vocab: VocabId,
}

impl TypeVector {
    /// Validates that every component is a finite value in `[0, 1]`.
    pub fn new(probs: Vec<f64>, vocab: VocabId) -> Result<Self> {
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::OutOfRange {
                what: "probability".into(),
                index,
                value,
            });
        }
        Ok(Self { probs, vocab })
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn vocab_id(&self) -> VocabId {
        self.vocab
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.probs
    }

    /// Positions of the `k` largest probabilities, highest first; ties go to the lower position.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        order.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        order.into_iter().take(k).map(|i| (i, self.probs[i])).collect()
    }

    pub(crate) fn set(&mut self, position: usize, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value));
        self.probs[position] = value;
    }
}

/// The encoder output fed to the type matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenVector(pub Vec<f64>);

impl HiddenVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Reserved id of the leading marker.
pub const CLS_ID: u32 = 0;
/// Reserved id of the segment separator.
pub const SEP_ID: u32 = 1;
const FIRST_WORD_ID: u32 = 2;

/// Token ids laid out as `CLS mention SEP context SEP`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    ids: Vec<u32>,
    mention_len: usize,
}

impl EncodedInput {
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn mention_ids(&self) -> &[u32] {
        &self.ids[1..1 + self.mention_len]
    }

    pub fn context_ids(&self) -> &[u32] {
        &self.ids[2 + self.mention_len..self.ids.len() - 1]
    }

    /// Maps a word id back to its embedding row.
    pub fn bucket_of(id: u32) -> Option<usize> {
        id.checked_sub(FIRST_WORD_ID).map(|b| b as usize)
    }
}

/// Hashes a token into `[0, buckets)`.
pub fn token_bucket(token: &str, buckets: usize) -> usize {
    (fnv1a(token.as_bytes()) % buckets as u64) as usize
}

/// Lays out `CLS mention SEP context SEP` with hashed token ids.
pub fn featurize(mention: &[String], context: &[String], buckets: usize) -> Result<EncodedInput> {
    if mention.is_empty() {
        return Err(Error::InvalidArgument("mention must be non-empty".into()));
    }
    if buckets == 0 || buckets > (u32::MAX - FIRST_WORD_ID) as usize {
        return Err(Error::InvalidArgument(format!("unsupported bucket count {buckets}")));
    }
    let word = |t: &String| token_bucket(t, buckets) as u32 + FIRST_WORD_ID;
    let mut ids = Vec::with_capacity(mention.len() + context.len() + 3);
    ids.push(CLS_ID);
    ids.extend(mention.iter().map(word));
    ids.push(SEP_ID);
    ids.extend(context.iter().map(word));
    ids.push(SEP_ID);
    Ok(EncodedInput {
        ids,
        mention_len: mention.len(),
    })
}

/// Encoder shape and initialization seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden and token-embedding dimension `d`.
    pub dim: usize,
    /// Number of hash buckets for token ids.
    pub buckets: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            buckets: 65_536,
            seed: 0,
        }
    }
}

const INIT_SCALE: f64 = 0.05;

/// Encoder parameters plus the type matrix `E` and the vocabulary it indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct TyperModel {
    vocab: TypeVocabulary,
    config: ModelConfig,
    /// `buckets × dim`, row-major.
    embeddings: Vec<f64>,
    /// `dim × 2·dim`, row-major.
    projection: Vec<f64>,
    bias: Vec<f64>,
    /// `|T| × dim`, row-major.
    type_matrix: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Forward {
    pub mention_avg: Vec<f64>,
    pub context_avg: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl TyperModel {
    /// Initializes weights uniformly in `[-0.05, 0.05]` from `config.seed`; the bias starts at zero.
    pub fn new(vocab: TypeVocabulary, config: ModelConfig) -> Result<Self> {
        Self::with_init_scale(vocab, config, INIT_SCALE)
    }

    /// As [`TyperModel::new`] with a custom uniform range, mainly for numerical tests.
    pub fn with_init_scale(vocab: TypeVocabulary, config: ModelConfig, scale: f64) -> Result<Self> {
        let mut model = Self::zeroed(vocab, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut fill = |v: &mut [f64]| {
            for x in v {
                *x = rng.random_range(-scale..=scale);
            }
        };
        fill(&mut model.embeddings);
        fill(&mut model.projection);
        fill(&mut model.type_matrix);
        Ok(model)
    }

    /// A model whose parameters are all zero.
    pub fn zeroed(vocab: TypeVocabulary, config: ModelConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        if config.buckets == 0 {
            return Err(Error::InvalidArgument("buckets must be at least 1".into()));
        }
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("vocabulary is empty".into()));
        }
        let d = config.dim;
        Ok(Self {
            embeddings: vec![0.0; config.buckets * d],
            projection: vec![0.0; d * 2 * d],
            bias: vec![0.0; d],
            type_matrix: vec![0.0; vocab.len() * d],
            vocab,
            config,
        })
    }

    pub(crate) fn from_parts(
        vocab: TypeVocabulary,
        config: ModelConfig,
        embeddings: Vec<f64>,
        projection: Vec<f64>,
        bias: Vec<f64>,
        type_matrix: Vec<f64>,
    ) -> Self {
        Self {
            vocab,
            config,
            embeddings,
            projection,
            bias,
            type_matrix,
        }
    }

    pub fn vocab(&self) -> &TypeVocabulary {
        &self.vocab
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }

    pub fn embeddings_mut(&mut self) -> &mut [f64] {
        &mut self.embeddings
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut [f64] {
        &mut self.projection
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn type_matrix(&self) -> &[f64] {
        &self.type_matrix
    }

    pub fn type_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.type_matrix
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        [&self.embeddings, &self.projection, &self.bias, &self.type_matrix]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn featurize(&self, mention: &[String], context: &[String]) -> Result<EncodedInput> {
        featurize(mention, context, self.config.buckets)
    }

    fn average_rows(&self, ids: &[u32]) -> Vec<f64> {
        let d = self.config.dim;
        let mut avg = vec![0.0; d];
        let rows: Vec<usize> = ids.iter().filter_map(|&id| EncodedInput::bucket_of(id)).collect();
        if rows.is_empty() {
            return avg;
        }
        for row in &rows {
            for (a, e) in avg.iter_mut().zip(&self.embeddings[row * d..(row + 1) * d]) {
                *a += e;
            }
        }
        let n = rows.len() as f64;
        avg.iter_mut().for_each(|a| *a /= n);
        avg
    }

    pub(crate) fn forward(&self, input: &EncodedInput) -> Forward {
        let d = self.config.dim;
        let mention_avg = self.average_rows(input.mention_ids());
        let context_avg = self.average_rows(input.context_ids());
        let hidden = (0..d)
            .map(|r| {
                let row = &self.projection[r * 2 * d..(r + 1) * 2 * d];
                let z = self.bias[r]
                    + dot_slices(&row[..d], &mention_avg)
                    + dot_slices(&row[d..], &context_avg);
                z.tanh()
            })
            .collect();
        Forward {
            mention_avg,
            context_avg,
            hidden,
        }
    }

    /// Runs the encoder.
    pub fn encode(&self, input: &EncodedInput) -> HiddenVector {
        HiddenVector(self.forward(input).hidden)
    }

    /// Pre-sigmoid scores `E·h`.
    pub fn logits(&self, h: &HiddenVector) -> Result<Vec<f64>> {
        let d = self.config.dim;
        if h.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: h.dim(),
            });
        }
        Ok(self
            .type_matrix
            .chunks_exact(d)
            .map(|row| dot_slices(row, &h.0))
            .collect())
    }

    /// `t = σ(E·h)`.
    pub fn type_probabilities(&self, h: &HiddenVector) -> Result<TypeVector> {
        let probs = self.logits(h)?.into_iter().map(sigmoid).collect();
        Ok(TypeVector {
            probs,
            vocab: self.vocab.id(),
        })
    }

    /// featurize → encode → type_probabilities.
    pub fn embed_mention(&self, mention: &[String], context: &[String]) -> Result<TypeVector> {
        let input = self.featurize(mention, context)?;
        self.type_probabilities(&self.encode(&input))
    }
}

/// Anything that can turn a mention in context into a type vector: a trained
/// model, or a lookup over precomputed vectors.
pub trait Embedder {
    fn embed(&self, mention: &[String], context: &[String]) -> Result<TypeVector>;
    fn vocab_id(&self) -> VocabId;
}

impl Embedder for TyperModel {
    fn embed(&self, mention: &[String], context: &[String]) -> Result<TypeVector> {
        self.embed_mention(mention, context)
    }

    fn vocab_id(&self) -> VocabId {
        self.vocab.id()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
