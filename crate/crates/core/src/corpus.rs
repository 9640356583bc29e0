//! Typing datasets, the type vocabulary, and gold label encoding.
//!
//! A typing dataset is JSON Lines with one record per line:
//!
//! ```text
//! {"mention": "Spain", "context": "Spain beat Italy in the Fed Cup final.", "types": ["tennis", "women's"]}
//! ```
//!
//! A vocabulary file is JSON Lines of `{"type": ..., "count": ...}` in vocabulary order.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{fnv1a, tokenize};

/// One labeled typing example: mention tokens, context tokens and the gold type names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypingExample {
    pub mention: Vec<String>,
    pub context: Vec<String>,
    pub gold_types: Vec<String>,
}

impl TypingExample {
    /// Builds an example from raw strings, tokenizing mention and context.
    pub fn new(mention: &str, context: &str, gold_types: &[&str]) -> Result<Self> {
        let mention = tokenize(mention);
        if mention.is_empty() {
            return Err(Error::InvalidArgument("mention must be non-empty".into()));
        }
        Ok(Self {
            mention,
            context: tokenize(context),
            gold_types: dedup_preserving(gold_types.iter().map(|s| s.to_string())),
        })
    }
}

fn dedup_preserving(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    items
        .into_iter()
        .filter(|s| seen.insert(s.clone()))
        .collect()
}

/// Options for [`load_typing_dataset`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Stop after this many records.
    pub limit: Option<usize>,
    /// Keep at most this many context tokens on either side of the mention.
    pub window: Option<usize>,
}

#[derive(Deserialize)]
struct RawTypingRecord {
    mention: Option<String>,
    context: Option<String>,
    types: Option<Vec<String>>,
}

/// Reads a typing dataset from JSON Lines, preserving file order. Blank lines are skipped.
pub fn load_typing_dataset(path: impl AsRef<Path>, options: LoadOptions) -> Result<Vec<TypingExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_typing_dataset(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Like [`load_typing_dataset`] but over any buffered reader.
pub fn read_typing_dataset(reader: impl BufRead, options: LoadOptions) -> Result<Vec<TypingExample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        if options.limit.is_some_and(|limit| out.len() >= limit) {
            break;
        }
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTypingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(line_no, format!("invalid JSON: {e}")))?;
        let mention = raw
            .mention
            .ok_or_else(|| Error::malformed(line_no, "missing field \"mention\""))?;
        let context = raw
            .context
            .ok_or_else(|| Error::malformed(line_no, "missing field \"context\""))?;
        let types = raw
            .types
            .ok_or_else(|| Error::malformed(line_no, "missing field \"types\""))?;
        let mention = tokenize(&mention);
        if mention.is_empty() {
            return Err(Error::malformed(line_no, "field \"mention\" is empty"));
        }
        let mut context = tokenize(&context);
        if let Some(window) = options.window {
            context = apply_window(&mention, context, window);
        }
        out.push(TypingExample {
            mention,
            context,
            gold_types: dedup_preserving(types),
        });
    }
    Ok(out)
}

/// Keeps at most `window` tokens on either side of the first occurrence of the
/// mention in the context. When the mention does not occur, the first
/// `2 * window` tokens are kept.
pub fn apply_window(mention: &[String], context: Vec<String>, window: usize) -> Vec<String> {
    let found = (mention.len() <= context.len())
        .then(|| context.windows(mention.len()).position(|w| w == mention))
        .flatten();
    match found {
        Some(start) => {
            let lo = start.saturating_sub(window);
            let hi = (start + mention.len() + window).min(context.len());
            context[lo..hi].to_vec()
        }
        None => context.into_iter().take(2 * window).collect(),
    }
}

/// Content fingerprint of a [`TypeVocabulary`]; type vectors carry it so that
/// vectors indexed by different inventories are never compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VocabId(pub u64);

/// Ordered inventory of type names: descending count, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocabulary {
    types: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    id: VocabId,
}

impl TypeVocabulary {
    /// Builds a vocabulary from `(name, count)` entries, which must already be in
    /// vocabulary order (descending count, lexicographic tie-break).
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (pos, (name, count)) in entries.iter().enumerate() {
            if *count == 0 {
                return Err(Error::InvalidArgument(format!("type {name:?} has count 0")));
            }
            if index.insert(name.clone(), pos).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate type {name:?}")));
            }
            if pos > 0 {
                let (prev_name, prev_count) = &entries[pos - 1];
                if (prev_count, name) < (count, prev_name) {
                    return Err(Error::InvalidArgument(format!(
                        "type {name:?} is out of vocabulary order"
                    )));
                }
            }
        }
        let mut bytes = Vec::new();
        for (name, count) in &entries {
            bytes.extend_from_slice(name.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(&count.to_le_bytes());
        }
        let id = VocabId(fnv1a(&bytes));
        let (types, counts) = entries.into_iter().unzip();
        Ok(Self {
            types,
            counts,
            index,
            id,
        })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn id(&self) -> VocabId {
        self.id
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, position: usize) -> Option<&str> {
        self.types.get(position).map(String::as_str)
    }

    /// Writes the vocabulary as JSON Lines of `{"type", "count"}`.
    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for (name, count) in self.types.iter().zip(&self.counts) {
            let line = serde_json::to_string(&VocabRecord {
                r#type: name.clone(),
                count: *count,
            })
            .expect("vocabulary record serializes");
            writeln!(writer, "{line}").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_jsonl(&mut writer)?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: VocabRecord = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(idx + 1, format!("invalid vocabulary record: {e}")))?;
            entries.push((rec.r#type, rec.count));
        }
        Self::from_entries(entries)
    }
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    r#type: String,
    count: u64,
}

/// Counts how often each type name occurs across `examples` (once per example) and
/// keeps the `max_types` most frequent.
pub fn build_type_vocabulary(examples: &[TypingExample], max_types: usize) -> Result<TypeVocabulary> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no examples to build a vocabulary from".into()));
    }
    if max_types == 0 {
        return Err(Error::InvalidArgument("max_types must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for ex in examples {
        for t in &ex.gold_types {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(name, count)| (name.to_owned(), count))
        .collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps that as the tie-break.
    entries.sort_by(|a, b| b.1.cmp(&a.1));
    entries.truncate(max_types);
    TypeVocabulary::from_entries(entries)
}

/// Gold label indicator over a vocabulary, stored as the sorted set of positions that are on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTypeVector {
    len: usize,
    positives: Vec<usize>,
}

impl GoldTypeVector {
    pub fn from_positions(len: usize, mut positives: Vec<usize>) -> Result<Self> {
        positives.sort_unstable();
        positives.dedup();
        if let Some(&last) = positives.last() {
            if last >= len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: last + 1,
                });
            }
        }
        Ok(Self { len, positives })
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            len: bits.len(),
            positives: bits
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, position: usize) -> bool {
        self.positives.binary_search(&position).is_ok()
    }

    pub fn positives(&self) -> &[usize] {
        &self.positives
    }

    pub fn popcount(&self) -> usize {
        self.positives.len()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = vec![false; self.len];
        for &p in &self.positives {
            bits[p] = true;
        }
        bits
    }
}

/// Running count of gold labels that did or did not survive vocabulary projection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldCoverage {
    pub in_vocabulary: usize,
    pub out_of_vocabulary: usize,
}

impl GoldCoverage {
    pub fn ratio(&self) -> f64 {
        let total = self.in_vocabulary + self.out_of_vocabulary;
        if total == 0 {
            1.0
        } else {
            self.in_vocabulary as f64 / total as f64
        }
    }
}

/// Projects an example's gold type names onto `vocab`. Unknown names are dropped and
/// tallied in `coverage`.
pub fn encode_gold_types(
    example: &TypingExample,
    vocab: &TypeVocabulary,
    coverage: &mut GoldCoverage,
) -> GoldTypeVector {
    let mut positives = Vec::with_capacity(example.gold_types.len());
    for name in &example.gold_types {
        match vocab.position(name) {
            Some(p) => {
                coverage.in_vocabulary += 1;
                positives.push(p);
            }
            None => coverage.out_of_vocabulary += 1,
        }
    }
    positives.sort_unstable();
    positives.dedup();
    GoldTypeVector {
        len: vocab.len(),
        positives,
    }
}

/// Shuffles `examples` under `seed` and splits off `round(dev_fraction * n)` of them
/// (at least one, at most `n - 1`) as the development set.
pub fn split_dataset<T: Clone>(examples: &[T], dev_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dev_fraction must lie in (0, 1), got {dev_fraction}"
        )));
    }
    let n = examples.len();
    if n < 2 {
        return Err(Error::EmptyInput(format!("need at least 2 examples to split, got {n}")));
    }
    let n_dev = ((dev_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev = order[..n_dev].iter().map(|&i| examples[i].clone()).collect();
    let train = order[n_dev..].iter().map(|&i| examples[i].clone()).collect();
    Ok((train, dev))
}
