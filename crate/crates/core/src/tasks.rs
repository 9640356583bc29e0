//! Downstream harnesses that use type vectors without any task training:
//! coreference arc prediction by thresholded cosine, and entity disambiguation
//! by ranking candidate-description vectors against the mention vector.
//!
//! CAP files are JSON Lines of
//! `{"mention1", "context1", "mention2", "context2", "label": 0|1}`.
//! NED files are JSON Lines of
//! `{"mention", "context", "title", "first_sentence", "candidates": [{"id", "title", "description", "prior"}], "gold_index"}`
//! where `title` and `first_sentence` may be null.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{project_vector, ReducedVocabulary};
use crate::rules::{apply_rules, ResolvedRuleSet};
use crate::sim::cosine;
use crate::tokenize::tokenize;
use crate::typer::{Embedder, TypeVector};

/// Default CAP decision threshold.
pub const CAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapExample {
    pub mention1: Vec<String>,
    pub context1: Vec<String>,
    pub mention2: Vec<String>,
    pub context2: Vec<String>,
    pub coreferent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEntity {
    pub id: String,
    /// Title tokens, used as the mention when embedding the description.
    pub description_mention: Vec<String>,
    pub description: Vec<String>,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NedExample {
    pub mention: Vec<String>,
    pub context: Vec<String>,
    pub title: Option<Vec<String>>,
    pub first_sentence: Option<Vec<String>>,
    pub candidates: Vec<CandidateEntity>,
    pub gold_index: usize,
    /// Set once [`prepend_title_context`] has run on this example.
    pub context_prepended: bool,
}

#[derive(Deserialize)]
struct RawCap {
    mention1: Option<String>,
    context1: Option<String>,
    mention2: Option<String>,
    context2: Option<String>,
    label: Option<u8>,
}

#[derive(Deserialize)]
struct RawCandidate {
    id: String,
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    prior: f64,
}

#[derive(Deserialize)]
struct RawNed {
    mention: String,
    #[serde(default)]
    context: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    first_sentence: Option<String>,
    candidates: Vec<RawCandidate>,
    gold_index: usize,
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let path = path.to_owned();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::io(&path, e)))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty())))
}

fn required(line: usize, field: &str, value: Option<String>) -> Result<String> {
    value.ok_or_else(|| Error::malformed(line, format!("missing field {field:?}")))
}

fn non_empty_tokens(line: usize, field: &str, text: &str) -> Result<Vec<String>> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::malformed(line, format!("field {field:?} is empty")));
    }
    Ok(tokens)
}

pub fn load_cap_examples(path: impl AsRef<Path>) -> Result<Vec<CapExample>> {
    let mut out = Vec::new();
    for item in read_lines(path.as_ref())? {
        let (line, text) = item?;
        let raw: RawCap =
            serde_json::from_str(&text).map_err(|e| Error::malformed(line, format!("invalid JSON: {e}")))?;
        let coreferent = match raw.label {
            Some(0) => false,
            Some(1) => true,
            Some(other) => return Err(Error::malformed(line, format!("label must be 0 or 1, got {other}"))),
            None => return Err(Error::malformed(line, "missing field \"label\"")),
        };
        out.push(CapExample {
            mention1: non_empty_tokens(line, "mention1", &required(line, "mention1", raw.mention1)?)?,
            context1: tokenize(&required(line, "context1", raw.context1)?),
            mention2: non_empty_tokens(line, "mention2", &required(line, "mention2", raw.mention2)?)?,
            context2: tokenize(&required(line, "context2", raw.context2)?),
            coreferent,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NedLoadOptions {
    /// Reject examples with more candidates than this.
    pub max_candidates: Option<usize>,
}

pub fn load_ned_examples(path: impl AsRef<Path>, options: NedLoadOptions) -> Result<Vec<NedExample>> {
    let mut out = Vec::new();
    for item in read_lines(path.as_ref())? {
        let (line, text) = item?;
        let raw: RawNed = serde_json::from_str(&text).map_err(|e| Error::malformed(line, format!("invalid record: {e}")))?;
        if raw.candidates.is_empty() {
            return Err(Error::malformed(line, "no candidates"));
        }
        if let Some(cap) = options.max_candidates {
            if raw.candidates.len() > cap {
                return Err(Error::malformed(
                    line,
                    format!("{} candidates exceed the cap of {cap}", raw.candidates.len()),
                ));
            }
        }
        if raw.gold_index >= raw.candidates.len() {
            return Err(Error::malformed(line, format!("gold_index {} out of range", raw.gold_index)));
        }
        let mut ids = HashSet::new();
        let mut candidates = Vec::with_capacity(raw.candidates.len());
        for c in raw.candidates {
            if !ids.insert(c.id.clone()) {
                return Err(Error::malformed(line, format!("duplicate candidate id {:?}", c.id)));
            }
            if !(0.0..=1.0).contains(&c.prior) {
                return Err(Error::malformed(line, format!("prior of {:?} outside [0, 1]", c.id)));
            }
            candidates.push(CandidateEntity {
                id: c.id,
                description_mention: tokenize(&c.title),
                description: tokenize(&c.description),
                prior: c.prior,
            });
        }
        out.push(NedExample {
            mention: non_empty_tokens(line, "mention", &raw.mention)?,
            context: tokenize(&raw.context),
            title: raw.title.as_deref().map(tokenize),
            first_sentence: raw.first_sentence.as_deref().map(tokenize),
            candidates,
            gold_index: raw.gold_index,
            context_prepended: false,
        });
    }
    Ok(out)
}

/// Coreferent iff `cosine(t1, t2) > threshold`.
pub fn cap_predict(t1: &TypeVector, t2: &TypeVector, threshold: f64) -> Result<bool> {
    Ok(cosine(t1, t2)? > threshold)
}

/// A CAP example already turned into vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CapInstance {
    pub left: TypeVector,
    pub right: TypeVector,
    pub coreferent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    /// Examples that could not be scored; they count as incorrect.
    pub errors: usize,
    pub diagnostics: Vec<String>,
}

impl CapReport {
    fn record(&mut self, predicted: bool, gold: bool) {
        self.total += 1;
        match (predicted, gold) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, false) => self.true_negative += 1,
            (false, true) => self.false_negative += 1,
        }
        if predicted == gold {
            self.correct += 1;
        }
    }

    fn record_error(&mut self, index: usize, err: &Error) {
        self.total += 1;
        self.errors += 1;
        self.diagnostics.push(format!("example {index}: {err}"));
    }

    fn finish(mut self) -> Self {
        self.accuracy = self.correct as f64 / self.total as f64;
        self
    }
}

/// Scores vector-level CAP instances.
pub fn cap_evaluate_instances(instances: &[CapInstance], threshold: f64) -> Result<CapReport> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("no CAP examples".into()));
    }
    let mut report = CapReport::default();
    for (i, inst) in instances.iter().enumerate() {
        match cap_predict(&inst.left, &inst.right, threshold) {
            Ok(p) => report.record(p, inst.coreferent),
            Err(e) => report.record_error(i, &e),
        }
    }
    Ok(report.finish())
}

/// Embeds both mentions of every example with `embedder` and scores them.
pub fn cap_evaluate(embedder: &dyn Embedder, examples: &[CapExample], threshold: f64) -> Result<CapReport> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no CAP examples".into()));
    }
    let mut report = CapReport::default();
    for (i, ex) in examples.iter().enumerate() {
        let outcome = embedder.embed(&ex.mention1, &ex.context1).and_then(|t1| {
            let t2 = embedder.embed(&ex.mention2, &ex.context2)?;
            cap_predict(&t1, &t2, threshold)
        });
        match outcome {
            Ok(p) => report.record(p, ex.coreferent),
            Err(e) => report.record_error(i, &e),
        }
    }
    Ok(report.finish())
}

/// Prefixes the context with the document title and first sentence. Examples
/// without a title are returned unchanged apart from the marker.
pub fn prepend_title_context(example: &NedExample) -> NedExample {
    let mut out = example.clone();
    if let Some(title) = &example.title {
        let mut context = title.clone();
        if let Some(first) = &example.first_sentence {
            context.extend(first.iter().cloned());
        }
        context.extend(example.context.iter().cloned());
        out.context = context;
    }
    out.context_prepended = true;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NedPrediction {
    pub index: usize,
    /// Cosine per candidate; `None` where the candidate had zero norm.
    pub scores: Vec<Option<f64>>,
}

/// Highest-cosine candidate, ties to the lowest index. Zero-norm candidates are skipped.
pub fn ned_predict(mention_vec: &TypeVector, candidate_vecs: &[TypeVector]) -> Result<NedPrediction> {
    if candidate_vecs.is_empty() {
        return Err(Error::EmptyInput("no candidates".into()));
    }
    let mut scores = Vec::with_capacity(candidate_vecs.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidate_vecs.iter().enumerate() {
        match cosine(mention_vec, c) {
            Ok(s) => {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
                scores.push(Some(s));
            }
            Err(Error::UndefinedSimilarity) => {
                warn!("candidate {i} has an undefined cosine and is excluded");
                scores.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let (index, _) = best.ok_or(Error::UndefinedSimilarity)?;
    Ok(NedPrediction { index, scores })
}

/// Candidate with the highest prior, ties to the lowest index.
pub fn most_frequent_baseline(example: &NedExample) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in example.candidates.iter().enumerate() {
        if best.is_none_or(|(_, b)| c.prior > b) {
            best = Some((i, c.prior));
        }
    }
    best.map(|(i, _)| i)
}

pub fn most_frequent_accuracy(examples: &[NedExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no NED examples".into()));
    }
    let correct = examples
        .iter()
        .filter(|ex| most_frequent_baseline(ex) == Some(ex.gold_index))
        .count();
    Ok(correct as f64 / examples.len() as f64)
}

/// A NED example already turned into vectors. Mention and context tokens are
/// kept so that rules can be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct NedInstance {
    pub mention: Vec<String>,
    pub context: Vec<String>,
    pub mention_vec: TypeVector,
    pub candidate_vecs: Vec<TypeVector>,
    pub gold_index: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NedOptions<'a> {
    /// Applied to the mention vector before scoring.
    pub rules: Option<&'a ResolvedRuleSet>,
    /// Applied to both sides, after rules.
    pub reduced: Option<&'a ReducedVocabulary>,
    /// Prefix title and first sentence to the context before embedding.
    pub prepend_title: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NedReport {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    pub errors: usize,
    /// Predicted index per example; `None` where scoring failed.
    pub predictions: Vec<Option<usize>>,
    pub diagnostics: Vec<String>,
}

fn score_instance(inst: &NedInstance, options: &NedOptions<'_>) -> Result<usize> {
    let mut mention_vec = match options.rules {
        Some(rules) => apply_rules(&inst.mention_vec, rules, &inst.mention, &inst.context)?,
        None => inst.mention_vec.clone(),
    };
    let prediction = match options.reduced {
        Some(reduced) => {
            mention_vec = project_vector(&mention_vec, reduced)?;
            let candidates = inst
                .candidate_vecs
                .iter()
                .map(|c| project_vector(c, reduced))
                .collect::<Result<Vec<_>>>()?;
            ned_predict(&mention_vec, &candidates)?
        }
        None => ned_predict(&mention_vec, &inst.candidate_vecs)?,
    };
    Ok(prediction.index)
}

fn score_all<'i>(
    items: impl Iterator<Item = std::result::Result<&'i NedInstance, String>>,
    options: &NedOptions<'_>,
) -> NedReport {
    let mut report = NedReport::default();
    for (i, item) in items.enumerate() {
        report.total += 1;
        let outcome = item.and_then(|inst| {
            score_instance(inst, options)
                .map(|p| (p, inst.gold_index))
                .map_err(|e| e.to_string())
        });
        match outcome {
            Ok((p, gold)) => {
                if p == gold {
                    report.correct += 1;
                }
                report.predictions.push(Some(p));
            }
            Err(msg) => {
                report.errors += 1;
                report.predictions.push(None);
                report.diagnostics.push(format!("example {i}: {msg}"));
            }
        }
    }
    report.accuracy = report.correct as f64 / report.total as f64;
    report
}

/// Scores vector-level NED instances. `options.prepend_title` is ignored here.
pub fn ned_evaluate_instances(instances: &[NedInstance], options: &NedOptions<'_>) -> Result<NedReport> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("no NED examples".into()));
    }
    Ok(score_all(instances.iter().map(Ok), options))
}

/// Embeds mentions with `context_model` and candidate descriptions with
/// `description_model`. Examples that fail to embed are returned as errors.
pub fn embed_ned_examples(
    context_model: &dyn Embedder,
    description_model: &dyn Embedder,
    examples: &[NedExample],
    prepend_title: bool,
) -> Vec<Result<NedInstance>> {
    examples
        .iter()
        .map(|ex| {
            let prepared;
            let ex = if prepend_title && !ex.context_prepended {
                prepared = prepend_title_context(ex);
                &prepared
            } else {
                ex
            };
            let mention_vec = context_model.embed(&ex.mention, &ex.context)?;
            let candidate_vecs = ex
                .candidates
                .iter()
                .map(|c| description_model.embed(&c.description_mention, &c.description))
                .collect::<Result<Vec<_>>>()?;
            Ok(NedInstance {
                mention: ex.mention.clone(),
                context: ex.context.clone(),
                mention_vec,
                candidate_vecs,
                gold_index: ex.gold_index,
            })
        })
        .collect()
}

/// Full pipeline: embed, optionally edit with rules and project, rank by cosine.
pub fn ned_evaluate(
    context_model: &dyn Embedder,
    description_model: &dyn Embedder,
    examples: &[NedExample],
    options: &NedOptions<'_>,
) -> Result<NedReport> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no NED examples".into()));
    }
    let embedded = embed_ned_examples(context_model, description_model, examples, options.prepend_title);
    Ok(score_embedded(&embedded, options))
}

/// Scores the output of [`embed_ned_examples`]; embedding failures count as incorrect.
pub fn score_embedded(embedded: &[Result<NedInstance>], options: &NedOptions<'_>) -> NedReport {
    score_all(embedded.iter().map(|r| r.as_ref().map_err(|e| e.to_string())), options)
}
