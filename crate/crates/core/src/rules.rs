//! Post-hoc debugging rules over type vectors.
//!
//! A rule fires when every `context_contains` phrase occurs in the context as a
//! contiguous token run and, if given, the mention equals `mention_equals`
//! (both compared after the shared tokenizer, so case-insensitively). When it
//! fires, the `set_one` types are overwritten with 1 and the `set_zero` types
//! with 0. Rules are applied in file order, so a later rule wins where two touch
//! the same type.
//!
//! Rule files are JSON Lines:
//!
//! ```text
//! {"context_contains": ["fed cup"], "mention_equals": null, "set_one": ["women's", "tennis"], "set_zero": ["davis cup"]}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{TypeVocabulary, VocabId};
use crate::error::{Error, Result};
use crate::tokenize::tokenize;
use crate::typer::TypeVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    /// Tokenized phrases that must all occur in the context.
    pub context_contains: Vec<Vec<String>>,
    /// Tokenized mention the rule is restricted to.
    pub mention_equals: Option<Vec<String>>,
    pub set_one: Vec<String>,
    pub set_zero: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRule {
    #[serde(default)]
    context_contains: Vec<String>,
    #[serde(default)]
    mention_equals: Option<String>,
    #[serde(default)]
    set_one: Vec<String>,
    #[serde(default)]
    set_zero: Vec<String>,
}

fn dedup(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

impl Rule {
    fn from_raw(raw: RawRule, line: usize) -> Result<Self> {
        let bad = |message: String| Error::InvalidRule { line, message };
        let mut context_contains = Vec::with_capacity(raw.context_contains.len());
        for phrase in &raw.context_contains {
            let tokens = tokenize(phrase);
            if tokens.is_empty() {
                return Err(bad(format!("empty context phrase {phrase:?}")));
            }
            context_contains.push(tokens);
        }
        let mention_equals = match raw.mention_equals {
            Some(m) => {
                let tokens = tokenize(&m);
                if tokens.is_empty() {
                    return Err(bad(format!("empty mention condition {m:?}")));
                }
                Some(tokens)
            }
            None => None,
        };
        if context_contains.is_empty() && mention_equals.is_none() {
            return Err(bad("rule has no condition".into()));
        }
        let set_one = dedup(raw.set_one);
        let set_zero = dedup(raw.set_zero);
        if set_one.is_empty() && set_zero.is_empty() {
            return Err(bad("rule has no action".into()));
        }
        let ones: HashSet<&String> = set_one.iter().collect();
        if let Some(both) = set_zero.iter().find(|t| ones.contains(t)) {
            return Err(bad(format!("type {both:?} is both set to 1 and set to 0")));
        }
        Ok(Self {
            context_contains,
            mention_equals,
            set_one,
            set_zero,
        })
    }

    /// Whether the rule's conditions hold for a tokenized mention and context.
    pub fn matches(&self, mention: &[String], context: &[String]) -> bool {
        rule_matches(self, mention, context)
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// True iff every context phrase occurs contiguously in `context` and the mention
/// condition, if any, equals `mention`. Inputs are expected to come from the
/// shared tokenizer (already lowercased).
pub fn rule_matches(rule: &Rule, mention: &[String], context: &[String]) -> bool {
    rule.mention_equals.as_deref().is_none_or(|m| m == mention)
        && rule.context_contains.iter().all(|phrase| contains_run(context, phrase))
}

/// Rules in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Binds type names to positions in `vocab`. Names the vocabulary does not
    /// know are skipped and reported as warnings.
    pub fn resolve(&self, vocab: &TypeVocabulary) -> ResolvedRuleSet {
        let mut warnings = Vec::new();
        let mut lookup = |rule_no: usize, names: &[String]| -> Vec<usize> {
            names
                .iter()
                .filter_map(|name| {
                    let pos = vocab.position(name);
                    if pos.is_none() {
                        warnings.push(format!("rule {rule_no}: unknown type {name:?} skipped"));
                    }
                    pos
                })
                .collect()
        };
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, rule)| ResolvedRule {
                ones: lookup(i + 1, &rule.set_one),
                zeros: lookup(i + 1, &rule.set_zero),
                rule: rule.clone(),
            })
            .collect();
        for w in &warnings {
            warn!("{w}");
        }
        ResolvedRuleSet {
            rules,
            vocab: vocab.id(),
            vocab_len: vocab.len(),
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRule {
    pub rule: Rule,
    pub ones: Vec<usize>,
    pub zeros: Vec<usize>,
}

/// A rule set bound to one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRuleSet {
    pub rules: Vec<ResolvedRule>,
    vocab: VocabId,
    vocab_len: usize,
    pub warnings: Vec<String>,
}

impl ResolvedRuleSet {
    pub fn vocab_id(&self) -> VocabId {
        self.vocab
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Indices of the rules that fire on this mention and context.
    pub fn matching(&self, mention: &[String], context: &[String]) -> Vec<usize> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rule.matches(mention, context))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Parses a rule file.
pub fn parse_rules(path: impl AsRef<Path>) -> Result<RuleSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rules(BufReader::new(file))
}

pub fn read_rules(reader: impl BufRead) -> Result<RuleSet> {
    let mut rules = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRule = serde_json::from_str(&line).map_err(|e| Error::InvalidRule {
            line: line_no,
            message: format!("invalid JSON: {e}"),
        })?;
        rules.push(Rule::from_raw(raw, line_no)?);
    }
    Ok(RuleSet { rules })
}

/// Returns a copy of `t` with every matching rule's edits applied in order.
pub fn apply_rules(t: &TypeVector, rules: &ResolvedRuleSet, mention: &[String], context: &[String]) -> Result<TypeVector> {
    if t.vocab_id() != rules.vocab || t.len() != rules.vocab_len {
        return Err(Error::VocabularyMismatch);
    }
    let mut out = t.clone();
    for r in &rules.rules {
        if !r.rule.matches(mention, context) {
            continue;
        }
        for &j in &r.ones {
            out.set(j, 1.0);
        }
        for &j in &r.zeros {
            out.set(j, 0.0);
        }
    }
    Ok(out)
}
