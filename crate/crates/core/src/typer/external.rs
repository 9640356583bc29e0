//! Vector files: JSON Lines of `{"id", "kind", "values"}`.
//!
//! `kind` is `"type_probs"` for a finished type vector or `"hidden"` for an
//! encoder output that still has to go through a model's type matrix. This is
//! how vectors produced by an external encoder are brought in.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{HiddenVector, TypeVector, TyperModel};
use crate::corpus::TypeVocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    TypeProbs,
    Hidden,
}

/// One line of a vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub kind: VectorKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredVector {
    TypeProbs(TypeVector),
    Hidden(HiddenVector),
}

/// Vectors keyed by id, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorStore {
    vectors: IndexMap<String, StoredVector>,
}

impl VectorStore {
    pub fn get(&self, id: &str) -> Option<&StoredVector> {
        self.vectors.get(id)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StoredVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Resolves `id` to a type vector, pushing hidden vectors through `model`.
    pub fn type_vector(&self, id: &str, model: Option<&TyperModel>) -> Result<Option<TypeVector>> {
        match self.vectors.get(id) {
            None => Ok(None),
            Some(StoredVector::TypeProbs(t)) => Ok(Some(t.clone())),
            Some(StoredVector::Hidden(h)) => {
                let model = model.ok_or_else(|| {
                    Error::InvalidArgument(format!("vector {id:?} is hidden-kind and needs a model"))
                })?;
                model.type_probabilities(h).map(Some)
            }
        }
    }
}

/// Reads a vector file. `type_probs` records must have one value per type of
/// `vocab`, each in `[0, 1]`; `hidden` records must have `hidden_dim` values.
pub fn import_external_vectors(
    path: impl AsRef<Path>,
    vocab: &TypeVocabulary,
    hidden_dim: Option<usize>,
) -> Result<VectorStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_external_vectors(BufReader::new(file), vocab, hidden_dim)
}

pub fn read_external_vectors(
    reader: impl BufRead,
    vocab: &TypeVocabulary,
    hidden_dim: Option<usize>,
) -> Result<VectorStore> {
    let mut store = VectorStore::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VectorRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(line_no, format!("invalid vector record: {e}")))?;
        let at_line = |e: Error| Error::malformed(line_no, format!("vector {:?}: {e}", rec.id));
        let stored = match rec.kind {
            VectorKind::TypeProbs => {
                if rec.values.len() != vocab.len() {
                    return Err(at_line(Error::DimensionMismatch {
                        expected: vocab.len(),
                        found: rec.values.len(),
                    }));
                }
                StoredVector::TypeProbs(TypeVector::new(rec.values.clone(), vocab.id()).map_err(at_line)?)
            }
            VectorKind::Hidden => {
                let d = hidden_dim.ok_or_else(|| {
                    at_line(Error::InvalidArgument("hidden vectors need a declared dimension".into()))
                })?;
                if rec.values.len() != d {
                    return Err(at_line(Error::DimensionMismatch {
                        expected: d,
                        found: rec.values.len(),
                    }));
                }
                if rec.values.iter().any(|x| !x.is_finite()) {
                    return Err(at_line(Error::InvalidArgument("non-finite hidden value".into())));
                }
                StoredVector::Hidden(HiddenVector(rec.values.clone()))
            }
        };
        if store.vectors.insert(rec.id.clone(), stored).is_some() {
            return Err(Error::malformed(line_no, format!("duplicate id {:?}", rec.id)));
        }
    }
    Ok(store)
}

/// Writes `(id, vector)` pairs as `type_probs` records.
pub fn write_type_vectors<'a>(
    mut writer: impl Write,
    vectors: impl IntoIterator<Item = (&'a str, &'a TypeVector)>,
) -> Result<()> {
    for (id, t) in vectors {
        let rec = VectorRecord {
            id: id.to_owned(),
            kind: VectorKind::TypeProbs,
            values: t.values().to_vec(),
        };
        let line = serde_json::to_string(&rec).expect("vector record serializes");
        writeln!(writer, "{line}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}
