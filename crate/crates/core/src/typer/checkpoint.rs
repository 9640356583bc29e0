//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "TYPEVEC\0"
//! version    u32
//! n_types    u64, then per type: name_len u32, UTF-8 name, count u64
//! dim        u64
//! buckets    u64
//! seed       u64
//! embeddings buckets·dim f64
//! projection dim·2·dim f64
//! bias       dim f64
//! types      n_types·dim f64
//! checksum   32 bytes, SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ModelConfig, TyperModel};
use crate::corpus::TypeVocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TYPEVEC\0";
const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

/// Serializes `model` to bytes.
pub fn write_checkpoint(model: &TyperModel) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(
        64 + 8 * (model.embeddings().len() + model.projection().len() + model.type_matrix().len()),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let vocab = model.vocab();
    out.extend_from_slice(&(vocab.len() as u64).to_le_bytes());
    for (name, count) in vocab.types().iter().zip(vocab.counts()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&count.to_le_bytes());
    }
    for v in [cfg.dim as u64, cfg.buckets as u64, cfg.seed] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for block in [model.embeddings(), model.projection(), model.bias(), model.type_matrix()] {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn save_checkpoint(model: &TyperModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CheckpointCorrupt("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CheckpointCorrupt("size overflow".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::CheckpointCorrupt("size overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Parses a checkpoint produced by [`write_checkpoint`].
pub fn read_checkpoint(bytes: &[u8]) -> Result<TyperModel> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::CheckpointCorrupt("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            expected: VERSION,
            found: version,
        });
    }
    if bytes.len() < 12 + CHECKSUM_LEN {
        return Err(Error::CheckpointCorrupt("checksum mismatch".into()));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::CheckpointCorrupt("checksum mismatch".into()));
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let n_types = r.usize()?;
    let mut entries = Vec::with_capacity(n_types.min(1 << 20));
    for _ in 0..n_types {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::CheckpointCorrupt("type name is not UTF-8".into()))?
            .to_owned();
        entries.push((name, r.u64()?));
    }
    let vocab = TypeVocabulary::from_entries(entries)?;
    let config = ModelConfig {
        dim: r.usize()?,
        buckets: r.usize()?,
        seed: r.u64()?,
    };
    let d = config.dim;
    let embeddings = r.f64s(config.buckets.saturating_mul(d))?;
    let projection = r.f64s(d.saturating_mul(2 * d))?;
    let bias = r.f64s(d)?;
    let type_matrix = r.f64s(vocab.len().saturating_mul(d))?;
    if r.pos != body.len() {
        return Err(Error::CheckpointCorrupt("trailing bytes".into()));
    }
    let model = TyperModel::from_parts(vocab, config, embeddings, projection, bias, type_matrix);
    if !model.is_finite() {
        return Err(Error::CheckpointCorrupt("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TyperModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

/// Loads a checkpoint and checks that it indexes exactly `vocab`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, vocab: &TypeVocabulary) -> Result<TyperModel> {
    let model = load_checkpoint(path)?;
    if model.vocab().len() != vocab.len() {
        return Err(Error::Incompatible(format!(
            "checkpoint has {} types, expected {}",
            model.vocab().len(),
            vocab.len()
        )));
    }
    if model.vocab().id() != vocab.id() {
        return Err(Error::Incompatible(
            "checkpoint was trained on a different type vocabulary".into(),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::tokenize;

    fn model(n_types: usize) -> TyperModel {
        let vocab =
            TypeVocabulary::from_entries((0..n_types).map(|i| (format!("type {i}"), 10 - i as u64)).collect())
                .unwrap();
        TyperModel::new(vocab, ModelConfig { dim: 4, buckets: 32, seed: 2 }).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = model(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, m);
        let (mention, ctx) = (tokenize("Spain"), tokenize("Fed Cup"));
        let a = m.embed_mention(&mention, &ctx).unwrap();
        let b = loaded.embed_mention(&mention, &ctx).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let bytes = write_checkpoint(&model(3));
        let err = read_checkpoint(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(matches!(err, Error::CheckpointCorrupt(ref m) if m.contains("checksum")), "{err}");
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let mut bytes = write_checkpoint(&model(3));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(read_checkpoint(&bytes), Err(Error::CheckpointCorrupt(_))));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = write_checkpoint(&model(3));
        bytes[8] = 9;
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(Error::CheckpointVersion { expected: 1, found: 9 })
        ));
    }

    #[test]
    fn not_a_checkpoint() {
        assert!(matches!(read_checkpoint(b"hello"), Err(Error::CheckpointCorrupt(_))));
    }

    #[test]
    fn vocabulary_size_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model(3), &path).unwrap();
        let other = model(5);
        let err = load_checkpoint_for(&path, other.vocab()).unwrap_err();
        assert!(matches!(err, Error::Incompatible(ref m) if m.contains("3 types")));
        assert!(load_checkpoint_for(&path, model(3).vocab()).is_ok());
    }
}
