//! Deterministic word tokenizer shared by ingestion, featurization and rule matching.
//!
//! Text is lowercased, split on whitespace, and every punctuation character
//! becomes a token of its own, so `"Washington, D.C."` yields
//! `["washington", ",", "d", ".", "c", "."]`.

/// Splits `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
            continue;
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        if !ch.is_whitespace() && !ch.is_control() {
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// 64-bit FNV-1a. Stable across platforms and toolchains, which `DefaultHasher` is not.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
