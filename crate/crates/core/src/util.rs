//! Hashing, seed derivation and small text helpers.

use sha2::{Digest, Sha256};

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable 64-bit seed from a sequence of labelled parts.
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Deterministic uniform value in `[0, 1)` from a seed and a label.
pub fn unit_hash(seed: u64, label: &str) -> f64 {
    let v = derive_seed(&[&seed.to_le_bytes(), label.as_bytes()]);
    (v >> 11) as f64 / (1u64 << 53) as f64
}

/// Whitespace-delimited word count; hyphenated words count once.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Truncates to at most `max` words. Returns the text and whether it was cut.
pub fn truncate_words(text: &str, max: usize) -> (String, bool) {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max {
        (text.trim().to_string(), false)
    } else {
        (words[..max].join(" "), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_treats_hyphenated_as_one() {
        assert_eq!(word_count("a well-known  fact\nhere"), 4);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn seeds_are_stable_and_separated() {
        let a = derive_seed(&[b"ab", b"c"]);
        let b = derive_seed(&[b"a", b"bc"]);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(&[b"ab", b"c"]));
        let u = unit_hash(7, "x");
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_words("a b c", 2), ("a b".to_string(), true));
        assert_eq!(truncate_words(" a b ", 2), ("a b".to_string(), false));
    }
}
