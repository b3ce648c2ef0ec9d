use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::parse::{self, TokenSequence};

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const UNK: u32 = 2;
pub const HEX: u32 = 3;
pub const NUM: u32 = 4;

const SPECIALS: [&str; 5] = ["[PAD]", "[CLS]", "[UNK]", parse::HEX_TOKEN, parse::NUM_TOKEN];

/// Token table: the five special tokens first, then every token of the
/// building corpus in sorted order. Frozen once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds from already-normalized sequences.
    pub fn build<'a, I: IntoIterator<Item = &'a TokenSequence>>(sequences: I) -> Self {
        let seen: BTreeSet<&str> = sequences
            .into_iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .filter(|t| !SPECIALS.contains(t))
            .collect();
        let tokens: Vec<String> = SPECIALS.iter().copied().chain(seen).map(ToString::to_string).collect();
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Unknown tokens, and literal `[PAD]`/`[CLS]` text, map to `[UNK]`.
    pub fn id(&self, token: &str) -> u32 {
        match self.index.get(token) {
            Some(&id) if id != PAD && id != CLS => id,
            _ => UNK,
        }
    }
}

/// `[CLS]` followed by the first `max_len - 1` tokens, right-padded with
/// `[PAD]` to exactly `max_len` ids. `seq` is expected normalized.
pub fn build_input(seq: &TokenSequence, vocab: &Vocab, max_len: usize) -> Vec<u32> {
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS);
    ids.extend(seq.tokens.iter().take(max_len.saturating_sub(1)).map(|t| vocab.id(t)));
    ids.resize(max_len, PAD);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence { tokens: tokens.iter().map(|t| t.to_string()).collect(), origin: 0 }
    }

    #[test]
    fn specials_and_sorting() {
        let v = Vocab::build(&[seq(&["b", "a", "[NUM]"]), seq(&["a", "c"])]);
        assert_eq!(v.len(), 8);
        assert_eq!(v.token(5), Some("a"));
        assert_eq!(v.id("[NUM]"), NUM);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.id("[PAD]"), UNK);
    }

    #[test]
    fn truncation_and_padding() {
        let v = Vocab::build(&[seq(&["x"])]);
        let long: Vec<&str> = vec!["x"; 25];
        let ids = build_input(&seq(&long), &v, 20);
        assert_eq!(ids.len(), 20);
        assert_eq!(ids[0], CLS);
        assert!(ids[1..].iter().all(|&i| i == v.id("x")));

        let ids = build_input(&seq(&[]), &v, 20);
        assert_eq!(ids[0], CLS);
        assert!(ids[1..].iter().all(|&i| i == PAD));

        let exact: Vec<&str> = vec!["x"; 19];
        let ids = build_input(&seq(&exact), &v, 20);
        assert!(!ids.contains(&PAD));
        assert_eq!(build_input(&seq(&["y"]), &v, 3), vec![CLS, UNK, PAD]);
    }

    #[test]
    fn serde_roundtrip() {
        let v = Vocab::build(&[seq(&["b", "a"])]);
        let s: Vec<String> = v.clone().into();
        assert_eq!(Vocab::from(s), v);
    }
}
