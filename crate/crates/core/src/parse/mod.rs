//! Tokenization, placeholder normalization, template mining, attribute
//! extraction and per-line context keys.

mod drain;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::ingest::LogMessage;
use crate::{Error, Result};

pub use drain::{mine_templates, DrainConfig, MinedTemplates, TemplateMiner};

pub const HEX_TOKEN: &str = "[HEX]";
pub const NUM_TOKEN: &str = "[NUM]";
/// Rendering of a wildcard slot in exported skeletons.
pub const WILDCARD: &str = "<*>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub origin: u64,
}

fn is_separator(c: char) -> bool {
    matches!(c, '.' | ',' | ':' | '/') || c.is_whitespace()
}

/// Splits on `.`, `,`, `:`, `/` and whitespace, dropping empty fragments.
pub fn tokenize(content: &str) -> Vec<String> {
    content.split(is_separator).filter(|s| !s.is_empty()).map(ToString::to_string).collect()
}

pub fn tokenize_message(msg: &LogMessage) -> TokenSequence {
    TokenSequence { tokens: tokenize(&msg.content), origin: msg.index }
}

/// `0x`-prefixed, or at least four hex digits including at least one letter.
pub fn is_hex(token: &str) -> bool {
    if token.starts_with("0x") || token.starts_with("0X") {
        return true;
    }
    token.len() >= 4
        && token.bytes().all(|b| b.is_ascii_hexdigit())
        && token.bytes().any(|b| b.is_ascii_alphabetic())
}

/// Pure decimal integer with value at least 10.
pub fn is_large_number(token: &str) -> bool {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    token.trim_start_matches('0').len() >= 2
}

pub fn normalize_token(token: &str) -> &str {
    if is_hex(token) {
        HEX_TOKEN
    } else if is_large_number(token) {
        NUM_TOKEN
    } else {
        token
    }
}

/// Replaces hexadecimal literals with `[HEX]` and integers `>= 10` with `[NUM]`.
pub fn normalize(seq: &TokenSequence) -> TokenSequence {
    TokenSequence {
        tokens: seq.tokens.iter().map(|t| normalize_token(t).to_string()).collect(),
        origin: seq.origin,
    }
}

/// One skeleton position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    Literal(String),
    Wildcard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: u32,
    pub skeleton: Vec<Slot>,
}

impl Template {
    pub fn matches(&self, tokens: &[String]) -> bool {
        self.skeleton.len() == tokens.len()
            && self.skeleton.iter().zip(tokens).all(|(s, t)| match s {
                Slot::Literal(l) => l == t,
                Slot::Wildcard => true,
            })
    }

    pub fn wildcard_count(&self) -> usize {
        self.skeleton.iter().filter(|s| **s == Slot::Wildcard).count()
    }

    /// Fills the wildcards with `values`, in order.
    pub fn fill(&self, values: &[String]) -> Vec<String> {
        let mut it = values.iter();
        self.skeleton
            .iter()
            .map(|s| match s {
                Slot::Literal(l) => l.clone(),
                Slot::Wildcard => it.next().cloned().unwrap_or_default(),
            })
            .collect()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.skeleton.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match s {
                Slot::Literal(l) => f.write_str(l)?,
                Slot::Wildcard => f.write_str(WILDCARD)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub origin: u64,
    pub values: Vec<String>,
}

/// Tokens at the template's wildcard positions.
pub fn extract_attributes(seq: &TokenSequence, template: &Template) -> Result<AttributeSet> {
    if !template.matches(&seq.tokens) {
        return Err(Error::TemplateMismatch(template.id));
    }
    let values = template
        .skeleton
        .iter()
        .zip(&seq.tokens)
        .filter(|(s, _)| **s == Slot::Wildcard)
        .map(|(_, t)| t.clone())
        .collect();
    Ok(AttributeSet { origin: seq.origin, values })
}

/// Set of template ids of the `a` preceding and `b` following lines.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextKey {
    pub origin: u64,
    /// Sorted, without duplicates.
    pub neighbor_ids: Vec<u32>,
}

/// Context keys for every position of `ids`. Out-of-range neighbors are
/// simply absent.
pub fn build_context(ids: &[u32], a: usize, b: usize) -> Result<Vec<ContextKey>> {
    if a + b == 0 {
        return Err(Error::EmptyContextWindow);
    }
    let n = ids.len();
    let mut out = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(a + b);
    for i in 0..n {
        buf.clear();
        buf.extend_from_slice(&ids[i.saturating_sub(a)..i]);
        buf.extend_from_slice(&ids[(i + 1).min(n)..(i + 1 + b).min(n)]);
        buf.sort_unstable();
        buf.dedup();
        out.push(ContextKey { origin: i as u64, neighbor_ids: buf.clone() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseConfig {
    pub drain: DrainConfig,
    /// Apply `[HEX]`/`[NUM]` placeholders before mining.
    pub normalize: bool,
}


/// Every line of a corpus tokenized, assigned a template and split into attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCorpus {
    pub sequences: Vec<TokenSequence>,
    pub templates: Vec<Template>,
    /// Template id per line.
    pub assignments: Vec<u32>,
    pub attributes: Vec<AttributeSet>,
}

pub fn parse_corpus(messages: &[LogMessage], cfg: &ParseConfig) -> Result<ParsedCorpus> {
    if messages.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sequences: Vec<TokenSequence> = messages
        .iter()
        .map(|m| {
            let seq = tokenize_message(m);
            if cfg.normalize {
                normalize(&seq)
            } else {
                seq
            }
        })
        .collect();
    let mined = mine_templates(&sequences, &cfg.drain)?;
    let attributes = sequences
        .iter()
        .zip(&mined.assignments)
        .map(|(seq, &id)| extract_attributes(seq, &mined.templates[id as usize]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedCorpus { sequences, templates: mined.templates, assignments: mined.assignments, attributes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Start mail service at node wally001"),
            toks(&["Start", "mail", "service", "at", "node", "wally001"])
        );
        assert_eq!(tokenize("proc/1234: fail"), toks(&["proc", "1234", "fail"]));
        assert_eq!(tokenize("a.b,c:d/e"), toks(&["a", "b", "c", "d", "e"]));
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ::/ ").is_empty());
    }

    #[test]
    fn normalize_examples() {
        let n = |t: &str| normalize_token(t).to_string();
        assert_eq!(n("deadbeef"), HEX_TOKEN);
        assert_eq!(n("0x1f"), HEX_TOKEN);
        assert_eq!(n("5"), "5");
        assert_eq!(n("10"), NUM_TOKEN);
        assert_eq!(n("09"), "09");
        assert_eq!(n("wally001"), "wally001");
        assert_eq!(n("bad"), "bad");
        assert_eq!(n("1234"), NUM_TOKEN);
        assert_eq!(n("99999999999999999999999999999"), NUM_TOKEN);
    }

    #[test]
    fn attributes_and_mismatch() {
        let t = Template {
            id: 3,
            skeleton: vec![
                Slot::Literal("Start".into()),
                Slot::Wildcard,
                Slot::Literal("service".into()),
            ],
        };
        let seq = TokenSequence { tokens: toks(&["Start", "mail", "service"]), origin: 0 };
        assert_eq!(extract_attributes(&seq, &t).unwrap().values, toks(&["mail"]));
        let bad = TokenSequence { tokens: toks(&["Stop", "mail", "service"]), origin: 0 };
        assert_eq!(extract_attributes(&bad, &t), Err(Error::TemplateMismatch(3)));
        let literal = Template { id: 0, skeleton: vec![Slot::Literal("x".into())] };
        let seq = TokenSequence { tokens: toks(&["x"]), origin: 0 };
        assert!(extract_attributes(&seq, &literal).unwrap().values.is_empty());
    }

    #[test]
    fn context_examples() {
        let ids: Vec<u32> = (0..20).collect();
        let ctx = build_context(&ids, 2, 1).unwrap();
        assert_eq!(ctx[10].neighbor_ids, vec![8, 9, 11]);
        let ctx = build_context(&ids, 10, 0).unwrap();
        assert!(ctx[0].neighbor_ids.is_empty());
        let ids = [1, 2, 3, 4, 7, 7, 7, 9];
        let ctx = build_context(&ids, 1, 1).unwrap();
        assert_eq!(ctx[5].neighbor_ids, vec![7]);
        assert_eq!(build_context(&ids, 0, 0), Err(Error::EmptyContextWindow));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(tokens in proptest::collection::vec("[0-9a-fA-Fxg]{0,8}", 0..12)) {
            let seq = TokenSequence { tokens, origin: 0 };
            let once = normalize(&seq);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn context_reversal_symmetry(ids in proptest::collection::vec(0u32..6, 1..40), a in 0usize..5, b in 0usize..5) {
            prop_assume!(a + b > 0);
            let forward = build_context(&ids, a, b).unwrap();
            let rev: Vec<u32> = ids.iter().rev().copied().collect();
            let backward = build_context(&rev, b, a).unwrap();
            let n = ids.len();
            for i in 0..n {
                prop_assert_eq!(&forward[i].neighbor_ids, &backward[n - 1 - i].neighbor_ids);
            }
        }
    }
}
