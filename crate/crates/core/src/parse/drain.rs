//! Fixed-depth prefix-tree template miner in the style of Drain.
//!
//! Lines are routed by token count, then by their first `depth - 3` tokens
//! (tokens containing digits route through the wildcard child). Each leaf
//! keeps a list of clusters; a line joins the most similar cluster if the
//! share of positions equal to the cluster's literal tokens reaches the
//! similarity threshold, otherwise it founds a new cluster.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{Slot, Template, TokenSequence, WILDCARD};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrainConfig {
    pub similarity_threshold: f64,
    /// Tree depth counting the root, the length layer and the leaf layer.
    pub depth: usize,
    pub max_children: usize,
}

impl Default for DrainConfig {
    fn default() -> Self {
        Self { similarity_threshold: 0.5, depth: 4, max_children: 100 }
    }
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: BTreeMap<String, Node>,
    clusters: Vec<usize>,
}

/// Incremental miner. Cluster ids are dense in first-seen order.
#[derive(Debug, Clone)]
pub struct TemplateMiner {
    cfg: DrainConfig,
    by_length: BTreeMap<usize, Node>,
    clusters: Vec<Vec<Option<String>>>,
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

impl TemplateMiner {
    pub fn new(cfg: DrainConfig) -> Self {
        Self { cfg, by_length: BTreeMap::new(), clusters: Vec::new() }
    }

    /// Number of leading tokens used as tree keys; the last token of a line never is.
    fn prefix_tokens(&self, len: usize) -> usize {
        self.cfg.depth.saturating_sub(3).min(len.saturating_sub(1))
    }

    /// Assigns `tokens` to a cluster, creating or generalizing as needed.
    pub fn add(&mut self, tokens: &[String]) -> usize {
        match self.search(tokens) {
            Some(id) => {
                let tpl = &mut self.clusters[id];
                for (slot, tok) in tpl.iter_mut().zip(tokens) {
                    if slot.as_deref().is_some_and(|s| s != tok) {
                        *slot = None;
                    }
                }
                id
            }
            None => {
                let id = self.clusters.len();
                self.clusters.push(tokens.iter().cloned().map(Some).collect());
                self.insert(tokens, id);
                id
            }
        }
    }

    fn search(&self, tokens: &[String]) -> Option<usize> {
        let mut node = self.by_length.get(&tokens.len())?;
        for tok in &tokens[..self.prefix_tokens(tokens.len())] {
            node = node.children.get(tok.as_str()).or_else(|| node.children.get(WILDCARD))?;
        }
        self.fast_match(&node.clusters, tokens)
    }

    fn fast_match(&self, candidates: &[usize], tokens: &[String]) -> Option<usize> {
        let mut best: Option<(f64, usize, usize)> = None;
        for &id in candidates {
            let tpl = &self.clusters[id];
            let mut equal = 0usize;
            let mut params = 0usize;
            for (slot, tok) in tpl.iter().zip(tokens) {
                match slot {
                    None => params += 1,
                    Some(s) if s == tok => equal += 1,
                    Some(_) => {}
                }
            }
            let sim = if tokens.is_empty() { 1.0 } else { equal as f64 / tokens.len() as f64 };
            let better = match best {
                None => true,
                Some((bs, bp, _)) => sim > bs || (sim == bs && params > bp),
            };
            if better {
                best = Some((sim, params, id));
            }
        }
        best.filter(|&(sim, _, _)| sim >= self.cfg.similarity_threshold).map(|(_, _, id)| id)
    }

    fn insert(&mut self, tokens: &[String], id: usize) {
        let prefix = self.prefix_tokens(tokens.len());
        let max_children = self.cfg.max_children.max(1);
        let mut node = self.by_length.entry(tokens.len()).or_default();
        for tok in &tokens[..prefix] {
            let key = if node.children.contains_key(tok.as_str()) {
                tok.clone()
            } else if has_digit(tok) {
                WILDCARD.to_string()
            } else if node.children.contains_key(WILDCARD) {
                if node.children.len() < max_children {
                    tok.clone()
                } else {
                    WILDCARD.to_string()
                }
            } else if node.children.len() + 1 < max_children {
                tok.clone()
            } else {
                WILDCARD.to_string()
            };
            node = node.children.entry(key).or_default();
        }
        node.clusters.push(id);
    }

    /// Current skeleton of every cluster.
    pub fn templates(&self) -> Vec<Template> {
        self.clusters
            .iter()
            .enumerate()
            .map(|(id, tpl)| Template {
                id: id as u32,
                skeleton: tpl
                    .iter()
                    .map(|s| match s {
                        Some(l) => Slot::Literal(l.clone()),
                        None => Slot::Wildcard,
                    })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedTemplates {
    pub templates: Vec<Template>,
    /// Template id per input line.
    pub assignments: Vec<u32>,
}

/// Mines templates over the corpus in order. Clusters that end up with the
/// same skeleton are merged, keeping the earliest id; ids stay dense in
/// first-seen order.
pub fn mine_templates(corpus: &[TokenSequence], cfg: &DrainConfig) -> Result<MinedTemplates> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut miner = TemplateMiner::new(cfg.clone());
    let raw: Vec<usize> = corpus.iter().map(|s| miner.add(&s.tokens)).collect();
    let raw_templates = miner.templates();

    let mut canonical: BTreeMap<&[Slot], u32> = BTreeMap::new();
    let mut remap = Vec::with_capacity(raw_templates.len());
    let mut templates = Vec::new();
    for t in &raw_templates {
        let next = templates.len() as u32;
        let id = *canonical.entry(t.skeleton.as_slice()).or_insert(next);
        if id == next {
            templates.push(Template { id, skeleton: t.skeleton.clone() });
        }
        remap.push(id);
    }
    let assignments = raw.into_iter().map(|c| remap[c]).collect();
    Ok(MinedTemplates { templates, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{extract_attributes, tokenize};
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn seqs(lines: &[&str]) -> Vec<TokenSequence> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| TokenSequence { tokens: tokenize(l), origin: i as u64 })
            .collect()
    }

    #[test]
    fn start_service_example() {
        let corpus = seqs(&["Start mail service at node wally001", "Start printer service at node wally005"]);
        let mined = mine_templates(&corpus, &DrainConfig::default()).unwrap();
        assert_eq!(mined.templates.len(), 1);
        assert_eq!(mined.templates[0].to_string(), "Start <*> service at node <*>");
        assert_eq!(mined.assignments, vec![0, 0]);
        let a = extract_attributes(&corpus[0], &mined.templates[0]).unwrap();
        let b = extract_attributes(&corpus[1], &mined.templates[0]).unwrap();
        assert_eq!(a.values, vec!["mail", "wally001"]);
        assert_eq!(b.values, vec!["printer", "wally005"]);
    }

    #[test]
    fn single_line_is_all_literal() {
        let mined = mine_templates(&seqs(&["disk check ok"]), &DrainConfig::default()).unwrap();
        assert_eq!(mined.templates[0].to_string(), "disk check ok");
        assert_eq!(mined.templates[0].wildcard_count(), 0);
    }

    #[test]
    fn identical_lines_share_one_template() {
        let mined = mine_templates(&seqs(&["a b c"; 5]), &DrainConfig::default()).unwrap();
        assert_eq!(mined.templates.len(), 1);
        assert!(mined.assignments.iter().all(|&i| i == 0));
    }

    #[test]
    fn dissimilar_lines_split() {
        let mined = mine_templates(
            &seqs(&["open file a now", "open socket b later", "close x", ""]),
            &DrainConfig::default(),
        )
        .unwrap();
        assert_eq!(mined.assignments, vec![0, 1, 2, 3]);
        assert_eq!(mined.templates[3].skeleton.len(), 0);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert_eq!(mine_templates(&[], &DrainConfig::default()), Err(Error::EmptyCorpus));
    }

    proptest! {
        #[test]
        fn every_line_matches_its_template(lines in proptest::collection::vec(
            proptest::collection::vec(prop_oneof!["[a-c]", "[0-9]{1,3}", Just("node".to_string())], 0..6), 1..60)) {
            let corpus: Vec<TokenSequence> = lines.into_iter().enumerate()
                .map(|(i, tokens)| TokenSequence { tokens, origin: i as u64 }).collect();
            let mined = mine_templates(&corpus, &DrainConfig::default()).unwrap();
            prop_assert_eq!(mined.assignments.len(), corpus.len());
            for (seq, &id) in corpus.iter().zip(&mined.assignments) {
                let t = &mined.templates[id as usize];
                prop_assert_eq!(t.id, id);
                let attrs = extract_attributes(seq, t).unwrap();
                prop_assert_eq!(attrs.values.len(), t.wildcard_count());
                prop_assert_eq!(t.fill(&attrs.values), seq.tokens.clone());
            }
            let mut skeletons: Vec<_> = mined.templates.iter().map(|t| t.skeleton.clone()).collect();
            skeletons.sort();
            skeletons.dedup();
            prop_assert_eq!(skeletons.len(), mined.templates.len());
        }
    }
}
