//! Template (α), attribute (β) and context (γ) anomaly scores, and the
//! threshold classification of abnormal lines into the three types.
//!
//! Every score is `|x(𝒜)| / (|x(𝒜)| + |x(𝒩)|)` for the group `x` the line
//! belongs to: its template, its most abnormal attribute value, or the set
//! of templates around it. Counting is a single pass into immutable tables;
//! scoring is then a lookup.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::{AnomalyKind, Truth};
use crate::parse::{AttributeSet, ContextKey};
use crate::{Error, Result};

/// Partition of a corpus into normal (𝒩) and abnormal (𝒜) lines, by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSplit {
    abnormal: Vec<bool>,
}

impl LabeledSplit {
    pub fn from_flags(abnormal: Vec<bool>) -> Self {
        Self { abnormal }
    }

    pub fn from_truths(truths: &[Truth]) -> Self {
        Self { abnormal: truths.iter().map(|t| t.is_abnormal()).collect() }
    }

    pub fn len(&self) -> usize {
        self.abnormal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abnormal.is_empty()
    }

    pub fn is_abnormal(&self, pos: usize) -> bool {
        self.abnormal[pos]
    }

    pub fn abnormal_count(&self) -> usize {
        self.abnormal.iter().filter(|&&a| a).count()
    }

    pub fn abnormal_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.abnormal.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i)
    }
}

/// Occurrence counts of one group in 𝒜 and 𝒩.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub abnormal: u64,
    pub normal: u64,
}

impl Counts {
    fn add(&mut self, abnormal: bool) {
        if abnormal {
            self.abnormal += 1;
        } else {
            self.normal += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.abnormal + self.normal
    }

    /// `abnormal / total`, or `None` for an empty group.
    pub fn ratio(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.abnormal as f64 / self.total() as f64)
    }
}

/// How attribute values are grouped when counting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeScope {
    /// A value is one group wherever it appears.
    #[default]
    Global,
    /// A value is grouped per (template, wildcard position).
    Slot,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum AttrKey {
    Global(String),
    Slot(u32, usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScores {
    pub origin: u64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AnomalyScores {
    pub fn get(&self, kind: AnomalyKind) -> f64 {
        match kind {
            AnomalyKind::Template => self.alpha,
            AnomalyKind::Attribute => self.beta,
            AnomalyKind::Contextual => self.gamma,
        }
    }
}

/// Count tables over a whole corpus.
#[derive(Debug, Clone)]
pub struct TaxonomyCounts {
    scope: AttributeScope,
    templates: Vec<Counts>,
    attributes: BTreeMap<AttrKey, Counts>,
    contexts: BTreeMap<Vec<u32>, Counts>,
}

impl TaxonomyCounts {
    /// `assignments`, `attributes` and `contexts` are per line, aligned with `split`.
    pub fn build(
        assignments: &[u32],
        attributes: &[AttributeSet],
        contexts: &[ContextKey],
        split: &LabeledSplit,
        scope: AttributeScope,
    ) -> Result<Self> {
        let n = split.len();
        for len in [assignments.len(), attributes.len(), contexts.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: len, right: n });
            }
        }
        let n_templates = assignments.iter().map(|&t| t as usize + 1).max().unwrap_or(0);
        let mut templates = alloc::vec![Counts::default(); n_templates];
        let mut attr_counts: BTreeMap<AttrKey, Counts> = BTreeMap::new();
        let mut ctx_counts: BTreeMap<Vec<u32>, Counts> = BTreeMap::new();
        let mut seen: BTreeSet<AttrKey> = BTreeSet::new();
        for pos in 0..n {
            let abnormal = split.is_abnormal(pos);
            templates[assignments[pos] as usize].add(abnormal);
            // each line counts once per distinct group it contains
            seen.clear();
            for key in attr_keys(scope, assignments[pos], &attributes[pos]) {
                if seen.insert(key.clone()) {
                    attr_counts.entry(key).or_default().add(abnormal);
                }
            }
            match ctx_counts.get_mut(contexts[pos].neighbor_ids.as_slice()) {
                Some(c) => c.add(abnormal),
                None => {
                    let mut c = Counts::default();
                    c.add(abnormal);
                    ctx_counts.insert(contexts[pos].neighbor_ids.clone(), c);
                }
            }
        }
        Ok(Self { scope, templates, attributes: attr_counts, contexts: ctx_counts })
    }

    pub fn template_counts(&self, template_id: u32) -> Counts {
        self.templates.get(template_id as usize).copied().unwrap_or_default()
    }

    /// α of a template.
    pub fn template_score(&self, template_id: u32) -> Result<f64> {
        self.template_counts(template_id).ratio().ok_or(Error::UnseenTemplate(template_id))
    }

    /// β of a line: the highest value ratio among its attributes, 0 when it has none.
    pub fn attribute_score(&self, template_id: u32, attrs: &AttributeSet) -> f64 {
        attr_keys(self.scope, template_id, attrs)
            .filter_map(|k| self.attributes.get(&k).and_then(Counts::ratio))
            .fold(0.0, f64::max)
    }

    pub fn context_counts(&self, key: &ContextKey) -> Counts {
        self.contexts.get(key.neighbor_ids.as_slice()).copied().unwrap_or_default()
    }

    /// γ of a line; a context never counted scores 0.
    pub fn context_score(&self, key: &ContextKey) -> f64 {
        self.context_counts(key).ratio().unwrap_or(0.0)
    }
}

fn attr_keys<'a>(scope: AttributeScope, template_id: u32, attrs: &'a AttributeSet) -> impl Iterator<Item = AttrKey> + 'a {
    attrs.values.iter().enumerate().map(move |(slot, v)| match scope {
        AttributeScope::Global => AttrKey::Global(v.clone()),
        AttributeScope::Slot => AttrKey::Slot(template_id, slot, v.clone()),
    })
}

/// α, β and γ for every line.
pub fn score_lines(
    assignments: &[u32],
    attributes: &[AttributeSet],
    contexts: &[ContextKey],
    split: &LabeledSplit,
    scope: AttributeScope,
) -> Result<Vec<AnomalyScores>> {
    let counts = TaxonomyCounts::build(assignments, attributes, contexts, split, scope)?;
    (0..split.len())
        .map(|pos| {
            Ok(AnomalyScores {
                origin: attributes[pos].origin,
                alpha: counts.template_score(assignments[pos])?,
                beta: counts.attribute_score(assignments[pos], &attributes[pos]),
                gamma: counts.context_score(&contexts[pos]),
            })
        })
        .collect()
}

/// Abnormal lines qualifying for each type at one threshold. Types overlap,
/// so the percentages may sum above 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub threshold: f64,
    pub abnormal_total: usize,
    pub template: usize,
    pub attribute: usize,
    pub contextual: usize,
    /// Origins of abnormal lines qualifying for no type.
    pub unclassified: Vec<u64>,
    /// Set when there are no abnormal lines and percentages are reported as 0.
    pub zero_denominator: bool,
}

impl TaxonomyReport {
    pub fn count(&self, kind: AnomalyKind) -> usize {
        match kind {
            AnomalyKind::Template => self.template,
            AnomalyKind::Attribute => self.attribute,
            AnomalyKind::Contextual => self.contextual,
        }
    }

    fn pct(&self, count: usize) -> f64 {
        if self.abnormal_total == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.abnormal_total as f64
        }
    }

    pub fn percentage(&self, kind: AnomalyKind) -> f64 {
        self.pct(self.count(kind))
    }

    pub fn unclassified_percentage(&self) -> f64 {
        self.pct(self.unclassified.len())
    }
}

/// An abnormal line is of type T iff its T-score is at least `threshold`.
pub fn classify(scores: &[AnomalyScores], split: &LabeledSplit, threshold: f64) -> Result<TaxonomyReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    if scores.len() != split.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: split.len() });
    }
    let mut report = TaxonomyReport {
        threshold,
        abnormal_total: 0,
        template: 0,
        attribute: 0,
        contextual: 0,
        unclassified: Vec::new(),
        zero_denominator: false,
    };
    for pos in split.abnormal_positions() {
        let s = &scores[pos];
        report.abnormal_total += 1;
        let t = s.alpha >= threshold;
        let a = s.beta >= threshold;
        let c = s.gamma >= threshold;
        report.template += t as usize;
        report.attribute += a as usize;
        report.contextual += c as usize;
        if !(t || a || c) {
            report.unclassified.push(s.origin);
        }
    }
    report.zero_denominator = report.abnormal_total == 0;
    Ok(report)
}
