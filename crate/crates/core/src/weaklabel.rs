//! Weak P/U labels from failure time windows.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::{LogMessage, Truth};
use crate::{Error, Result};

/// A monitoring alert.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureEvent {
    pub timestamp_ms: i64,
    pub tag: Option<String>,
}

/// `P` lines are trusted normal; `U` lines fall inside some failure window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeakLabel {
    P,
    U,
}

/// Which side of the failure time a window covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSide {
    /// `[t_f - δ, t_f + δ]`
    #[default]
    Symmetric,
    /// `[t_f - δ, t_f)`
    Before,
}

impl WindowSide {
    fn covers(self, t: i64, failure: i64, delta: i64) -> bool {
        match self {
            WindowSide::Symmetric => t >= failure - delta && t <= failure + delta,
            WindowSide::Before => t >= failure - delta && t < failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakEntry {
    /// Position of the line in the corpus.
    pub line: usize,
    pub label: WeakLabel,
    /// Covering windows, ascending. Non-empty iff `label == U`.
    pub windows: Vec<u32>,
}

/// Weak labels over a corpus. Entries reference corpus positions; after
/// rebalancing a position may appear several times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakLabeledDataset {
    pub entries: Vec<WeakEntry>,
    pub delta_ms: i64,
    pub side: WindowSide,
    /// Failure timestamps indexed by window id.
    pub window_times: Vec<i64>,
}

impl WeakLabeledDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: WeakLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn window_count(&self) -> usize {
        self.window_times.len()
    }

    /// `|P| / (|P| + |U|)`.
    pub fn q_ratio(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.count(WeakLabel::P) as f64 / self.entries.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeakLabelWarning {
    /// No failures were given; every line is P and training would be degenerate.
    NoFailures,
}

/// Labels every line within any closed window `[t_f - δ, t_f + δ]` as U.
pub fn assign_pu_labels(
    corpus: &[LogMessage],
    failures: &[FailureEvent],
    delta_ms: i64,
) -> Result<(WeakLabeledDataset, Vec<WeakLabelWarning>)> {
    assign_windows(corpus, failures, delta_ms, WindowSide::Symmetric)
}

/// Window assignment with a configurable side. Window ids are positions in
/// the failures sorted by `(timestamp, tag)`, so the result does not depend
/// on input order. Corpus order is irrelevant too: each line does a binary
/// search over the sorted failure times, `O(n log m)` overall.
pub fn assign_windows(
    corpus: &[LogMessage],
    failures: &[FailureEvent],
    delta_ms: i64,
    side: WindowSide,
) -> Result<(WeakLabeledDataset, Vec<WeakLabelWarning>)> {
    if delta_ms <= 0 {
        return Err(Error::InvalidDelta);
    }
    let mut sorted: Vec<&FailureEvent> = failures.iter().collect();
    sorted.sort();
    let times: Vec<i64> = sorted.iter().map(|f| f.timestamp_ms).collect();
    let mut warnings = Vec::new();
    if times.is_empty() {
        warnings.push(WeakLabelWarning::NoFailures);
    }
    let entries = corpus
        .iter()
        .enumerate()
        .map(|(line, msg)| {
            let t = msg.timestamp_ms;
            // failures with t - δ <= t_f <= t + δ are the only candidates
            let lo = times.partition_point(|&f| f < t.saturating_sub(delta_ms));
            let windows: Vec<u32> = (lo..times.len())
                .take_while(|&k| times[k] <= t.saturating_add(delta_ms))
                .filter(|&k| side.covers(t, times[k], delta_ms))
                .map(|k| k as u32)
                .collect();
            let label = if windows.is_empty() { WeakLabel::P } else { WeakLabel::U };
            WeakEntry { line, label, windows }
        })
        .collect();
    Ok((WeakLabeledDataset { entries, delta_ms, side, window_times: times }, warnings))
}

/// One failure per truth-abnormal line, at that line's timestamp.
pub fn failures_from_truth(corpus: &[LogMessage]) -> Result<Vec<FailureEvent>> {
    if corpus.iter().any(|m| m.truth.is_none()) {
        return Err(Error::MissingTruth);
    }
    let failures: Vec<FailureEvent> = corpus
        .iter()
        .filter(|m| m.truth == Some(Truth::Abnormal))
        .map(|m| FailureEvent { timestamp_ms: m.timestamp_ms, tag: None })
        .collect();
    if failures.is_empty() {
        return Err(Error::MissingTruth);
    }
    Ok(failures)
}
