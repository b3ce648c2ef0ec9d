//! Confusion counts and precision / recall / F1, abnormal as the positive class.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::Truth;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Metric that hit a zero denominator and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFlag {
    PrecisionUndefined,
    RecallUndefined,
    F1Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<MetricFlag>,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let mut flags = Vec::new();
        let ratio = |num: u64, den: u64, flag: MetricFlag, flags: &mut Vec<MetricFlag>| {
            if den == 0 {
                flags.push(flag);
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(counts.tp, counts.tp + counts.fp, MetricFlag::PrecisionUndefined, &mut flags);
        let recall = ratio(counts.tp, counts.tp + counts.fn_, MetricFlag::RecallUndefined, &mut flags);
        let f1 = if precision + recall == 0.0 {
            flags.push(MetricFlag::F1Undefined);
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { counts, precision, recall, f1, flags }
    }
}

pub fn confusion(truth: &[Truth], predicted: &[Truth]) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: predicted.len() });
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in truth.iter().zip(predicted) {
        match (y.is_abnormal(), p.is_abnormal()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn evaluate_labels(truth: &[Truth], predicted: &[Truth]) -> Result<Metrics> {
    Ok(Metrics::from_counts(confusion(truth, predicted)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use Truth::{Abnormal as A, Normal as N};

    #[test]
    fn perfect_prediction() {
        let y = vec![A, N, N, A];
        let m = evaluate_labels(&y, &y).unwrap();
        assert_eq!(m.f1, 1.0);
        assert!(m.flags.is_empty());
    }

    #[test]
    fn direct_formula() {
        let m = Metrics::from_counts(ConfusionCounts { tp: 8, fp: 2, tn: 5, fn_: 2 });
        assert!((m.precision - 0.8).abs() < 1e-15);
        assert!((m.recall - 0.8).abs() < 1e-15);
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn all_normal_prediction_is_flagged() {
        let m = evaluate_labels(&[A, N, A], &[N, N, N]).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.flags.contains(&MetricFlag::PrecisionUndefined));
        assert!(m.flags.contains(&MetricFlag::F1Undefined));
    }

    #[test]
    fn mismatched_lengths() {
        assert!(evaluate_labels(&[A], &[A, N]).is_err());
    }

    fn label() -> impl Strategy<Value = Truth> {
        prop_oneof![Just(A), Just(N)]
    }

    proptest! {
        #[test]
        fn f1_bounds(pairs in proptest::collection::vec((label(), label()), 1..200)) {
            let (y, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = evaluate_labels(&y, &p).unwrap();
            prop_assert_eq!(m.counts.total() as usize, y.len());
            let lo = m.precision.min(m.recall);
            prop_assert!(m.f1 >= lo - 1e-12 && m.f1 <= 2.0 * lo + 1e-12);
        }

        #[test]
        fn wholesale_swap(pairs in proptest::collection::vec((label(), label()), 1..200)) {
            let (y, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let flipped: Vec<_> = p.iter().map(|&l| if l == A { N } else { A }).collect();
            let a = confusion(&y, &p).unwrap();
            let b = confusion(&y, &flipped).unwrap();
            prop_assert_eq!((a.tp, a.fp, a.tn, a.fn_), (b.fn_, b.tn, b.fp, b.tp));
        }
    }
}
