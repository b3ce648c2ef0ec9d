//! Log messages, the line-oriented supercomputer log format, and the
//! synthetic corpus generator.

mod synthetic;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use synthetic::{
    default_spec, generate_synthetic, rca_spec, AnomalyKind, CauseSpec, GroundTruthManifest, KindMix, ManifestEntry,
    SkeletonSpec, SlotPool, SyntheticCorpus, SyntheticSpec,
};

/// Ground-truth label of a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Truth {
    Normal,
    Abnormal,
}

impl Truth {
    pub fn is_abnormal(self) -> bool {
        self == Truth::Abnormal
    }
}

/// One log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMessage {
    /// Ordinal position in the source file, 0-based.
    pub index: u64,
    pub timestamp_ms: i64,
    /// Service or node that emitted the line.
    pub source: String,
    pub content: String,
    pub truth: Option<Truth>,
}

/// Field layout of whitespace-delimited supercomputer logs (BGL, Thunderbird,
/// Spirit). Field 0 is always the label token, `-` meaning normal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupercomputerFormat {
    /// Field holding the epoch timestamp.
    pub timestamp_field: usize,
    /// Multiplier from the timestamp field's unit to milliseconds.
    pub timestamp_scale_ms: i64,
    /// Field naming the emitting node; lines too short for it get an empty source.
    pub source_field: Option<usize>,
    /// Content is the raw remainder of the line starting at this field.
    pub content_field: usize,
}

impl Default for SupercomputerFormat {
    fn default() -> Self {
        Self {
            timestamp_field: 1,
            timestamp_scale_ms: 1000,
            source_field: Some(3),
            content_field: 2,
        }
    }
}

/// A line the loader could not parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    /// 1-based line number in the input.
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub messages: Vec<LogMessage>,
    pub rejects: Vec<RejectedLine>,
    /// Lines whose timestamp is earlier than the previous accepted line's.
    pub out_of_order: usize,
}

impl SupercomputerFormat {
    /// Parses a single raw line found at 0-based position `index`.
    pub fn parse_line(&self, line: &str, index: u64) -> core::result::Result<LogMessage, String> {
        let spans = field_spans(line);
        let needed = self.timestamp_field.max(self.content_field);
        if spans.len() <= needed {
            return Err(format!("expected at least {} fields, found {}", needed + 1, spans.len()));
        }
        let field = |i: usize| &line[spans[i].0..spans[i].1];
        let truth = if field(0) == "-" { Truth::Normal } else { Truth::Abnormal };
        let raw_ts = field(self.timestamp_field);
        let ts: i64 = raw_ts
            .parse()
            .map_err(|_| format!("timestamp field {:?} is not an integer", raw_ts))?;
        let timestamp_ms = ts
            .checked_mul(self.timestamp_scale_ms)
            .ok_or_else(|| "timestamp overflows".to_string())?;
        let source = match self.source_field {
            Some(i) if i < spans.len() => field(i).to_string(),
            _ => String::new(),
        };
        let content = line[spans[self.content_field].0..].trim_end().to_string();
        Ok(LogMessage { index, timestamp_ms, source, content, truth: Some(truth) })
    }
}

fn field_spans(line: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, line.len()));
    }
    spans
}

/// Loads supercomputer-format lines. Unparsable lines are reported and
/// skipped; blank lines are ignored. `head` truncates on raw lines before
/// any parsing.
pub fn load_supercomputer<I, S>(lines: I, format: &SupercomputerFormat, head: Option<usize>) -> Result<LoadReport>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut report = LoadReport::default();
    let mut last_ts = i64::MIN;
    for (pos, line) in lines.into_iter().take(head.unwrap_or(usize::MAX)).enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        match format.parse_line(line, pos as u64) {
            Ok(msg) => {
                if msg.timestamp_ms < last_ts {
                    report.out_of_order += 1;
                }
                last_ts = last_ts.max(msg.timestamp_ms);
                report.messages.push(msg);
            }
            Err(reason) => report.rejects.push(RejectedLine { line_number: pos + 1, reason }),
        }
    }
    if report.messages.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(report)
}

/// Ground-truth labels of a corpus, if every line carries one.
pub fn truths(corpus: &[LogMessage]) -> Option<Vec<Truth>> {
    corpus.iter().map(|m| m.truth).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dash_label_is_normal() {
        let report = load_supercomputer(
            ["- 1117838570 2005.06.03 R02-M1-N0 APPUNAVAIL msg"],
            &SupercomputerFormat::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.messages.len(), 1);
        let m = &report.messages[0];
        assert_eq!(m.truth, Some(Truth::Normal));
        assert_eq!(m.timestamp_ms, 1_117_838_570_000);
        assert_eq!(m.source, "R02-M1-N0");
        assert_eq!(m.content, "2005.06.03 R02-M1-N0 APPUNAVAIL msg");
    }

    #[test]
    fn other_label_is_abnormal() {
        let report = load_supercomputer(
            ["APPREAD 1117838570 2005.06.03 node1 fatal error"],
            &SupercomputerFormat::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.messages[0].truth, Some(Truth::Abnormal));
    }

    #[test]
    fn rejects_are_skipped_not_fatal() {
        let lines = vec!["- 10 a b c", "- notanumber a b", "- 12", "", "- 13 x y z"];
        let report = load_supercomputer(lines, &SupercomputerFormat::default(), None).unwrap();
        assert_eq!(report.messages.len(), 2);
        assert_eq!(report.messages[1].index, 4);
        assert_eq!(
            report.rejects.iter().map(|r| r.line_number).collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn empty_input_is_an_error() {
        let none: [&str; 0] = [];
        assert_eq!(
            load_supercomputer(none, &SupercomputerFormat::default(), None),
            Err(Error::EmptyCorpus)
        );
        assert_eq!(
            load_supercomputer(["garbage"], &SupercomputerFormat::default(), None),
            Err(Error::EmptyCorpus)
        );
    }

    #[test]
    fn head_truncates_raw_lines() {
        let lines = vec!["- 1 a b x", "bad", "- 3 a b y"];
        let report = load_supercomputer(lines, &SupercomputerFormat::default(), Some(2)).unwrap();
        assert_eq!(report.messages.len(), 1);
        assert_eq!(report.rejects.len(), 1);
    }

    #[test]
    fn configurable_timestamp_field() {
        let fmt = SupercomputerFormat {
            timestamp_field: 2,
            timestamp_scale_ms: 1,
            source_field: None,
            content_field: 3,
        };
        let m = fmt.parse_line("- x 5000 hello  world ", 0).unwrap();
        assert_eq!(m.timestamp_ms, 5000);
        assert_eq!(m.content, "hello  world");
        assert_eq!(m.source, "");
    }
}
