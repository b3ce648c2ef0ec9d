//! On-disk formats. Every text export starts with a provenance header:
//! `#` comment lines for CSV/TSV, a `provenance` field for JSON.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use loglab_core::eval::Metrics;
use loglab_core::ingest::{AnomalyKind, LoadReport, LogMessage, ManifestEntry, RejectedLine, Truth};
use loglab_core::parse::{ParsedCorpus, Template};
use loglab_core::pumodel::LineScore;
use loglab_core::rca::{BalancePlan, Clustering};
use loglab_core::taxonomy::TaxonomyReport;
use loglab_core::weaklabel::{FailureEvent, WeakLabel, WeakLabeledDataset};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const TOOL: &str = concat!("loglab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub config_digest: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_digest: String, seed: u64) -> Self {
        Provenance { tool: TOOL.to_string(), config_digest, seed }
    }

    fn write_comment(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "# tool: {}", self.tool)?;
        writeln!(w, "# config: {}", self.config_digest)?;
        writeln!(w, "# seed: {}", self.seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| PipelineError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| PipelineError::io(path, e))
}

/// Writes a CSV file: provenance comment, header, rows.
fn write_csv<F>(path: &Path, prov: &Provenance, header: &[&str], rows: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut BufWriter<File>>) -> csv::Result<()>,
{
    let mut file = create(path)?;
    prov.write_comment(&mut file).map_err(|e| PipelineError::io(path, e))?;
    {
        let mut w = csv::Writer::from_writer(&mut file);
        w.write_record(header)?;
        rows(&mut w)?;
        w.flush().map_err(|e| PipelineError::io(path, e))?;
    }
    file.flush().map_err(|e| PipelineError::io(path, e))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).flexible(false).from_reader(r)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| PipelineError::Data(e.to_string()))?;
    writeln!(file).and_then(|_| file.flush()).map_err(|e| PipelineError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| PipelineError::data(format!("{}: {}", path.display(), e)))
}

fn truth_field(t: Option<Truth>) -> &'static str {
    match t {
        Some(Truth::Normal) => "0",
        Some(Truth::Abnormal) => "1",
        None => "",
    }
}

// ---- corpus ----

pub fn write_corpus(path: &Path, prov: &Provenance, messages: &[LogMessage]) -> Result<()> {
    write_csv(path, prov, &["index", "timestamp_ms", "source", "truth", "content"], |w| {
        for m in messages {
            w.write_record([&m.index.to_string(), &m.timestamp_ms.to_string(), &m.source, truth_field(m.truth), &m.content])?;
        }
        Ok(())
    })
}

/// Reads `index,timestamp_ms,source,truth,content`. Bad rows, and rows whose
/// index does not increase, go to the rejects list.
pub fn read_corpus_csv<R: Read>(r: R, head: Option<usize>) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(r);
    let mut report = LoadReport::default();
    let mut last_index: Option<u64> = None;
    let mut last_ts = i64::MIN;
    for (i, rec) in rdr.records().take(head.unwrap_or(usize::MAX)).enumerate() {
        let line_number = rec.as_ref().ok().and_then(|r| r.position()).map(|p| p.line() as usize).unwrap_or(i + 2);
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != 5 {
                return Err(format!("expected 5 fields, found {}", rec.len()));
            }
            let index: u64 = rec[0].parse().map_err(|_| format!("bad index {:?}", &rec[0]))?;
            let timestamp_ms: i64 = rec[1].parse().map_err(|_| format!("bad timestamp {:?}", &rec[1]))?;
            let truth = match &rec[3] {
                "0" => Some(Truth::Normal),
                "1" => Some(Truth::Abnormal),
                "" => None,
                other => return Err(format!("bad truth {:?}", other)),
            };
            if last_index.is_some_and(|l| index <= l) {
                return Err(format!("index {} does not increase", index));
            }
            Ok(LogMessage { index, timestamp_ms, source: rec[2].to_string(), content: rec[4].to_string(), truth })
        });
        match parsed {
            Ok(m) => {
                if m.timestamp_ms < last_ts {
                    report.out_of_order += 1;
                }
                last_ts = last_ts.max(m.timestamp_ms);
                last_index = Some(m.index);
                report.messages.push(m);
            }
            Err(reason) => report.rejects.push(RejectedLine { line_number, reason }),
        }
    }
    if report.messages.is_empty() {
        return Err(loglab_core::Error::EmptyCorpus.into());
    }
    Ok(report)
}

pub fn write_rejects(path: &Path, prov: &Provenance, rejects: &[RejectedLine]) -> Result<()> {
    write_csv(path, prov, &["line_number", "reason"], |w| {
        for r in rejects {
            w.write_record([r.line_number.to_string(), r.reason.clone()])?;
        }
        Ok(())
    })
}

// ---- generator outputs ----

pub fn write_manifest(path: &Path, prov: &Provenance, entries: &[ManifestEntry]) -> Result<()> {
    write_csv(path, prov, &["index", "kind"], |w| {
        for e in entries {
            w.write_record([e.index.to_string().as_str(), e.kind.as_str()])?;
        }
        Ok(())
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for rec in csv_reader(open(path)?).records() {
        let rec = rec?;
        let index = rec[0].parse().map_err(|_| PipelineError::data(format!("bad manifest index {:?}", &rec[0])))?;
        let kind = AnomalyKind::parse(&rec[1]).ok_or_else(|| PipelineError::data(format!("bad anomaly kind {:?}", &rec[1])))?;
        out.push(ManifestEntry { index, kind });
    }
    Ok(out)
}

pub fn write_failures(path: &Path, prov: &Provenance, failures: &[FailureEvent]) -> Result<()> {
    write_csv(path, prov, &["timestamp_ms", "tag"], |w| {
        for f in failures {
            w.write_record([f.timestamp_ms.to_string(), f.tag.clone().unwrap_or_default()])?;
        }
        Ok(())
    })
}

pub fn read_failures(path: &Path) -> Result<Vec<FailureEvent>> {
    let mut out = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(open(path)?);
    for rec in rdr.records() {
        let rec = rec?;
        let timestamp_ms = rec
            .get(0)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| PipelineError::data(format!("{}: bad failure timestamp in {:?}", path.display(), rec)))?;
        let tag = rec.get(1).filter(|t| !t.is_empty()).map(str::to_string);
        out.push(FailureEvent { timestamp_ms, tag });
    }
    Ok(out)
}

pub fn write_cause_lines(path: &Path, prov: &Provenance, causes: &[(u64, usize)]) -> Result<()> {
    write_csv(path, prov, &["index", "cause"], |w| {
        for (i, c) in causes {
            w.write_record([i.to_string(), c.to_string()])?;
        }
        Ok(())
    })
}

// ---- parse ----

pub fn write_templates(path: &Path, prov: &Provenance, templates: &[Template]) -> Result<()> {
    let mut file = create(path)?;
    let io = |e| PipelineError::io(path, e);
    prov.write_comment(&mut file).map_err(io)?;
    for t in templates {
        writeln!(file, "{}\t{}", t.id, t).map_err(io)?;
    }
    file.flush().map_err(io)
}

/// `(id, skeleton)` rows of a template table.
pub fn read_templates(path: &Path) -> Result<Vec<(u32, String)>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let (id, sk) = line.split_once('\t').ok_or_else(|| PipelineError::data(format!("bad template row {:?}", line)))?;
        out.push((id.parse().map_err(|_| PipelineError::data(format!("bad template id {:?}", id)))?, sk.to_string()));
    }
    Ok(out)
}

pub fn write_parsed(path: &Path, prov: &Provenance, messages: &[LogMessage], parsed: &ParsedCorpus) -> Result<()> {
    write_csv(path, prov, &["index", "template_id", "attributes"], |w| {
        for (i, m) in messages.iter().enumerate() {
            w.write_record([m.index.to_string(), parsed.assignments[i].to_string(), parsed.attributes[i].values.join("|")])?;
        }
        Ok(())
    })
}

// ---- taxonomy ----

pub fn write_taxonomy(path: &Path, prov: &Provenance, reports: &[TaxonomyReport]) -> Result<()> {
    write_csv(path, prov, &["threshold", "type", "count", "percentage", "abnormal_total", "flag"], |w| {
        for r in reports {
            let flag = if r.zero_denominator { "zero_denominator" } else { "" };
            let rows = [
                ("template", r.template, r.percentage(AnomalyKind::Template)),
                ("attribute", r.attribute, r.percentage(AnomalyKind::Attribute)),
                ("contextual", r.contextual, r.percentage(AnomalyKind::Contextual)),
                ("unclassified", r.unclassified.len(), r.unclassified_percentage()),
            ];
            for (kind, count, pct) in rows {
                w.write_record([r.threshold.to_string(), kind.to_string(), count.to_string(), pct.to_string(), r.abnormal_total.to_string(), flag.to_string()])?;
            }
        }
        Ok(())
    })
}

// ---- weak labels ----

pub fn write_weak_labels(path: &Path, prov: &Provenance, messages: &[LogMessage], ds: &WeakLabeledDataset) -> Result<()> {
    write_csv(path, prov, &["index", "weak_label", "window_ids"], |w| {
        for e in &ds.entries {
            let label = match e.label {
                WeakLabel::P => "P",
                WeakLabel::U => "U",
            };
            let windows: Vec<String> = e.windows.iter().map(u32::to_string).collect();
            w.write_record([messages[e.line].index.to_string(), label.to_string(), windows.join(";")])?;
        }
        Ok(())
    })
}

// ---- scores ----

pub fn write_scores(path: &Path, prov: &Provenance, scores: &[LineScore]) -> Result<()> {
    write_csv(path, prov, &["index", "z_norm", "label"], |w| {
        for s in scores {
            w.write_record([s.origin.to_string().as_str(), s.z_norm.to_string().as_str(), truth_field(Some(s.assigned))])?;
        }
        Ok(())
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<LineScore>> {
    let mut out = Vec::new();
    for rec in csv_reader(open(path)?).records() {
        let rec = rec?;
        let bad = || PipelineError::data(format!("{}: bad score row {:?}", path.display(), rec));
        let origin = rec[0].parse().map_err(|_| bad())?;
        let z_norm = rec[1].parse().map_err(|_| bad())?;
        let assigned = match &rec[2] {
            "0" => Truth::Normal,
            "1" => Truth::Abnormal,
            _ => return Err(bad()),
        };
        out.push(LineScore { origin, z_norm, assigned });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_ms: Option<i64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<loglab_core::eval::MetricFlag>,
}

impl MetricsDoc {
    pub fn new(provenance: Provenance, delta_ms: Option<i64>, m: &Metrics) -> Self {
        MetricsDoc {
            provenance,
            delta_ms,
            tp: m.counts.tp,
            fp: m.counts.fp,
            tn: m.counts.tn,
            fn_: m.counts.fn_,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            flags: m.flags.clone(),
        }
    }
}

// ---- rca ----

pub fn write_clusters(path: &Path, prov: &Provenance, clustering: &Clustering) -> Result<()> {
    write_csv(path, prov, &["window_id", "cluster_id"], |w| {
        for (win, c) in &clustering.assignment {
            w.write_record([win.to_string(), c.to_string()])?;
        }
        Ok(())
    })
}

pub fn read_clusters(path: &Path) -> Result<Vec<(u32, u32)>> {
    let mut out = Vec::new();
    for rec in csv_reader(open(path)?).records() {
        let rec = rec?;
        let bad = || PipelineError::data(format!("bad cluster row {:?}", rec));
        out.push((rec[0].parse().map_err(|_| bad())?, rec[1].parse().map_err(|_| bad())?));
    }
    Ok(out)
}

pub fn write_plan(path: &Path, prov: &Provenance, plan: &BalancePlan) -> Result<()> {
    write_csv(path, prov, &["cluster_id", "size", "target"], |w| {
        for e in &plan.entries {
            w.write_record([e.cluster_id.to_string(), e.size.to_string(), e.target.to_string()])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLineDoc {
    pub index: u64,
    pub z_norm: f64,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWindowDoc {
    pub window_id: u32,
    pub failure_ms: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<u32>,
    pub lines: Vec<RankedLineDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub provenance: Provenance,
    pub top_n: usize,
    pub windows: Vec<RankedWindowDoc>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance::new("sha256:00".into(), 1)
    }

    #[test]
    fn corpus_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let msgs = vec![
            LogMessage { index: 0, timestamp_ms: 5, source: "a".into(), content: "hello, \"world\"".into(), truth: Some(Truth::Normal) },
            LogMessage { index: 2, timestamp_ms: 6, source: "b".into(), content: "# not a comment".into(), truth: Some(Truth::Abnormal) },
            LogMessage { index: 3, timestamp_ms: 6, source: "".into(), content: "".into(), truth: None },
        ];
        write_corpus(&path, &prov(), &msgs).unwrap();
        let back = read_corpus_csv(File::open(&path).unwrap(), None).unwrap();
        assert_eq!(back.messages, msgs);
        assert!(back.rejects.is_empty());
    }

    #[test]
    fn three_line_truths() {
        let text = "index,timestamp_ms,source,truth,content\n0,1,a,0,x\n1,2,a,1,y\n2,3,a,0,z\n";
        let r = read_corpus_csv(text.as_bytes(), None).unwrap();
        let t: Vec<_> = r.messages.iter().map(|m| m.truth.unwrap()).collect();
        assert_eq!(t, vec![Truth::Normal, Truth::Abnormal, Truth::Normal]);
    }

    #[test]
    fn bad_rows_are_rejected_not_fatal() {
        let text = "index,timestamp_ms,source,truth,content\n0,1,a,0,x\n1,zz,a,1,y\n1,3,a,0,z\n2,3,a,7,z\n3,1,a,,w\n";
        let r = read_corpus_csv(text.as_bytes(), None).unwrap();
        // rows 1 (bad timestamp) and 2,3,a,7 (bad truth) are rejected;
        // the last row goes back in time but is kept
        assert_eq!(r.messages.iter().map(|m| m.index).collect::<Vec<_>>(), vec![0, 1, 3]);
        assert_eq!(r.rejects.len(), 2);
        assert_eq!(r.rejects[0].line_number, 3);
        assert_eq!(r.out_of_order, 1);
        let r = read_corpus_csv(text.as_bytes(), Some(1)).unwrap();
        assert_eq!(r.messages.len(), 1);
        assert!(read_corpus_csv("index,timestamp_ms,source,truth,content\n".as_bytes(), None).is_err());
    }

    #[test]
    fn failures_and_scores_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let f = vec![FailureEvent { timestamp_ms: 10, tag: Some("x".into()) }, FailureEvent { timestamp_ms: 3, tag: None }];
        let p = dir.path().join("f.csv");
        write_failures(&p, &prov(), &f).unwrap();
        assert_eq!(read_failures(&p).unwrap(), f);
        let s = vec![LineScore { origin: 4, z_norm: 0.1 + 0.2, assigned: Truth::Abnormal }];
        let p = dir.path().join("s.csv");
        write_scores(&p, &prov(), &s).unwrap();
        assert_eq!(read_scores(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# tool: loglab"));
    }
}
