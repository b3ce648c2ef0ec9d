//! The command pipelines. Each validates its config first, then runs its
//! stages in order and writes exports under `output_dir`.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::thread;

use log::{info, warn};
use loglab_core::eval::{evaluate_labels, Metrics};
use loglab_core::ingest::{self, default_spec, generate_synthetic, rca_spec, LoadReport, LogMessage, SyntheticCorpus, Truth};
use loglab_core::parse::{build_context, parse_corpus, tokenize_message, ParsedCorpus, TokenSequence};
use loglab_core::pumodel::{self, assign_labels, LineScore, Model, TrainError, TrainLog};
use loglab_core::rca::{self, BalancePlan, Clustering, RcaWarning};
use loglab_core::taxonomy::{classify, score_lines, AnomalyScores, LabeledSplit, TaxonomyReport};
use loglab_core::weaklabel::{assign_pu_labels, assign_windows, failures_from_truth, FailureEvent, WeakLabel, WeakLabelWarning, WeakLabeledDataset};
use serde::Serialize;

use crate::checkpoint;
use crate::config::{InputFormat, PipelineConfig};
use crate::error::{PipelineError, Result};
use crate::formats::{self, MetricsDoc, Provenance, RankedDoc, RankedLineDoc, RankedWindowDoc};

/// A resolved config plus run-wide settings.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: PipelineConfig,
    pub provenance: Provenance,
    /// Worker cap for per-line scoring.
    pub threads: usize,
}

impl Context {
    pub fn new(cfg: PipelineConfig, threads: usize) -> Self {
        let cfg = cfg.resolve();
        let provenance = Provenance::new(cfg.digest(), cfg.seed);
        Context { cfg, provenance, threads: threads.max(1) }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }
}

pub fn load_corpus(cfg: &PipelineConfig) -> Result<LoadReport> {
    let path = cfg.input_path()?;
    let report = match cfg.input.format {
        InputFormat::Csv => formats::read_corpus_csv(File::open(path).map_err(|e| PipelineError::io(path, e))?, cfg.input.head)?,
        InputFormat::Supercomputer => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            ingest::load_supercomputer(text.lines(), &cfg.input.supercomputer, cfg.input.head)?
        }
    };
    info!("loaded {} lines from {} ({} rejected, {} out of order)", report.messages.len(), path.display(), report.rejects.len(), report.out_of_order);
    Ok(report)
}

fn load_checked(ctx: &Context) -> Result<Vec<LogMessage>> {
    let report = load_corpus(&ctx.cfg)?;
    if !report.rejects.is_empty() {
        warn!("{} unparsable lines, see rejects.csv", report.rejects.len());
        formats::write_rejects(&ctx.out("rejects.csv"), &ctx.provenance, &report.rejects)?;
    }
    Ok(report.messages)
}

fn failures(ctx: &Context, corpus: &[LogMessage]) -> Result<Vec<FailureEvent>> {
    match &ctx.cfg.input.failures {
        Some(path) => formats::read_failures(path),
        None => {
            info!("no failure list configured; using abnormal ground-truth lines as failure times");
            failures_from_truth(corpus).map_err(|e| match e {
                loglab_core::Error::MissingTruth => PipelineError::data("no failure list and the corpus has no ground truth to derive one"),
                e => e.into(),
            })
        }
    }
}

// ---- generate ----

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub lines: usize,
    pub anomalies: usize,
    pub failures: usize,
}

pub fn synthesize(cfg: &PipelineConfig) -> Result<SyntheticCorpus> {
    let g = &cfg.generate;
    // Incident corpora carry no point anomalies: every failure has a planted cause.
    let spec = if g.incidents > 0 {
        rca_spec(g.lines, g.incidents, cfg.seed)
    } else {
        default_spec(g.lines, g.anomaly_rate, g.mix, cfg.seed)
    };
    Ok(generate_synthetic(&spec)?)
}

pub fn run_generate(ctx: &Context) -> Result<GenerateSummary> {
    ctx.cfg.validate(false)?;
    let corpus = synthesize(&ctx.cfg)?;
    let p = &ctx.provenance;
    formats::write_corpus(&ctx.out("corpus.csv"), p, &corpus.messages)?;
    formats::write_manifest(&ctx.out("manifest.csv"), p, &corpus.manifest.entries)?;
    formats::write_failures(&ctx.out("failures.csv"), p, &corpus.failures)?;
    if !corpus.cause_lines.is_empty() {
        formats::write_cause_lines(&ctx.out("causes.csv"), p, &corpus.cause_lines)?;
    }
    Ok(GenerateSummary { lines: corpus.messages.len(), anomalies: corpus.manifest.entries.len(), failures: corpus.failures.len() })
}

// ---- parse ----

pub fn run_parse(ctx: &Context) -> Result<ParsedCorpus> {
    ctx.cfg.validate(true)?;
    let corpus = load_checked(ctx)?;
    let parsed = parse_corpus(&corpus, &ctx.cfg.parse)?;
    info!("{} templates", parsed.templates.len());
    formats::write_templates(&ctx.out("templates.tsv"), &ctx.provenance, &parsed.templates)?;
    formats::write_parsed(&ctx.out("parsed.csv"), &ctx.provenance, &corpus, &parsed)?;
    Ok(parsed)
}

// ---- taxonomy ----

#[derive(Serialize)]
struct LineScoresDoc<'a> {
    provenance: &'a Provenance,
    lines: Vec<LineScoreRow>,
}

#[derive(Serialize)]
struct LineScoreRow {
    index: u64,
    abnormal: bool,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

/// α/β/γ for every line of a labeled corpus.
pub fn taxonomy_scores(cfg: &PipelineConfig, corpus: &[LogMessage], parsed: &ParsedCorpus) -> Result<(LabeledSplit, Vec<AnomalyScores>)> {
    let truths = ingest::truths(corpus).ok_or_else(|| PipelineError::data("taxonomy needs ground-truth labels on every line"))?;
    let split = LabeledSplit::from_truths(&truths);
    let contexts = build_context(&parsed.assignments, cfg.taxonomy.before, cfg.taxonomy.after)?;
    let scores = score_lines(&parsed.assignments, &parsed.attributes, &contexts, &split, cfg.taxonomy.scope)?;
    Ok((split, scores))
}

pub fn run_taxonomy(ctx: &Context) -> Result<Vec<TaxonomyReport>> {
    ctx.cfg.validate(true)?;
    let corpus = load_checked(ctx)?;
    let parsed = parse_corpus(&corpus, &ctx.cfg.parse)?;
    let (split, scores) = taxonomy_scores(&ctx.cfg, &corpus, &parsed)?;
    let reports = ctx.cfg.taxonomy.thresholds.iter().map(|&t| classify(&scores, &split, t)).collect::<Result<Vec<_>, _>>()?;
    if reports.first().is_some_and(|r| r.zero_denominator) {
        warn!("corpus has no abnormal lines; all percentages are 0 and flagged");
    }
    formats::write_taxonomy(&ctx.out("taxonomy.csv"), &ctx.provenance, &reports)?;
    if ctx.cfg.taxonomy.per_line {
        let lines = corpus
            .iter()
            .zip(&scores)
            .enumerate()
            .map(|(i, (m, s))| LineScoreRow { index: m.index, abnormal: split.is_abnormal(i), alpha: s.alpha, beta: s.beta, gamma: s.gamma })
            .collect();
        formats::write_json(&ctx.out("taxonomy_lines.json"), &LineScoresDoc { provenance: &ctx.provenance, lines })?;
    }
    Ok(reports)
}

// ---- label ----

/// Eval-mode `‖z‖` of every sequence, split across up to `threads` workers.
/// Per-line scores do not depend on how lines are chunked.
pub fn score_parallel(model: &Model, sequences: &[TokenSequence], threads: usize) -> Result<Vec<f64>> {
    let per = sequences.len().div_ceil(threads.max(1)).max(1);
    let parts: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = sequences.chunks(per).map(|chunk| s.spawn(move || pumodel::score(model, chunk))).collect();
        handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(sequences.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn train_checked(ctx: &Context, ds: &WeakLabeledDataset, sequences: &[TokenSequence], tag: &str) -> Result<(Model, TrainLog)> {
    info!("[{}] training on {} lines ({} U, q = {:.4})", tag, ds.len(), ds.count(WeakLabel::U), ds.q_ratio());
    match pumodel::train(ds, sequences, &ctx.cfg.model) {
        Ok(out) => {
            for (e, l) in out.log.epoch_losses.iter().enumerate() {
                info!("[{}] epoch {} mean loss {:.6}", tag, e + 1, l);
            }
            Ok((out.model, out.log))
        }
        Err(TrainError::Diverged { epoch, step, last_good, .. }) => {
            let path = ctx.out(&format!("model_{}.lastgood.ckpt", tag));
            checkpoint::save(&path, &last_good, &ctx.provenance)?;
            Err(PipelineError::Numeric(format!("training diverged in epoch {} step {}; last good parameters in {}", epoch, step, path.display())))
        }
        Err(TrainError::Invalid(e)) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct TrainLogDoc<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    log: &'a TrainLog,
}

fn label_lines(model: &Model, corpus: &[LogMessage], z: &[f64]) -> Result<Vec<LineScore>> {
    let pairs: Vec<(u64, f64)> = corpus.iter().zip(z).map(|(m, &v)| (m.index, v)).collect();
    Ok(assign_labels(&pairs, model.q, model.config.threshold)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelRun {
    pub delta_ms: i64,
    pub unlabeled: usize,
    pub q: f64,
    pub log: TrainLog,
    pub metrics: Option<Metrics>,
}

pub fn run_label(ctx: &Context) -> Result<Vec<LabelRun>> {
    ctx.cfg.validate(true)?;
    let corpus = load_checked(ctx)?;
    let failures = failures(ctx, &corpus)?;
    let sequences: Vec<TokenSequence> = corpus.iter().map(tokenize_message).collect();
    let truths = ingest::truths(&corpus);
    if truths.is_none() {
        warn!("corpus lacks ground truth on some lines; evaluation skipped");
    }
    let mut runs = Vec::new();
    for &delta in &ctx.cfg.label.deltas_ms {
        let tag = format!("{}ms", delta);
        let (ds, warnings) = assign_pu_labels(&corpus, &failures, delta)?;
        if warnings.contains(&WeakLabelWarning::NoFailures) {
            return Err(PipelineError::data("failure list is empty; no U lines to learn from"));
        }
        formats::write_weak_labels(&ctx.out(&format!("weak_labels_{}.csv", tag)), &ctx.provenance, &corpus, &ds)?;
        let (model, log) = train_checked(ctx, &ds, &sequences, &tag)?;
        checkpoint::save(&ctx.out(&format!("model_{}.ckpt", tag)), &model, &ctx.provenance)?;
        formats::write_json(&ctx.out(&format!("train_log_{}.json", tag)), &TrainLogDoc { provenance: &ctx.provenance, log: &log })?;
        let z = score_parallel(&model, &sequences, ctx.threads)?;
        let scores = label_lines(&model, &corpus, &z)?;
        formats::write_scores(&ctx.out(&format!("scores_{}.csv", tag)), &ctx.provenance, &scores)?;
        let metrics = match &truths {
            Some(t) => {
                let predicted: Vec<Truth> = scores.iter().map(|s| s.assigned).collect();
                let m = evaluate_labels(t, &predicted)?;
                info!("[{}] precision {:.4} recall {:.4} f1 {:.4}", tag, m.precision, m.recall, m.f1);
                formats::write_json(&ctx.out(&format!("metrics_{}.json", tag)), &MetricsDoc::new(ctx.provenance.clone(), Some(delta), &m))?;
                Some(m)
            }
            None => None,
        };
        runs.push(LabelRun { delta_ms: delta, unlabeled: ds.count(WeakLabel::U), q: ds.q_ratio(), log, metrics });
    }
    Ok(runs)
}

// ---- rca ----

#[derive(Debug, Clone)]
pub struct RcaRun {
    pub windows: WeakLabeledDataset,
    pub clustering: Clustering,
    pub plan: BalancePlan,
    pub ranked: Vec<rca::RankedWindow>,
    pub warnings: Vec<RcaWarning>,
}

fn describe(w: &RcaWarning) -> String {
    match w {
        RcaWarning::EmptyWindow(id) => format!("window {} holds no lines", id),
        RcaWarning::ShortWindow { window_id, available } => format!("window {} has only {} lines to rank", window_id, available),
    }
}

pub fn run_rca(ctx: &Context) -> Result<RcaRun> {
    ctx.cfg.validate(true)?;
    let corpus = load_checked(ctx)?;
    let failures = failures(ctx, &corpus)?;
    if failures.is_empty() {
        return Err(PipelineError::data("no failure windows: the failure list is empty"));
    }
    let r = &ctx.cfg.rca;
    let (ds, _) = assign_windows(&corpus, &failures, r.delta_ms, r.side)?;
    formats::write_weak_labels(&ctx.out("rca_windows.csv"), &ctx.provenance, &corpus, &ds)?;
    let vectors = rca::vectorize_windows(&ds, &corpus, r.vector_mode)?;
    let mut warnings = vectors.warnings.clone();
    let clustering = rca::cluster_windows(&vectors.vectors, &r.cluster)?;
    info!("{} windows over {} services -> {} clusters", vectors.vectors.len(), vectors.services.len(), clustering.clusters.len());
    formats::write_clusters(&ctx.out("clusters.csv"), &ctx.provenance, &clustering)?;
    let plan = rca::target_sizes(&clustering)?;
    formats::write_plan(&ctx.out("plan.csv"), &ctx.provenance, &plan)?;
    let training = if r.balance { rca::rebalance(&ds, &clustering, &plan, ctx.cfg.seed)? } else { ds.clone() };

    let sequences: Vec<TokenSequence> = corpus.iter().map(tokenize_message).collect();
    let (model, _) = train_checked(ctx, &training, &sequences, "rca")?;
    checkpoint::save(&ctx.out("model_rca.ckpt"), &model, &ctx.provenance)?;
    let z = score_parallel(&model, &sequences, ctx.threads)?;
    let scores = label_lines(&model, &corpus, &z)?;
    let (ranked, rank_warnings) = rca::rank_root_causes(&ds, &corpus, &scores, r.top_n)?;
    warnings.extend(rank_warnings);
    for w in &warnings {
        warn!("{}", describe(w));
    }
    let doc = RankedDoc {
        provenance: ctx.provenance.clone(),
        top_n: r.top_n,
        windows: ranked
            .iter()
            .map(|w| RankedWindowDoc {
                window_id: w.window_id,
                failure_ms: ds.window_times[w.window_id as usize],
                cluster_id: clustering.cluster_of(w.window_id),
                lines: w
                    .lines
                    .iter()
                    .map(|l| RankedLineDoc { index: corpus[l.line].index, z_norm: l.z_norm, content: corpus[l.line].content.clone() })
                    .collect(),
            })
            .collect(),
        warnings: warnings.iter().map(describe).collect(),
    };
    formats::write_json(&ctx.out("ranked.json"), &doc)?;
    Ok(RcaRun { windows: ds, clustering, plan, ranked, warnings })
}

// ---- evaluate ----

/// Metrics of a score export against the ground truth of the configured corpus.
pub fn run_evaluate(ctx: &Context, scores_path: &Path, out: Option<&Path>) -> Result<Metrics> {
    ctx.cfg.validate(true)?;
    if !scores_path.is_file() {
        return Err(PipelineError::Config(format!("score file {} does not exist", scores_path.display())));
    }
    let corpus = load_checked(ctx)?;
    let scores = formats::read_scores(scores_path)?;
    let truths = ingest::truths(&corpus).ok_or_else(|| PipelineError::data("corpus has no ground truth to evaluate against"))?;
    if scores.len() != corpus.len() || scores.iter().zip(&corpus).any(|(s, m)| s.origin != m.index) {
        return Err(PipelineError::data("score file and corpus cover different lines"));
    }
    let predicted: Vec<Truth> = scores.iter().map(|s| s.assigned).collect();
    let m = evaluate_labels(&truths, &predicted)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.out("metrics.json"));
    formats::write_json(&path, &MetricsDoc::new(ctx.provenance.clone(), None, &m))?;
    Ok(m)
}
