use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loglab::config::InputFormat;
use loglab::pipeline;
use loglab::{Context, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "loglab", version, about = "Log anomaly taxonomy, PU-learning detection and root-cause ranking")]
struct Cli {
    /// Worker threads for per-line scoring.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; every field has a default.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Only read the first N lines of the input.
    #[arg(long)]
    head: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine templates and attributes.
    Parse {
        #[command(flatten)]
        common: Common,
    },
    /// Classify labeled anomalies into template / attribute / contextual.
    Taxonomy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated τ values; replaces the configured list.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Also export per-line scores.
        #[arg(long)]
        per_line: bool,
    },
    /// Weak-label by failure windows, train the detector and score every line.
    Label {
        #[command(flatten)]
        common: Common,
        /// Comma-separated window half-widths in ms.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<i64>>,
        #[arg(long)]
        epochs: Option<usize>,
        /// CSV `timestamp_ms,tag`.
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Cluster failure windows, rebalance, train and rank root-cause lines.
    Rca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: Option<i64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        failures: Option<PathBuf>,
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Write a synthetic labeled corpus.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lines: Option<usize>,
        /// Fraction of anomalous lines.
        #[arg(long)]
        rate: Option<f64>,
        /// Planted failure incidents with root causes.
        #[arg(long)]
        incidents: Option<usize>,
    },
    /// Score a `scores_*.csv` export against the corpus ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        /// Metrics JSON path (default: <out>/metrics.json).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

fn base_config(c: &Common) -> loglab::Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(i) = &c.input {
        cfg.input.path = Some(i.clone());
    }
    if let Some(f) = c.format {
        cfg.input.format = f;
    }
    if c.head.is_some() {
        cfg.input.head = c.head;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn prepare(cfg: PipelineConfig, threads: usize) -> loglab::Result<Context> {
    let ctx = Context::new(cfg, threads);
    std::fs::create_dir_all(&ctx.cfg.output_dir).map_err(|e| PipelineError::io(&ctx.cfg.output_dir, e))?;
    Ok(ctx)
}

fn run(cli: Cli) -> loglab::Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Parse { common } => {
            let ctx = prepare(base_config(&common)?, threads)?;
            ctx.cfg.validate(true)?;
            let parsed = pipeline::run_parse(&ctx)?;
            println!("{} lines, {} templates", parsed.assignments.len(), parsed.templates.len());
        }
        Command::Taxonomy { common, thresholds, per_line } => {
            let mut cfg = base_config(&common)?;
            if let Some(t) = thresholds {
                cfg.taxonomy.thresholds = t;
            }
            cfg.taxonomy.per_line |= per_line;
            cfg.validate(true)?;
            let ctx = prepare(cfg, threads)?;
            for r in pipeline::run_taxonomy(&ctx)? {
                println!(
                    "tau {:.2}: template {:.2}% attribute {:.2}% contextual {:.2}% unclassified {:.2}% of {} abnormal",
                    r.threshold,
                    r.percentage(loglab_core::ingest::AnomalyKind::Template),
                    r.percentage(loglab_core::ingest::AnomalyKind::Attribute),
                    r.percentage(loglab_core::ingest::AnomalyKind::Contextual),
                    r.unclassified_percentage(),
                    r.abnormal_total
                );
            }
        }
        Command::Label { common, delta, epochs, failures } => {
            let mut cfg = base_config(&common)?;
            if let Some(d) = delta {
                cfg.label.deltas_ms = d;
            }
            if let Some(e) = epochs {
                cfg.model.epochs = e;
            }
            if failures.is_some() {
                cfg.input.failures = failures;
            }
            cfg.validate(true)?;
            let ctx = prepare(cfg, threads)?;
            for r in pipeline::run_label(&ctx)? {
                match &r.metrics {
                    Some(m) => println!("delta {} ms: U {} q {:.4} precision {:.4} recall {:.4} f1 {:.4}", r.delta_ms, r.unlabeled, r.q, m.precision, m.recall, m.f1),
                    None => println!("delta {} ms: U {} q {:.4} (no ground truth, not evaluated)", r.delta_ms, r.unlabeled, r.q),
                }
            }
        }
        Command::Rca { common, delta, epochs, failures, top_n } => {
            let mut cfg = base_config(&common)?;
            if let Some(d) = delta {
                cfg.rca.delta_ms = d;
            }
            if let Some(e) = epochs {
                cfg.model.epochs = e;
            }
            if failures.is_some() {
                cfg.input.failures = failures;
            }
            if let Some(n) = top_n {
                cfg.rca.top_n = n;
            }
            cfg.validate(true)?;
            let ctx = prepare(cfg, threads)?;
            let run = pipeline::run_rca(&ctx)?;
            println!("{} windows, {} clusters, ranked.json written", run.windows.window_count(), run.clustering.clusters.len());
        }
        Command::Generate { common, lines, rate, incidents } => {
            let mut cfg = base_config(&common)?;
            if let Some(n) = lines {
                cfg.generate.lines = n;
            }
            if let Some(r) = rate {
                cfg.generate.anomaly_rate = r;
            }
            if let Some(i) = incidents {
                cfg.generate.incidents = i;
            }
            cfg.validate(false)?;
            let ctx = prepare(cfg, threads)?;
            let s = pipeline::run_generate(&ctx)?;
            println!("{} lines, {} anomalous, {} failures", s.lines, s.anomalies, s.failures);
        }
        Command::Evaluate { common, scores, metrics } => {
            let cfg = base_config(&common)?;
            cfg.validate(true)?;
            let ctx = prepare(cfg, threads)?;
            let m = pipeline::run_evaluate(&ctx, &scores, metrics.as_deref())?;
            println!("precision {:.4} recall {:.4} f1 {:.4}", m.precision, m.recall, m.f1);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
