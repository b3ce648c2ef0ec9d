//! Declarative pipeline configuration (TOML) with per-command sections.

use std::fs;
use std::path::{Path, PathBuf};

use loglab_core::ingest::{KindMix, SupercomputerFormat};
use loglab_core::parse::ParseConfig;
use loglab_core::pumodel::ModelConfig;
use loglab_core::rca::{ClusterConfig, VectorMode};
use loglab_core::taxonomy::AttributeScope;
use loglab_core::weaklabel::WindowSide;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Csv,
    Supercomputer,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub format: InputFormat,
    /// Keep only the first N raw lines.
    pub head: Option<usize>,
    pub supercomputer: SupercomputerFormat,
    /// CSV `timestamp_ms,tag`; derived from ground truth when absent.
    pub failures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyConfig {
    /// Preceding lines in a context (a).
    pub before: usize,
    /// Following lines in a context (b).
    pub after: usize,
    pub thresholds: Vec<f64>,
    pub scope: AttributeScope,
    /// Also write per-line α/β/γ as JSON.
    pub per_line: bool,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        Self { before: 10, after: 0, thresholds: vec![0.6, 0.7, 0.8, 0.9, 1.0], scope: AttributeScope::Global, per_line: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// One full weak-label/train/score run per window half-width.
    pub deltas_ms: Vec<i64>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { deltas_ms: vec![1000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcaConfig {
    pub delta_ms: i64,
    pub side: WindowSide,
    pub vector_mode: VectorMode,
    pub cluster: ClusterConfig,
    /// Resample U per cluster before training.
    pub balance: bool,
    pub top_n: usize,
}

impl Default for RcaConfig {
    fn default() -> Self {
        Self { delta_ms: 1500, side: WindowSide::Before, vector_mode: VectorMode::Counts, cluster: ClusterConfig::default(), balance: true, top_n: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub lines: usize,
    pub anomaly_rate: f64,
    pub mix: KindMix,
    /// Root-cause incidents (uses the RCA cause catalogue when > 0).
    pub incidents: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { lines: 10_000, anomaly_rate: 0.05, mix: KindMix { template: 0.5, attribute: 0.5, contextual: 0.0 }, incidents: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Single seed for every stochastic stage; overrides `model.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input: InputConfig,
    pub parse: ParseConfig,
    pub taxonomy: TaxonomyConfig,
    pub label: LabelConfig,
    pub model: ModelConfig,
    pub rca: RcaConfig,
    pub generate: GenerateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            input: InputConfig::default(),
            parse: ParseConfig::default(),
            taxonomy: TaxonomyConfig::default(),
            label: LabelConfig::default(),
            model: ModelConfig::default(),
            rca: RcaConfig::default(),
            generate: GenerateConfig::default(),
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(PipelineError::Config(msg.into()))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {}", path.display(), e)))
    }

    /// Propagates the top-level seed; call after applying overrides.
    pub fn resolve(mut self) -> Self {
        self.model.seed = self.seed;
        self
    }

    pub fn input_path(&self) -> Result<&Path> {
        match &self.input.path {
            Some(p) => Ok(p),
            None => bad("no input path (set input.path or pass --input)"),
        }
    }

    /// Cheap checks, run before any heavy stage. `needs_input` also checks
    /// that referenced files exist.
    pub fn validate(&self, needs_input: bool) -> Result<()> {
        if needs_input {
            let input = self.input_path()?;
            if !input.is_file() {
                return bad(format!("input file {} does not exist", input.display()));
            }
            if let Some(f) = &self.input.failures {
                if !f.is_file() {
                    return bad(format!("failure list {} does not exist", f.display()));
                }
            }
        }
        let t = &self.taxonomy;
        if t.before + t.after == 0 {
            return bad("taxonomy.before + taxonomy.after must be >= 1");
        }
        if t.thresholds.is_empty() || t.thresholds.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return bad("taxonomy.thresholds must be non-empty and within (0, 1]");
        }
        if self.label.deltas_ms.is_empty() || self.label.deltas_ms.iter().any(|&d| d <= 0) {
            return bad("label.deltas_ms must be non-empty and positive");
        }
        if self.rca.delta_ms <= 0 || self.rca.top_n == 0 {
            return bad("rca.delta_ms and rca.top_n must be positive");
        }
        let c = self.rca.cluster.distance_threshold;
        if !(c.is_finite() && c >= 0.0) {
            return bad("rca.cluster.distance_threshold must be finite and >= 0");
        }
        let p = &self.parse.drain;
        if !(p.similarity_threshold > 0.0 && p.similarity_threshold <= 1.0) || p.depth < 3 || p.max_children == 0 {
            return bad("parse.drain needs similarity_threshold in (0, 1], depth >= 3, max_children >= 1");
        }
        self.model.validate()?;
        Ok(())
    }

    /// `sha256:<hex>` over the canonical JSON form of the resolved config.
    /// The output directory is left out so that reruns into a fresh
    /// directory produce identical files.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        let hex: String = hash.iter().map(|b| format!("{:02x}", b)).collect();
        format!("sha256:{}", hex)
    }
}
