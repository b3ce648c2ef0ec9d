//! PU learner: a small self-attention encoder maps each line to a vector
//! `z`; `‖z‖` is trained towards 0 for trusted-normal (P) lines and away
//! from 0 for lines inside failure windows (U).

mod encoder;
mod train;
mod vocab;

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::Truth;
use crate::math;
use crate::weaklabel::WeakLabel;
use crate::{Error, Result};

pub use encoder::{Encoder, Layout};
pub use train::{score, train, AdamState, Model, TrainError, TrainLog, TrainOutcome};
pub use vocab::{build_input, Vocab, CLS, HEX, NUM, PAD, UNK};

/// Clamp on `‖z‖` inside the U branch of the loss.
pub const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// `q^(2/3)`, where both loss branches take the same value.
    #[default]
    Crossover,
    Fixed(f64),
}


impl ThresholdMode {
    pub fn resolve(self, q: f64) -> Result<f64> {
        match self {
            ThresholdMode::Crossover => crossover_threshold(q),
            ThresholdMode::Fixed(v) if v.is_finite() && v >= 0.0 => Ok(v),
            ThresholdMode::Fixed(v) => Err(Error::InvalidConfig(format!("fixed threshold {} must be finite and >= 0", v))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Truncation length in tokens, including `[CLS]`.
    pub max_len: usize,
    pub embed_dim: usize,
    /// Width of the feed-forward sublayer.
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub threshold: ThresholdMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_len: 20,
            embed_dim: 128,
            hidden_dim: 256,
            n_layers: 1,
            n_heads: 2,
            dropout_rate: 0.1,
            batch_size: 1024,
            epochs: 8,
            learning_rate: 1e-4,
            weight_decay: 5e-5,
            seed: 0,
            threshold: ThresholdMode::Crossover,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads) {
            return bad("embed_dim must be a positive multiple of n_heads");
        }
        if self.max_len < 2 {
            return bad("max_len must be at least 2");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.hidden_dim == 0 || self.n_layers == 0 || self.batch_size == 0 {
            return bad("hidden_dim, n_layers and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("learning_rate must be positive and weight_decay non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineScore {
    pub origin: u64,
    pub z_norm: f64,
    pub assigned: Truth,
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateSplit(q))
    }
}

/// The `‖z‖` at which `‖z‖² = q²/‖z‖`.
pub fn crossover_threshold(q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(math::powf(q, 2.0 / 3.0))
}

/// Loss of a single line.
#[inline]
pub fn line_loss(z_norm: f64, label: WeakLabel, q: f64) -> f64 {
    match label {
        WeakLabel::P => z_norm * z_norm,
        WeakLabel::U => q * q / z_norm.max(NORM_EPS),
    }
}

/// Derivative of [`line_loss`] with respect to `‖z‖`; zero inside the clamp.
#[inline]
pub fn line_loss_derivative(z_norm: f64, label: WeakLabel, q: f64) -> f64 {
    match label {
        WeakLabel::P => 2.0 * z_norm,
        WeakLabel::U if z_norm > NORM_EPS => -q * q / (z_norm * z_norm),
        WeakLabel::U => 0.0,
    }
}

/// Mean PU loss over a batch: P lines pay `‖z‖²`, U lines `q²/max(‖z‖, ε)`.
pub fn pu_loss(z_norms: &[f64], labels: &[WeakLabel], q: f64) -> Result<f64> {
    check_q(q)?;
    if z_norms.len() != labels.len() {
        return Err(Error::LengthMismatch { left: z_norms.len(), right: labels.len() });
    }
    if z_norms.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let sum: f64 = z_norms.iter().zip(labels).map(|(&z, &l)| line_loss(z, l, q)).sum();
    Ok(sum / z_norms.len() as f64)
}

/// Labels every line: abnormal iff `‖z‖ >= threshold`.
pub fn assign_labels(scores: &[(u64, f64)], q: f64, mode: ThresholdMode) -> Result<Vec<LineScore>> {
    let threshold = mode.resolve(q)?;
    Ok(scores
        .iter()
        .map(|&(origin, z_norm)| LineScore {
            origin,
            z_norm,
            assigned: if z_norm >= threshold && z_norm > 0.0 { Truth::Abnormal } else { Truth::Normal },
        })
        .collect())
}
