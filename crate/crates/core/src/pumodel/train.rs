use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::vocab::{build_input, Vocab};
use super::ModelConfig;
use crate::math;
use crate::parse::{normalize, TokenSequence};
use crate::weaklabel::{WeakLabel, WeakLabeledDataset};
use crate::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates of AdamW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    /// One step with weight decay decoupled from the adaptive update.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        self.step += 1;
        let c1 = 1.0 - math::powf(BETA1, self.step as f64);
        let c2 = 1.0 - math::powf(BETA2, self.step as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * (mhat / (math::sqrt(vhat) + ADAM_EPS) + weight_decay * params[i]);
        }
    }
}

/// A trained (or training) model with everything needed to score new lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// `|P| / (|P| + |U|)` of the training split.
    pub q: f64,
    pub params: Vec<f64>,
    pub adam: AdamState,
}

impl Model {
    pub fn encoder(&self) -> Result<Encoder> {
        Encoder::new(&self.config, self.vocab.len())
    }

    /// Checks that the tensors fit the config and vocabulary.
    pub fn validate(&self) -> Result<()> {
        let n = self.encoder()?.param_count();
        for len in [self.params.len(), self.adam.m.len(), self.adam.v.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: len, right: n });
            }
        }
        if !self.params.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean loss over each epoch's batches, weighted by batch size.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// Loss or gradients became non-finite; `last_good` holds the
    /// parameters from the end of the previous epoch.
    #[error("training diverged in epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize, last_good: Box<Model>, log: TrainLog },
}

fn stream(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

fn encode(sequences: &[TokenSequence], vocab: &Vocab, max_len: usize) -> Vec<Vec<u32>> {
    sequences.iter().map(|s| build_input(&normalize(s), vocab, max_len)).collect()
}

/// Trains on every entry of `dataset`. `sequences` are the raw token
/// sequences of the whole corpus, indexed by corpus position.
pub fn train(dataset: &WeakLabeledDataset, sequences: &[TokenSequence], cfg: &ModelConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let q = dataset.q_ratio();
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::DegenerateSplit(q).into());
    }
    let mut lines = Vec::with_capacity(dataset.len());
    for e in &dataset.entries {
        lines.push(sequences.get(e.line).ok_or(Error::LengthMismatch { left: e.line, right: sequences.len() })?);
    }
    let normalized: Vec<TokenSequence> = lines.iter().map(|s| normalize(s)).collect();
    let vocab = Vocab::build(&normalized);
    let inputs: Vec<Vec<u32>> = normalized.iter().map(|s| build_input(s, &vocab, cfg.max_len)).collect();
    let labels: Vec<WeakLabel> = dataset.entries.iter().map(|e| e.label).collect();

    let encoder = Encoder::new(cfg, vocab.len())?;
    let params = encoder.init_params(&mut stream(cfg.seed, 0));
    let mut model = Model { config: cfg.clone(), vocab, q, adam: AdamState::new(params.len()), params };
    let mut shuffle_rng = stream(cfg.seed, 1);
    let mut dropout_rng = stream(cfg.seed, 2);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grads = vec![0.0; model.params.len()];
    for epoch in 0..cfg.epochs {
        let last_good = model.clone();
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let batch: Vec<&[u32]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let batch_labels: Vec<WeakLabel> = chunk.iter().map(|&i| labels[i]).collect();
            let result = encoder.loss_and_gradient(&model.params, &batch, &batch_labels, q, Some(&mut dropout_rng), &mut grads);
            let loss = match result {
                Ok((loss, _)) if loss.is_finite() && grads.iter().all(|g| g.is_finite()) => loss,
                Ok(_) | Err(Error::NonFinite(_)) => {
                    return Err(TrainError::Diverged { epoch, step: log.steps, last_good: Box::new(last_good), log });
                }
                Err(e) => return Err(e.into()),
            };
            total += loss * chunk.len() as f64;
            model.adam.update(&mut model.params, &grads, cfg.learning_rate, cfg.weight_decay);
            log.steps += 1;
        }
        log.epoch_losses.push(total / inputs.len() as f64);
    }
    Ok(TrainOutcome { model, log })
}

/// Eval-mode `‖z‖` of every sequence.
pub fn score(model: &Model, sequences: &[TokenSequence]) -> Result<Vec<f64>> {
    let encoder = model.encoder()?;
    let inputs = encode(sequences, &model.vocab, model.config.max_len);
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(model.config.batch_size) {
        let batch: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
        out.extend(encoder.forward(&model.params, &batch)?.iter().map(|z| math::norm(z)));
    }
    Ok(out)
}
