//! Minibatch training with Adam over in-memory or streamed datasets.
//!
//! Everything is deterministic in (dataset bytes, config): the shuffle is a
//! single-stream buffered shuffle, per-sample regularization draws are keyed
//! by the sample's position in the shuffled stream, and batch gradients are
//! reduced over fixed-size chunks in index order, so worker count never
//! changes a bit of the result.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DataSource;
use crate::model::{
    backward, forward_train, init_params, ModelParams, NetWeights, RegularizerConfig,
};
use crate::streams::{rng_for, Domain};

/// Samples per gradient-reduction chunk. A constant, not a function of the
/// worker count, so parallel reduction order is fixed.
const GRAD_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub reg: RegularizerConfig,
    pub adam: AdamConfig,
    /// Rows held by the streaming shuffle window.
    pub shuffle_buffer: usize,
    pub use_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 1,
            seed: 0,
            reg: RegularizerConfig::default(),
            adam: AdamConfig::default(),
            shuffle_buffer: 1 << 20,
            use_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.shuffle_buffer == 0 {
            return Err(Error::Config("shuffle_buffer must be at least 1".into()));
        }
        self.reg.validate()
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Binary cross-entropy with the probability clamped away from 0 and 1.
pub fn bce_loss(prob: f64, y: u8) -> f64 {
    let p = prob.clamp(1e-12, 1.0 - 1e-12);
    -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
}

/// Adam first/second-moment state, shaped like the parameters.
pub struct AdamState {
    m: NetWeights,
    v: NetWeights,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState {
            m: NetWeights::zeros(),
            v: NetWeights::zeros(),
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

/// One bias-corrected Adam update, elementwise. `t` is 1-based.
pub fn adam_step(
    params: &mut NetWeights,
    grads: &NetWeights,
    state: &mut AdamState,
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    assert!(t >= 1, "step index is 1-based");
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for ((((p, _), (g, _)), (m, _)), (v, _)) in params
        .flat_mut()
        .into_iter()
        .zip(grads.flat())
        .zip(state.m.flat_mut())
        .zip(state.v.flat_mut())
    {
        assert_eq!(p.len(), g.len(), "shape mismatch");
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Buffered streaming shuffle: rows pass through a fixed-capacity window and
/// leave it in random order. With capacity ≥ n this is a full shuffle; with
/// less it trades shuffle radius for memory, which is the point for
/// out-of-core datasets. Single-stream, hence worker-independent.
pub struct ShuffledRows<I> {
    inner: I,
    buffer: Vec<(Vec<f64>, u8)>,
    capacity: usize,
    rng: ChaCha8Rng,
    primed: bool,
}

impl<I: Iterator<Item = Result<(Vec<f64>, u8)>>> ShuffledRows<I> {
    pub fn new(inner: I, capacity: usize, rng: ChaCha8Rng) -> Self {
        ShuffledRows {
            inner,
            buffer: Vec::new(),
            capacity: capacity.max(1),
            rng,
            primed: false,
        }
    }
}

impl<I: Iterator<Item = Result<(Vec<f64>, u8)>>> Iterator for ShuffledRows<I> {
    type Item = Result<(Vec<f64>, u8)>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.primed {
            while self.buffer.len() < self.capacity {
                match self.inner.next() {
                    Some(Ok(row)) => self.buffer.push(row),
                    Some(Err(e)) => return Some(Err(e)),
                    None => break,
                }
            }
            self.primed = true;
        }
        if self.buffer.is_empty() {
            return None;
        }
        let j = self.rng.gen_range(0..self.buffer.len());
        match self.inner.next() {
            Some(Ok(incoming)) => {
                let out = std::mem::replace(&mut self.buffer[j], incoming);
                Some(Ok(out))
            }
            Some(Err(e)) => Some(Err(e)),
            None => Some(Ok(self.buffer.swap_remove(j))),
        }
    }
}

/// What happened during a training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub steps: u64,
    pub rows_seen: u64,
    pub final_loss: f64,
    pub seed: u64,
    /// Mean BCE of every batch, in step order.
    pub batch_losses: Vec<f64>,
}

fn mean_batch_gradient(
    model: &ModelParams,
    batch: &[(Vec<f64>, u8)],
    reg: &RegularizerConfig,
    seed: u64,
    epoch: usize,
    batch_start_index: u64,
) -> (NetWeights, f64) {
    // fixed-size chunks, summed in chunk order: float reduction order is
    // independent of how rayon schedules the chunks
    let chunks: Vec<(NetWeights, f64)> = batch
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut acc = NetWeights::zeros();
            let mut loss = 0.0;
            for (k, (x, y)) in chunk.iter().enumerate() {
                let sample_index = batch_start_index + (ci * GRAD_CHUNK + k) as u64;
                let mut rng = rng_for(seed, Domain::Regularizer, &[epoch as u64, sample_index]);
                let cache = forward_train(model, x, reg, &mut rng);
                loss += bce_loss(cache.prob, *y);
                let grad = backward(model, &cache, *y);
                acc.add_scaled(&grad, 1.0);
            }
            (acc, loss)
        })
        .collect();

    let mut total = NetWeights::zeros();
    let mut loss_sum = 0.0;
    for (acc, loss) in &chunks {
        total.add_scaled(acc, 1.0);
        loss_sum += loss;
    }
    let scale = 1.0 / batch.len() as f64;
    let mut mean = NetWeights::zeros();
    mean.add_scaled(&total, scale);
    (mean, loss_sum * scale)
}

/// Train a fresh model over `source` for `cfg.epochs` epochs (default one),
/// no validation, no early stopping. Deterministic in (rows, cfg).
pub fn train(
    source: &DataSource,
    cfg: &TrainConfig,
    input_dropout: f64,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    let mut model = init_params(cfg.seed, input_dropout, source.schema().clone())?;
    model.use_bias = cfg.use_bias;

    let mut state = AdamState::new();
    let mut t: u64 = 0;
    let mut rows_seen: u64 = 0;
    let mut batch_losses = Vec::new();

    for epoch in 0..cfg.epochs {
        let shuffle_rng = rng_for(cfg.seed, Domain::Shuffle, &[epoch as u64]);
        let mut rows = ShuffledRows::new(source.stream()?, cfg.shuffle_buffer, shuffle_rng);

        let mut epoch_index: u64 = 0;
        loop {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            for row in rows.by_ref().take(cfg.batch_size) {
                batch.push(row?);
            }
            if batch.is_empty() {
                break;
            }
            let (grad, loss) =
                mean_batch_gradient(&model, &batch, &cfg.reg, cfg.seed, epoch, epoch_index);
            epoch_index += batch.len() as u64;
            rows_seen += batch.len() as u64;
            t += 1;
            adam_step(
                &mut model.weights,
                &grad,
                &mut state,
                t,
                cfg.learning_rate,
                &cfg.adam,
            );
            if !cfg.use_bias {
                model.weights.zero_biases();
            }
            batch_losses.push(loss);
        }
        if epoch_index == 0 {
            return Err(Error::EmptyDataset);
        }
    }

    let report = TrainReport {
        steps: t,
        rows_seen,
        final_loss: batch_losses.last().copied().unwrap_or(f64::NAN),
        seed: cfg.seed,
        batch_losses,
    };
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub input_dropout: f64,
    pub dataset_id: String,
    pub seed: u64,
}

/// Which models to train on which corpora. The stock configuration is the
/// 2+2 grid: input dropout {0.075, 0.125} × corpora {DataAug1, DataAug2},
/// where DataAug2 is the larger corpus that already contains DataAug1's
/// generation recipe plus the second one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<EnsembleMember>,
}

impl EnsembleSpec {
    pub fn two_plus_two(base_seed: u64) -> EnsembleSpec {
        let mut members = Vec::with_capacity(4);
        for (k, (drop, id)) in [
            (0.075, "DataAug1"),
            (0.075, "DataAug2"),
            (0.125, "DataAug1"),
            (0.125, "DataAug2"),
        ]
        .into_iter()
        .enumerate()
        {
            members.push(EnsembleMember {
                input_dropout: drop,
                dataset_id: id.to_string(),
                seed: base_seed.wrapping_add(k as u64),
            });
        }
        EnsembleSpec { members }
    }
}

/// Train every member independently; models come back in member order.
pub fn train_ensemble(
    spec: &EnsembleSpec,
    datasets: &BTreeMap<String, DataSource>,
    cfg: &TrainConfig,
) -> Result<Vec<(ModelParams, TrainReport)>> {
    let mut out = Vec::with_capacity(spec.members.len());
    for member in &spec.members {
        let source = datasets
            .get(&member.dataset_id)
            .ok_or_else(|| Error::MissingDataset(member.dataset_id.clone()))?;
        let member_cfg = TrainConfig {
            seed: member.seed,
            ..cfg.clone()
        };
        out.push(train(source, &member_cfg, member.input_dropout)?);
    }
    Ok(out)
}
