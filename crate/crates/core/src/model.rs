//! The robust classifier.
//!
//! Each of the 87 scalar features is lifted to an 8-dim vector by a
//! two-layer ReLU embedding whose weights are shared among features of the
//! same physical type (3 parameter sets total). The 87 embeddings are
//! concatenated (696 dims) and fused by a 256-unit tanh hidden layer into a
//! single sigmoid logit. Training-time regularization: inverted dropout on
//! the raw input, plus additive Gaussian noise followed by inverted dropout
//! on every hidden layer. Forward and backward passes are handwritten in
//! f64 so gradients can be checked against finite differences.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::FEATURE_COUNT;

/// First embedding layer width (per scalar feature).
pub const EMB_HIDDEN: usize = 16;
/// Embedding output width per feature.
pub const EMB_DIM: usize = 8;
/// Width of the concatenated embedding vector: 87 · 8.
pub const FUSED_DIM: usize = FEATURE_COUNT * EMB_DIM;
/// Fusion hidden layer width.
pub const HIDDEN_DIM: usize = 256;

pub const MODEL_FORMAT: &str = "crnet-v1";

/// Shared embedding parameters for one feature type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEmbedding {
    /// 16 weights lifting the scalar input.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// 8×16, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl TypeEmbedding {
    fn zeros() -> Self {
        TypeEmbedding {
            w1: vec![0.0; EMB_HIDDEN],
            b1: vec![0.0; EMB_HIDDEN],
            w2: vec![0.0; EMB_DIM * EMB_HIDDEN],
            b2: vec![0.0; EMB_DIM],
        }
    }

    fn check_shapes(&self) -> Result<()> {
        if self.w1.len() != EMB_HIDDEN
            || self.b1.len() != EMB_HIDDEN
            || self.w2.len() != EMB_DIM * EMB_HIDDEN
            || self.b2.len() != EMB_DIM
        {
            return Err(Error::Model("embedding parameter shapes are wrong".into()));
        }
        Ok(())
    }
}

/// Dense fusion tail parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    /// 256×696, row-major.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

/// All trainable tensors. Also used for gradients and optimizer moments,
/// which mirror the parameter shapes exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetWeights {
    /// Indexed by `FeatureType::index()`: PT, ETA, PHI.
    pub emb: [TypeEmbedding; 3],
    pub tail: TailParams,
}

impl NetWeights {
    pub fn zeros() -> Self {
        NetWeights {
            emb: [
                TypeEmbedding::zeros(),
                TypeEmbedding::zeros(),
                TypeEmbedding::zeros(),
            ],
            tail: TailParams {
                w_hidden: vec![0.0; HIDDEN_DIM * FUSED_DIM],
                b_hidden: vec![0.0; HIDDEN_DIM],
                w_out: vec![0.0; HIDDEN_DIM],
                b_out: 0.0,
            },
        }
    }

    fn check_shapes(&self) -> Result<()> {
        for e in &self.emb {
            e.check_shapes()?;
        }
        let t = &self.tail;
        if t.w_hidden.len() != HIDDEN_DIM * FUSED_DIM
            || t.b_hidden.len() != HIDDEN_DIM
            || t.w_out.len() != HIDDEN_DIM
        {
            return Err(Error::Model("tail parameter shapes are wrong".into()));
        }
        Ok(())
    }

    /// Every tensor as a flat list of slices, biases flagged. The order is
    /// fixed; optimizer state and gradients line up index-for-index.
    pub fn flat(&self) -> Vec<(&[f64], bool)> {
        let mut v: Vec<(&[f64], bool)> = Vec::with_capacity(14);
        for e in &self.emb {
            v.push((&e.w1, false));
            v.push((&e.b1, true));
            v.push((&e.w2, false));
            v.push((&e.b2, true));
        }
        v.push((&self.tail.w_hidden, false));
        v.push((&self.tail.b_hidden, true));
        v.push((&self.tail.w_out, false));
        v.push((std::slice::from_ref(&self.tail.b_out), true));
        v
    }

    pub fn flat_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut v: Vec<(&mut [f64], bool)> = Vec::with_capacity(14);
        for e in &mut self.emb {
            v.push((&mut e.w1, false));
            v.push((&mut e.b1, true));
            v.push((&mut e.w2, false));
            v.push((&mut e.b2, true));
        }
        v.push((&mut self.tail.w_hidden, false));
        v.push((&mut self.tail.b_hidden, true));
        v.push((&mut self.tail.w_out, false));
        v.push((std::slice::from_mut(&mut self.tail.b_out), true));
        v
    }

    pub fn param_count(&self) -> usize {
        self.flat().iter().map(|(s, _)| s.len()).sum()
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &NetWeights, scale: f64) {
        for ((dst, _), (src, _)) in self.flat_mut().into_iter().zip(other.flat()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
    }

    pub fn zero_biases(&mut self) {
        for (slice, is_bias) in self.flat_mut() {
            if is_bias {
                slice.fill(0.0);
            }
        }
    }
}

/// Hidden-layer regularization settings used in TRAIN mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    pub hidden_dropout: f64,
    pub noise_sigma: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            hidden_dropout: 0.2,
            noise_sigma: 0.01,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.hidden_dropout) {
            return Err(Error::Config(format!(
                "hidden_dropout must be in [0,1), got {}",
                self.hidden_dropout
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// The full model: weights plus its input-dropout rate and the schema that
/// maps feature slots to the shared embedding sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: NetWeights,
    pub input_dropout: f64,
    /// Strict no-bias mode pins every bias at zero.
    #[serde(default = "default_true")]
    pub use_bias: bool,
    pub schema: FeatureSchema,
}

fn default_true() -> bool {
    true
}

/// Deterministic initialization: weights uniform in
/// ±sqrt(1/fan_in) per layer, biases zero.
pub fn init_params(seed: u64, input_dropout: f64, schema: FeatureSchema) -> Result<ModelParams> {
    if !(0.0..1.0).contains(&input_dropout) {
        return Err(Error::Config(format!(
            "input_dropout must be in [0,1), got {input_dropout}"
        )));
    }
    let mut rng = crate::streams::rng_for(seed, crate::streams::Domain::Init, &[]);
    let mut uniform = |bound: f64| (rng.gen::<f64>() * 2.0 - 1.0) * bound;

    let mut weights = NetWeights::zeros();
    for e in &mut weights.emb {
        let bound1 = 1.0; // fan_in = 1 (scalar input)
        for w in &mut e.w1 {
            *w = uniform(bound1);
        }
        let bound2 = (1.0 / EMB_HIDDEN as f64).sqrt();
        for w in &mut e.w2 {
            *w = uniform(bound2);
        }
    }
    let bound_h = (1.0 / FUSED_DIM as f64).sqrt();
    for w in &mut weights.tail.w_hidden {
        *w = uniform(bound_h);
    }
    let bound_o = (1.0 / HIDDEN_DIM as f64).sqrt();
    for w in &mut weights.tail.w_out {
        *w = uniform(bound_o);
    }
    Ok(ModelParams {
        weights,
        input_dropout,
        use_bias: true,
        schema,
    })
}

// ---------------------------------------------------------------------------
// Regularization draws
// ---------------------------------------------------------------------------

/// All stochastic draws for one TRAIN-mode forward, taken up front in a
/// fixed order. Keeping them explicit makes the loss a deterministic
/// function of the parameters, which is what finite-difference checks need.
#[derive(Debug, Clone)]
pub struct RegDraws {
    /// Per input feature: 0 (dropped) or 1/(1−p_in).
    pub input_keep: Vec<f64>,
    /// 87×16 additive noise on the embedding hidden layer.
    pub emb_noise: Vec<f64>,
    /// 87×16: 0 or 1/(1−p).
    pub emb_keep: Vec<f64>,
    pub hidden_noise: Vec<f64>,
    pub hidden_keep: Vec<f64>,
}

impl RegDraws {
    pub fn draw(rng: &mut ChaCha8Rng, reg: &RegularizerConfig, input_dropout: f64) -> RegDraws {
        let noise = Normal::new(0.0, reg.noise_sigma).expect("validated sigma");
        let keep = |rng: &mut ChaCha8Rng, p: f64| {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                1.0 / (1.0 - p)
            }
        };
        let input_keep = (0..FEATURE_COUNT)
            .map(|_| keep(rng, input_dropout))
            .collect();
        let mut emb_noise = Vec::with_capacity(FEATURE_COUNT * EMB_HIDDEN);
        let mut emb_keep = Vec::with_capacity(FEATURE_COUNT * EMB_HIDDEN);
        for _ in 0..FEATURE_COUNT {
            for _ in 0..EMB_HIDDEN {
                emb_noise.push(noise.sample(rng));
            }
            for _ in 0..EMB_HIDDEN {
                emb_keep.push(keep(rng, reg.hidden_dropout));
            }
        }
        let hidden_noise = (0..HIDDEN_DIM).map(|_| noise.sample(rng)).collect();
        let hidden_keep = (0..HIDDEN_DIM)
            .map(|_| keep(rng, reg.hidden_dropout))
            .collect();
        RegDraws {
            input_keep,
            emb_noise,
            emb_keep,
            hidden_noise,
            hidden_keep,
        }
    }

    /// Draws that make TRAIN-mode forward coincide with EVAL mode.
    pub fn identity() -> RegDraws {
        RegDraws {
            input_keep: vec![1.0; FEATURE_COUNT],
            emb_noise: vec![0.0; FEATURE_COUNT * EMB_HIDDEN],
            emb_keep: vec![1.0; FEATURE_COUNT * EMB_HIDDEN],
            hidden_noise: vec![0.0; HIDDEN_DIM],
            hidden_keep: vec![1.0; HIDDEN_DIM],
        }
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Embed one scalar in EVAL mode: W2·ReLU(W1·x + b1) + b2.
pub fn embed_feature_eval(e: &TypeEmbedding, x: f64, use_bias: bool, out: &mut [f64]) {
    let mut h = [0.0f64; EMB_HIDDEN];
    for j in 0..EMB_HIDDEN {
        let b = if use_bias { e.b1[j] } else { 0.0 };
        h[j] = (e.w1[j] * x + b).max(0.0);
    }
    for (k, o) in out.iter_mut().enumerate().take(EMB_DIM) {
        let row = &e.w2[k * EMB_HIDDEN..(k + 1) * EMB_HIDDEN];
        let mut acc = if use_bias { e.b2[k] } else { 0.0 };
        for j in 0..EMB_HIDDEN {
            acc += row[j] * h[j];
        }
        *o = acc;
    }
}

/// Intermediates of one TRAIN-mode forward, everything backward needs.
pub struct ForwardCache {
    /// Input after inverted input-dropout (87).
    pub x_in: Vec<f64>,
    /// Pre-ReLU embedding activations (87×16); signs gate the ReLU backward.
    pub emb_pre: Vec<f64>,
    /// Embedding hidden layer after ReLU → +noise → dropout (87×16).
    pub emb_reg: Vec<f64>,
    /// Concatenated embeddings (696).
    pub fused: Vec<f64>,
    /// tanh outputs of the fusion layer (256), before regularization.
    pub tanh_out: Vec<f64>,
    /// Fusion hidden layer after +noise → dropout (256).
    pub hidden_reg: Vec<f64>,
    pub prob: f64,
    pub draws: RegDraws,
}

/// TRAIN-mode forward with explicit draws. Deterministic in
/// (params, x, draws).
pub fn forward_with_draws(m: &ModelParams, x: &[f64], draws: RegDraws) -> ForwardCache {
    assert_eq!(x.len(), FEATURE_COUNT, "input must have 87 features");
    debug_assert!(x.iter().all(|v| v.is_finite()), "non-finite input");

    let use_bias = m.use_bias;
    let x_in: Vec<f64> = x
        .iter()
        .zip(&draws.input_keep)
        .map(|(v, k)| v * k)
        .collect();

    let mut emb_pre = vec![0.0; FEATURE_COUNT * EMB_HIDDEN];
    let mut emb_reg = vec![0.0; FEATURE_COUNT * EMB_HIDDEN];
    let mut fused = vec![0.0; FUSED_DIM];
    for f in 0..FEATURE_COUNT {
        let e = &m.weights.emb[m.schema.feature_type(f).index()];
        let pre = &mut emb_pre[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        let reg = &mut emb_reg[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        let noise = &draws.emb_noise[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        let keep = &draws.emb_keep[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        for j in 0..EMB_HIDDEN {
            let b = if use_bias { e.b1[j] } else { 0.0 };
            pre[j] = e.w1[j] * x_in[f] + b;
            reg[j] = (pre[j].max(0.0) + noise[j]) * keep[j];
        }
        let out = &mut fused[f * EMB_DIM..(f + 1) * EMB_DIM];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &e.w2[k * EMB_HIDDEN..(k + 1) * EMB_HIDDEN];
            let mut acc = if use_bias { e.b2[k] } else { 0.0 };
            for j in 0..EMB_HIDDEN {
                acc += row[j] * reg[j];
            }
            *o = acc;
        }
    }

    let mut tanh_out = vec![0.0; HIDDEN_DIM];
    let mut hidden_reg = vec![0.0; HIDDEN_DIM];
    for i in 0..HIDDEN_DIM {
        let row = &m.weights.tail.w_hidden[i * FUSED_DIM..(i + 1) * FUSED_DIM];
        let mut acc = if use_bias { m.weights.tail.b_hidden[i] } else { 0.0 };
        for j in 0..FUSED_DIM {
            acc += row[j] * fused[j];
        }
        tanh_out[i] = acc.tanh();
        hidden_reg[i] = (tanh_out[i] + draws.hidden_noise[i]) * draws.hidden_keep[i];
    }

    let mut logit = if use_bias { m.weights.tail.b_out } else { 0.0 };
    for i in 0..HIDDEN_DIM {
        logit += m.weights.tail.w_out[i] * hidden_reg[i];
    }

    ForwardCache {
        x_in,
        emb_pre,
        emb_reg,
        fused,
        tanh_out,
        hidden_reg,
        prob: sigmoid(logit),
        draws,
    }
}

/// TRAIN-mode forward: draws regularization randomness from `rng`, then
/// defers to [`forward_with_draws`].
pub fn forward_train(
    m: &ModelParams,
    x: &[f64],
    reg: &RegularizerConfig,
    rng: &mut ChaCha8Rng,
) -> ForwardCache {
    forward_with_draws(m, x, RegDraws::draw(rng, reg, m.input_dropout))
}

/// EVAL-mode raw logit: a deterministic pure function, no noise, no dropout,
/// no rescaling.
pub fn eval_logit(m: &ModelParams, x: &[f64]) -> f64 {
    assert_eq!(x.len(), FEATURE_COUNT, "input must have 87 features");
    debug_assert!(x.iter().all(|v| v.is_finite()), "non-finite input");

    let use_bias = m.use_bias;
    let mut fused = vec![0.0; FUSED_DIM];
    for f in 0..FEATURE_COUNT {
        let e = &m.weights.emb[m.schema.feature_type(f).index()];
        embed_feature_eval(e, x[f], use_bias, &mut fused[f * EMB_DIM..(f + 1) * EMB_DIM]);
    }
    let mut logit = if use_bias { m.weights.tail.b_out } else { 0.0 };
    for i in 0..HIDDEN_DIM {
        let row = &m.weights.tail.w_hidden[i * FUSED_DIM..(i + 1) * FUSED_DIM];
        let mut acc = if use_bias { m.weights.tail.b_hidden[i] } else { 0.0 };
        for j in 0..FUSED_DIM {
            acc += row[j] * fused[j];
        }
        logit += m.weights.tail.w_out[i] * acc.tanh();
    }
    logit
}

/// EVAL-mode forward: the sigmoid probability of label 1.
pub fn forward_eval(m: &ModelParams, x: &[f64]) -> f64 {
    sigmoid(eval_logit(m, x))
}

/// EVAL-mode hard prediction; ties at 0.5 go to label 1.
pub fn predict(m: &ModelParams, x: &[f64]) -> u8 {
    if forward_eval(m, x) >= 0.5 {
        1
    } else {
        0
    }
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Exact gradients of binary cross-entropy at the cached forward, with
/// shared embedding gradients summed over all features of each type.
pub fn backward(m: &ModelParams, cache: &ForwardCache, y: u8) -> NetWeights {
    assert!(y <= 1, "label must be 0 or 1");
    assert_eq!(cache.fused.len(), FUSED_DIM, "cache/params mismatch");

    let mut grad = NetWeights::zeros();
    let d_logit = cache.prob - y as f64; // BCE∘sigmoid

    grad.tail.b_out = d_logit;
    let mut d_hidden = vec![0.0; HIDDEN_DIM];
    for i in 0..HIDDEN_DIM {
        grad.tail.w_out[i] = d_logit * cache.hidden_reg[i];
        // dropout scale, then the additive noise passes gradient through
        let d_tanh = d_logit * m.weights.tail.w_out[i] * cache.draws.hidden_keep[i];
        d_hidden[i] = d_tanh * (1.0 - cache.tanh_out[i] * cache.tanh_out[i]);
    }

    let mut d_fused = vec![0.0; FUSED_DIM];
    for i in 0..HIDDEN_DIM {
        let da = d_hidden[i];
        grad.tail.b_hidden[i] = da;
        let w_row = &m.weights.tail.w_hidden[i * FUSED_DIM..(i + 1) * FUSED_DIM];
        let g_row = &mut grad.tail.w_hidden[i * FUSED_DIM..(i + 1) * FUSED_DIM];
        for j in 0..FUSED_DIM {
            g_row[j] = da * cache.fused[j];
            d_fused[j] += da * w_row[j];
        }
    }

    for f in 0..FEATURE_COUNT {
        let t = m.schema.feature_type(f).index();
        let e = &m.weights.emb[t];
        let ge = &mut grad.emb[t];
        let de = &d_fused[f * EMB_DIM..(f + 1) * EMB_DIM];
        let reg = &cache.emb_reg[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        let pre = &cache.emb_pre[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];
        let keep = &cache.draws.emb_keep[f * EMB_HIDDEN..(f + 1) * EMB_HIDDEN];

        let mut d_reg = [0.0f64; EMB_HIDDEN];
        for k in 0..EMB_DIM {
            ge.b2[k] += de[k];
            let w_row = &e.w2[k * EMB_HIDDEN..(k + 1) * EMB_HIDDEN];
            let g_row = &mut ge.w2[k * EMB_HIDDEN..(k + 1) * EMB_HIDDEN];
            for j in 0..EMB_HIDDEN {
                g_row[j] += de[k] * reg[j];
                d_reg[j] += de[k] * w_row[j];
            }
        }
        for j in 0..EMB_HIDDEN {
            let relu_gate = if pre[j] > 0.0 { 1.0 } else { 0.0 };
            let du = d_reg[j] * keep[j] * relu_gate;
            ge.w1[j] += du * cache.x_in[f];
            ge.b1[j] += du;
        }
    }

    if !m.use_bias {
        grad.zero_biases();
    }
    grad
}

// ---------------------------------------------------------------------------
// Serialization ("crnet-v1")
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(flatten)]
    params: ModelParams,
}

impl ModelParams {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let doc = ModelFile {
            format: MODEL_FORMAT.to_string(),
            params: self.clone(),
        };
        serde_json::to_writer(std::io::BufWriter::new(file), &doc)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "{}: unsupported format tag {:?} (expected {MODEL_FORMAT:?})",
                path.display(),
                doc.format
            )));
        }
        doc.params.weights.check_shapes()?;
        if !(0.0..1.0).contains(&doc.params.input_dropout) {
            return Err(Error::Model(format!(
                "input_dropout out of range: {}",
                doc.params.input_dropout
            )));
        }
        Ok(doc.params)
    }
}
