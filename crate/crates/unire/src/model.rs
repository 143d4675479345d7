//! Toy embedding encoder, head/tail MLPs and the biaffine cell scorer,
//! with a fully analytic backward pass.
//!
//! The scorer follows `Biaff(h1, h2) = h1' U1 h2 + U2 (h1 ⊕ h2) + b`,
//! evaluated at `g[i][j] = Biaff(MLP_head(h_i), MLP_tail(h_j))` for every
//! ordered token pair. Parameters live in one flat `f64` buffer described
//! by a [`Layout`]; gradients, optimizer moments and checkpoints reuse the
//! same flat representation.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Result, UnireError};
use crate::label::ProbTensor;

/// Reserved token ids in every vocabulary.
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Training hyper-parameters. Defaults mirror the reference setup: hidden
/// size 150, logit dropout 0.2, AdamW at 5e-5 with weight decay 1e-5 and
/// `beta1 = beta2 = 0.9`, linear warmup over the first 20% of steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d: usize,
    pub d_emb: usize,
    pub mlp_depth: usize,
    pub logit_dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub use_symmetry_loss: bool,
    pub use_implication_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 150,
            d_emb: 32,
            mlp_depth: 1,
            logit_dropout_rate: 0.2,
            learning_rate: 5e-5,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.9,
            warmup_ratio: 0.2,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            use_symmetry_loss: true,
            use_implication_loss: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.logit_dropout_rate) {
            return Err(UnireError::InvalidArgument(format!(
                "logit dropout rate must be in [0, 1), got {}",
                self.logit_dropout_rate
            )));
        }
        if self.learning_rate <= 0.0 || self.d == 0 || self.d_emb == 0 || self.mlp_depth == 0 {
            return Err(UnireError::InvalidArgument("rates and sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Shapes of every parameter block, in checkpoint order: embeddings, head
/// MLP layers, tail MLP layers, U1, U2, b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub vocab: usize,
    pub d_emb: usize,
    pub d: usize,
    pub num_labels: usize,
    pub mlp_depth: usize,
}

impl Layout {
    fn mlp_layer_dims(&self, layer: usize) -> (usize, usize) {
        let input = if layer == 0 { self.d_emb } else { self.d };
        (input, self.d)
    }

    fn mlp_len(&self) -> usize {
        (0..self.mlp_depth)
            .map(|l| {
                let (i, o) = self.mlp_layer_dims(l);
                i * o + o
            })
            .sum()
    }

    pub fn embeddings_range(&self) -> std::ops::Range<usize> {
        0..self.vocab * self.d_emb
    }

    /// Offset of MLP layer `layer` of the head (`which = 0`) or tail
    /// (`which = 1`) stack; returns `(w_offset, b_offset, input, output)`.
    fn mlp_layer(&self, which: usize, layer: usize) -> (usize, usize, usize, usize) {
        let mut off = self.vocab * self.d_emb + which * self.mlp_len();
        for l in 0..layer {
            let (i, o) = self.mlp_layer_dims(l);
            off += i * o + o;
        }
        let (i, o) = self.mlp_layer_dims(layer);
        (off, off + i * o, i, o)
    }

    pub fn u1_offset(&self) -> usize {
        self.vocab * self.d_emb + 2 * self.mlp_len()
    }

    pub fn u2_offset(&self) -> usize {
        self.u1_offset() + self.num_labels * self.d * self.d
    }

    pub fn bias_offset(&self) -> usize {
        self.u2_offset() + self.num_labels * 2 * self.d
    }

    pub fn total_len(&self) -> usize {
        self.bias_offset() + self.num_labels
    }
}

/// All trainable parameters in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(layout: Layout) -> Self {
        ModelParams { data: vec![0.0; layout.total_len()], layout }
    }

    /// Fan-in-scaled uniform init for embeddings and MLP weights; the
    /// biaffine blocks (U1, U2, b) start at zero so the initial table is
    /// uniform after softmax.
    pub fn init<R: Rng>(layout: Layout, rng: &mut R) -> Self {
        let mut params = Self::zeros(layout);
        let emb_scale = 1.0 / (layout.d_emb as f64).sqrt();
        for v in &mut params.data[layout.embeddings_range()] {
            *v = rng.gen_range(-emb_scale..emb_scale);
        }
        for which in 0..2 {
            for layer in 0..layout.mlp_depth {
                let (w_off, b_off, input, output) = layout.mlp_layer(which, layer);
                let scale = 1.0 / (input as f64).sqrt();
                for k in 0..input * output {
                    params.data[w_off + k] = rng.gen_range(-scale..scale);
                }
                for k in 0..output {
                    params.data[b_off + k] = 0.0;
                }
            }
        }
        params
    }

    /// Embedding lookup for a token-id sequence; out-of-vocab ids fall
    /// back to `UNK_ID`.
    pub fn encode(&self, tokens: &[usize]) -> Vec<Vec<f64>> {
        tokens
            .iter()
            .map(|&id| {
                let id = if id < self.layout.vocab { id } else { UNK_ID };
                let base = id * self.layout.d_emb;
                self.data[base..base + self.layout.d_emb].to_vec()
            })
            .collect()
    }
}

/// Exact Gaussian-CDF GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// d/dx of exact GELU: `Phi(x) + x * phi(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)) + x * phi
}

/// Logit dropout setting for one forward pass.
pub enum Dropout<'a, R: Rng> {
    Off,
    On { rate: f64, rng: &'a mut R },
}

/// Per-cell logits plus the dropout mask used to produce them.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub size: usize,
    pub labels: usize,
    /// Undropped logits, `(i * |s| + j) * |Y| + t`.
    pub logits: Vec<f64>,
    /// Scale factors per logit: `1/(1-p)` for survivors, `0` for dropped.
    /// `None` when dropout is off.
    pub dropout_mask: Option<Vec<f64>>,
}

impl ScoreTable {
    /// Logits after applying the dropout mask (identical to `logits` when
    /// dropout is off).
    pub fn dropped_logits(&self) -> Vec<f64> {
        match &self.dropout_mask {
            None => self.logits.clone(),
            Some(mask) => self.logits.iter().zip(mask).map(|(g, m)| g * m).collect(),
        }
    }
}

/// Cached activations from one forward pass, consumed by `backward`.
pub struct ForwardCache {
    pub tokens: Vec<usize>,
    /// Embedding outputs, `|s| x d_emb`.
    embedded: Vec<Vec<f64>>,
    /// Per MLP stack: pre-activations then activations per layer.
    head_pre: Vec<Vec<Vec<f64>>>,
    head_act: Vec<Vec<Vec<f64>>>,
    tail_pre: Vec<Vec<Vec<f64>>>,
    tail_act: Vec<Vec<Vec<f64>>>,
    pub scores: ScoreTable,
}

impl ForwardCache {
    pub fn head(&self, i: usize) -> &[f64] {
        &self.head_act.last().unwrap()[i]
    }

    pub fn tail(&self, j: usize) -> &[f64] {
        &self.tail_act.last().unwrap()[j]
    }
}

fn check_finite(values: &[f64], location: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(UnireError::Numeric {
            location: location.to_string(),
            message: "non-finite value".into(),
        });
    }
    Ok(())
}

/// Runs the MLP stack, returning (pre-activations, activations) per layer.
fn run_mlp(
    params: &ModelParams,
    which: usize,
    inputs: &[Vec<f64>],
) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
    let layout = &params.layout;
    let mut pre = Vec::with_capacity(layout.mlp_depth);
    let mut act = Vec::with_capacity(layout.mlp_depth);
    let mut current: Vec<Vec<f64>> = inputs.to_vec();
    for layer in 0..layout.mlp_depth {
        let (w_off, b_off, input, output) = layout.mlp_layer(which, layer);
        let mut layer_pre = Vec::with_capacity(current.len());
        let mut layer_act = Vec::with_capacity(current.len());
        for x in &current {
            let mut z = vec![0.0; output];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = w_off + o * input;
                let mut acc = params.data[b_off + o];
                for k in 0..input {
                    acc += params.data[row + k] * x[k];
                }
                *zo = acc;
            }
            let a: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
            layer_pre.push(z);
            layer_act.push(a);
        }
        current = layer_act.clone();
        pre.push(layer_pre);
        act.push(layer_act);
    }
    (pre, act)
}

/// Full forward pass: encode, project, score every ordered pair, and
/// optionally apply inverted logit dropout (mask recorded for backprop).
pub fn forward<R: Rng>(
    params: &ModelParams,
    tokens: &[usize],
    dropout: Dropout<'_, R>,
) -> Result<ForwardCache> {
    if tokens.is_empty() {
        return Err(UnireError::InvalidArgument("empty token sequence".into()));
    }
    let layout = &params.layout;
    let n = tokens.len();
    let y = layout.num_labels;
    let d = layout.d;
    let embedded = params.encode(tokens);
    let (head_pre, head_act) = run_mlp(params, 0, &embedded);
    let (tail_pre, tail_act) = run_mlp(params, 1, &embedded);
    let heads = head_act.last().unwrap();
    let tails = tail_act.last().unwrap();

    // u1_tail[t][j] = U1[t] . tail_j, so g1[i][j][t] = head_i . u1_tail[t][j].
    let u1 = &params.data[layout.u1_offset()..layout.u2_offset()];
    let u2 = &params.data[layout.u2_offset()..layout.bias_offset()];
    let bias = &params.data[layout.bias_offset()..];
    let mut u1_tail = vec![0.0; y * n * d];
    for t in 0..y {
        let block = &u1[t * d * d..(t + 1) * d * d];
        for j in 0..n {
            let out = &mut u1_tail[(t * n + j) * d..(t * n + j + 1) * d];
            for a in 0..d {
                let row = &block[a * d..(a + 1) * d];
                let mut acc = 0.0;
                for b in 0..d {
                    acc += row[b] * tails[j][b];
                }
                out[a] = acc;
            }
        }
    }
    // u2_head[t][i] / u2_tail[t][j]: the linear term split at the
    // concatenation boundary (head half first).
    let mut logits = vec![0.0; n * n * y];
    for t in 0..y {
        let u2h = &u2[t * 2 * d..t * 2 * d + d];
        let u2t = &u2[t * 2 * d + d..(t + 1) * 2 * d];
        let head_lin: Vec<f64> = (0..n)
            .map(|i| (0..d).map(|a| u2h[a] * heads[i][a]).sum::<f64>())
            .collect();
        let tail_lin: Vec<f64> = (0..n)
            .map(|j| (0..d).map(|b| u2t[b] * tails[j][b]).sum::<f64>())
            .collect();
        for i in 0..n {
            for j in 0..n {
                let block = &u1_tail[(t * n + j) * d..(t * n + j + 1) * d];
                let mut bilinear = 0.0;
                for a in 0..d {
                    bilinear += heads[i][a] * block[a];
                }
                logits[(i * n + j) * y + t] = bilinear + head_lin[i] + tail_lin[j] + bias[t];
            }
        }
    }
    check_finite(&logits, "biaffine logits")?;

    let dropout_mask = match dropout {
        Dropout::Off => None,
        Dropout::On { rate, rng } => {
            if rate == 0.0 {
                None
            } else {
                let keep_scale = 1.0 / (1.0 - rate);
                Some(
                    (0..logits.len())
                        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
                        .collect(),
                )
            }
        }
    };

    Ok(ForwardCache {
        tokens: tokens.to_vec(),
        embedded,
        head_pre,
        head_act,
        tail_pre,
        tail_act,
        scores: ScoreTable { size: n, labels: y, logits, dropout_mask },
    })
}

/// Numerically stabilized per-cell softmax of a logits buffer.
pub fn softmax_cells_raw(size: usize, labels: usize, logits: &[f64]) -> ProbTensor {
    let mut values = vec![0.0; logits.len()];
    for cell in 0..size * size {
        let g = &logits[cell * labels..(cell + 1) * labels];
        let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for t in 0..labels {
            let e = (g[t] - max).exp();
            values[cell * labels + t] = e;
            sum += e;
        }
        for t in 0..labels {
            values[cell * labels + t] /= sum;
        }
    }
    ProbTensor::from_values(size, labels, values).unwrap()
}

/// Softmax of the undropped logits (the clean tensor used by the
/// structural losses and at inference).
pub fn softmax_cells(scores: &ScoreTable) -> ProbTensor {
    softmax_cells_raw(scores.size, scores.labels, &scores.logits)
}

/// Softmax of the dropout-masked logits (used by the entry loss during
/// training).
pub fn softmax_cells_dropped(scores: &ScoreTable) -> ProbTensor {
    softmax_cells_raw(scores.size, scores.labels, &scores.dropped_logits())
}

/// Pulls a gradient w.r.t. per-cell probabilities back to logits through
/// the softmax Jacobian: `dg_t = p_t * (dp_t - sum_u p_u dp_u)`.
pub fn softmax_backward(p: &ProbTensor, d_prob: &[f64]) -> Vec<f64> {
    let labels = p.labels();
    let n = p.size();
    let mut d_logits = vec![0.0; d_prob.len()];
    for cell in 0..n * n {
        let probs = &p.values()[cell * labels..(cell + 1) * labels];
        let dp = &d_prob[cell * labels..(cell + 1) * labels];
        let dot: f64 = probs.iter().zip(dp).map(|(p, d)| p * d).sum();
        for t in 0..labels {
            d_logits[cell * labels + t] = probs[t] * (dp[t] - dot);
        }
    }
    d_logits
}

/// Backward pass from a gradient w.r.t. the undropped logits down to every
/// parameter. Gradients that came through the dropped path must already be
/// mask-scaled (see [`apply_dropout_mask`]).
pub fn backward(params: &ModelParams, cache: &ForwardCache, d_logits: &[f64]) -> Vec<f64> {
    let layout = &params.layout;
    let n = cache.scores.size;
    let y = layout.num_labels;
    let d = layout.d;
    assert_eq!(d_logits.len(), n * n * y, "gradient shape mismatch");
    let mut grads = vec![0.0; layout.total_len()];
    let heads = cache.head_act.last().unwrap();
    let tails = cache.tail_act.last().unwrap();
    let u1 = &params.data[layout.u1_offset()..layout.u2_offset()];
    let u2 = &params.data[layout.u2_offset()..layout.bias_offset()];

    let mut d_head = vec![vec![0.0; d]; n];
    let mut d_tail = vec![vec![0.0; d]; n];

    for t in 0..y {
        let block = &u1[t * d * d..(t + 1) * d * d];
        // Forward intermediates for this label.
        let mut u1_tail = vec![0.0; n * d]; // U1[t] tail_j
        let mut u1t_head = vec![0.0; n * d]; // U1[t]' head_i
        for j in 0..n {
            for a in 0..d {
                let row = &block[a * d..(a + 1) * d];
                let mut acc = 0.0;
                for b in 0..d {
                    acc += row[b] * tails[j][b];
                }
                u1_tail[j * d + a] = acc;
            }
        }
        for i in 0..n {
            for b in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    acc += block[a * d + b] * heads[i][a];
                }
                u1t_head[i * d + b] = acc;
            }
        }

        // Row/column sums of the per-pair gradient for this label.
        let mut row_sum = vec![0.0; n]; // sum_j dg[i][j][t]
        let mut col_sum = vec![0.0; n]; // sum_i dg[i][j][t]
        for i in 0..n {
            for j in 0..n {
                let g = d_logits[(i * n + j) * y + t];
                row_sum[i] += g;
                col_sum[j] += g;
            }
        }

        // Bias gradient.
        grads[layout.bias_offset() + t] = row_sum.iter().sum();

        // U2 gradient and linear-term backprop.
        let u2h = &u2[t * 2 * d..t * 2 * d + d];
        let u2t = &u2[t * 2 * d + d..(t + 1) * 2 * d];
        {
            let du2 = &mut grads[layout.u2_offset() + t * 2 * d..layout.u2_offset() + (t + 1) * 2 * d];
            for i in 0..n {
                for a in 0..d {
                    du2[a] += row_sum[i] * heads[i][a];
                }
            }
            for j in 0..n {
                for b in 0..d {
                    du2[d + b] += col_sum[j] * tails[j][b];
                }
            }
        }
        for i in 0..n {
            for a in 0..d {
                d_head[i][a] += row_sum[i] * u2h[a];
            }
        }
        for j in 0..n {
            for b in 0..d {
                d_tail[j][b] += col_sum[j] * u2t[b];
            }
        }

        // Bilinear term: dU1[t] = Head' A Tail with A the n x n gradient
        // matrix; d_head += A (U1 tail); d_tail += A' (U1' head).
        let mut a_tail = vec![0.0; n * d]; // (A Tail)_i = sum_j A[i][j] tail_j
        for i in 0..n {
            for j in 0..n {
                let g = d_logits[(i * n + j) * y + t];
                if g == 0.0 {
                    continue;
                }
                for b in 0..d {
                    a_tail[i * d + b] += g * tails[j][b];
                }
                for a in 0..d {
                    d_head[i][a] += g * u1_tail[j * d + a];
                }
                for b in 0..d {
                    d_tail[j][b] += g * u1t_head[i * d + b];
                }
            }
        }
        let du1 = &mut grads[layout.u1_offset() + t * d * d..layout.u1_offset() + (t + 1) * d * d];
        for i in 0..n {
            for a in 0..d {
                let h = heads[i][a];
                if h == 0.0 {
                    continue;
                }
                for b in 0..d {
                    du1[a * d + b] += h * a_tail[i * d + b];
                }
            }
        }
    }

    // Back through the two MLP stacks into the embeddings.
    let mut d_emb = vec![vec![0.0; layout.d_emb]; n];
    mlp_backward(params, 0, &cache.embedded, &cache.head_pre, &cache.head_act, d_head, &mut grads, &mut d_emb);
    mlp_backward(params, 1, &cache.embedded, &cache.tail_pre, &cache.tail_act, d_tail, &mut grads, &mut d_emb);
    for (pos, &tok) in cache.tokens.iter().enumerate() {
        let tok = if tok < layout.vocab { tok } else { UNK_ID };
        let base = tok * layout.d_emb;
        for k in 0..layout.d_emb {
            grads[base + k] += d_emb[pos][k];
        }
    }
    grads
}

#[allow(clippy::too_many_arguments)]
fn mlp_backward(
    params: &ModelParams,
    which: usize,
    embedded: &[Vec<f64>],
    pre: &[Vec<Vec<f64>>],
    act: &[Vec<Vec<f64>>],
    d_out: Vec<Vec<f64>>,
    grads: &mut [f64],
    d_emb: &mut [Vec<f64>],
) {
    let layout = &params.layout;
    let n = embedded.len();
    let mut d_act = d_out;
    for layer in (0..layout.mlp_depth).rev() {
        let (w_off, b_off, input, output) = layout.mlp_layer(which, layer);
        let layer_input: &[Vec<f64>] = if layer == 0 { embedded } else { &act[layer - 1] };
        let mut d_in = vec![vec![0.0; input]; n];
        for pos in 0..n {
            for o in 0..output {
                let dz = d_act[pos][o] * gelu_grad(pre[layer][pos][o]);
                if dz == 0.0 {
                    continue;
                }
                grads[b_off + o] += dz;
                let row = w_off + o * input;
                for k in 0..input {
                    grads[row + k] += dz * layer_input[pos][k];
                    d_in[pos][k] += dz * params.data[row + k];
                }
            }
        }
        d_act = d_in;
    }
    for pos in 0..n {
        for k in 0..layout.d_emb {
            d_emb[pos][k] += d_act[pos][k];
        }
    }
}

/// Scales a gradient w.r.t. dropped logits back through the dropout mask.
pub fn apply_dropout_mask(scores: &ScoreTable, d_dropped: &mut [f64]) {
    if let Some(mask) = &scores.dropout_mask {
        for (g, m) in d_dropped.iter_mut().zip(mask) {
            *g *= m;
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"UNIRE1";

/// Writes a checkpoint: magic `UNIRE1`, five little-endian u32 dimensions
/// (vocab, d_emb, d, |Y|, MLP depth), then every parameter as a
/// little-endian f64 in layout order.
pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let l = &params.layout;
    for dim in [l.vocab, l.d_emb, l.d, l.num_labels, l.mlp_depth] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    for v in &params.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(UnireError::Format {
            path: "<checkpoint>".into(),
            message: "bad magic bytes".into(),
        });
    }
    let mut dims = [0usize; 5];
    for dim in &mut dims {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *dim = u32::from_le_bytes(buf) as usize;
    }
    let layout = Layout {
        vocab: dims[0],
        d_emb: dims[1],
        d: dims[2],
        num_labels: dims[3],
        mlp_depth: dims[4],
    };
    let mut data = vec![0.0; layout.total_len()];
    for v in &mut data {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(ModelParams { layout, data })
}
