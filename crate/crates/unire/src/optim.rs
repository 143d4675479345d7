//! AdamW with decoupled weight decay and a linear warmup/decay schedule.

use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, TrainConfig};

/// Moment accumulators plus schedule state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
    pub total_steps: usize,
}

impl OptimizerState {
    pub fn new(num_params: usize, total_steps: usize) -> Self {
        OptimizerState { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0, total_steps }
    }
}

/// Learning-rate multiplier at a given step: linear ramp from 0 over the
/// warmup phase, then linear decay to 0 at `total_steps`. Steps past the
/// end clamp at 0.
pub fn schedule_factor(step: usize, total_steps: usize, warmup_ratio: f64) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    let warmup = (warmup_ratio * total_steps as f64).round() as usize;
    if step < warmup {
        step as f64 / warmup as f64
    } else if step >= total_steps {
        0.0
    } else {
        (total_steps - step) as f64 / (total_steps - warmup).max(1) as f64
    }
}

const ADAM_EPS: f64 = 1e-8;

/// One AdamW step. Weight decay is applied directly to the weights
/// (scaled by the scheduled rate), not through the moments; the PAD
/// embedding row is exempt from decay.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &[f64],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) {
    assert_eq!(grads.len(), params.data.len(), "gradient shape mismatch");
    let lr = cfg.learning_rate * schedule_factor(state.step, state.total_steps, cfg.warmup_ratio);
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let pad_range = 0..params.layout.d_emb; // embedding row of PAD_ID
    for (k, theta) in params.data.iter_mut().enumerate() {
        if !pad_range.contains(&k) {
            *theta *= 1.0 - lr * cfg.weight_decay;
        }
        let g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / bc1;
        let v_hat = state.v[k] / bc2;
        *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}
