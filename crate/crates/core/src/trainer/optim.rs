use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{TrainConfig, TrainError};
use crate::autodiff::Tensor;
use crate::potential::{is_decayed, Parameters};

/// Linear warmup from `warmup_factor * lr` over the warmup epochs, then a
/// cosine decay to zero at `total_steps`.
pub fn learning_rate(cfg: &TrainConfig, step: usize, steps_per_epoch: usize, total_steps: usize) -> f64 {
    let warm = (cfg.warmup_epochs * steps_per_epoch as f64).round() as usize;
    if step < warm {
        let s = step as f64 / warm as f64;
        return cfg.lr * (cfg.warmup_factor + (1.0 - cfg.warmup_factor) * s);
    }
    if total_steps <= warm {
        return cfg.lr;
    }
    let s = ((step - warm) as f64 / (total_steps - warm) as f64).min(1.0);
    cfg.lr * 0.5 * (1.0 + (PI * s).cos())
}

/// Adaptive moment estimation with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
    t: i32,
}

impl Default for AdamW {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: BTreeMap::new(), v: BTreeMap::new(), t: 0 }
    }
}

impl AdamW {
    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.m.get(name).map(Vec::as_slice)
    }

    /// One update. Gradients are rescaled to global norm `clip` when larger.
    /// Weight decay multiplies decayed arrays by `1 - lr * weight_decay`
    /// before the moment update and never enters the moments. Returns the
    /// global gradient norm before clipping.
    pub fn step(
        &mut self,
        params: &mut Parameters,
        grads: &BTreeMap<String, Tensor>,
        lr: f64,
        weight_decay: f64,
        clip: f64,
    ) -> Result<f64, TrainError> {
        let norm = grads.values().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(TrainError::NonFiniteGradient);
        }
        let scale = if norm > clip { clip / norm } else { 1.0 };
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (name, p) in params.tensors.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            if g.shape() != p.shape() {
                return Err(TrainError::Shape(format!("gradient for '{name}' has shape {:?}", g.shape())));
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; g.numel()]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; g.numel()]);
            let decay = if is_decayed(name) { 1.0 - lr * weight_decay } else { 1.0 };
            let mut data = p.data().to_vec();
            for (i, x) in data.iter_mut().enumerate() {
                let gi = g.data()[i] * scale;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                *x = *x * decay - lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
            *p = Tensor::new(p.shape().to_vec(), data)?;
        }
        Ok(norm)
    }
}

/// Scheduled [`AdamW::step`]: the learning rate for `step_index` comes from
/// [`learning_rate`].
pub fn optimizer_step(
    opt: &mut AdamW,
    params: &mut Parameters,
    grads: &BTreeMap<String, Tensor>,
    cfg: &TrainConfig,
    step_index: usize,
    steps_per_epoch: usize,
    total_steps: usize,
) -> Result<f64, TrainError> {
    let lr = learning_rate(cfg, step_index, steps_per_epoch, total_steps);
    opt.step(params, grads, lr, cfg.weight_decay, cfg.grad_clip)
}

/// Exponential moving average of the parameters.
#[derive(Debug, Clone)]
pub struct Ema {
    shadow: Parameters,
    decay: f64,
    warmup: bool,
    updates: u64,
}

impl Ema {
    pub fn new(params: &Parameters, decay: f64, warmup: bool) -> Self {
        Self { shadow: params.clone(), decay, warmup, updates: 0 }
    }

    /// Decay used by the next update.
    pub fn current_decay(&self) -> f64 {
        if self.warmup {
            let n = self.updates as f64;
            self.decay.min((1.0 + n) / (10.0 + n))
        } else {
            self.decay
        }
    }

    pub fn update(&mut self, params: &Parameters) {
        let d = self.current_decay();
        for (name, s) in self.shadow.tensors.iter_mut() {
            let p = &params.tensors[name];
            let data: Vec<f64> = s.data().iter().zip(p.data()).map(|(a, b)| d * a + (1.0 - d) * b).collect();
            *s = Tensor::new(s.shape().to_vec(), data).expect("same shape");
        }
        self.updates += 1;
    }

    pub fn shadow(&self) -> &Parameters {
        &self.shadow
    }
}
