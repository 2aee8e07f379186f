//! Fitting the attention potential to reference energies and forces.
//!
//! The loss is a weighted sum of a per-atom energy term and a per-component
//! force term. For the gradient head the forces are themselves derivatives of
//! the model, so the parameter gradient of the force term is a second-order
//! derivative.

mod data;
mod optim;

pub use data::{fit_offsets, generate_dataset, DatasetConfig, Sample};
pub use optim::{learning_rate, optimizer_step, AdamW, Ema};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad, AdError, Tape, Tensor, Var};
use crate::potential::{Head, ParamVars, Potential, PotentialConfig, PotentialError};
use crate::scanner::ScanError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("the dataset is empty")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Scan(#[from] ScanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L1,
    L2,
}

impl std::str::FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            _ => Err(format!("unknown loss '{s}' (expected l1 or l2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub energy_weight: f64,
    pub force_weight: f64,
    pub loss: LossKind,
    /// Peak learning rate.
    pub lr: f64,
    pub weight_decay: f64,
    /// The warmup starts at `warmup_factor * lr`.
    pub warmup_factor: f64,
    pub warmup_epochs: f64,
    pub ema_decay: f64,
    /// Caps the EMA decay at `(1 + n) / (10 + n)` after `n` updates, so short
    /// runs are not dominated by the initial weights.
    pub ema_warmup: bool,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Start the per-species offsets from a least-squares fit.
    pub fit_offsets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            energy_weight: 1.0,
            force_weight: 2.0,
            loss: LossKind::L1,
            lr: 2e-3,
            weight_decay: 1e-3,
            warmup_factor: 0.2,
            warmup_epochs: 1.0,
            ema_decay: 0.999,
            ema_warmup: true,
            grad_clip: 100.0,
            batch_size: 4,
            epochs: 40,
            seed: 0,
            fit_offsets: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.energy_weight >= 0.0 && self.force_weight >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must lie in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.warmup_factor) || !(self.warmup_epochs >= 0.0) {
            return bad("warmup_factor must lie in [0, 1] and warmup_epochs be >= 0");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        Ok(())
    }
}

fn penalty(x: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::L1 => x.abs(),
        LossKind::L2 => x * x,
    }
}

/// Batch loss from plain numbers: per structure
/// `w_E * pen(dE) / N + w_F * mean_ik pen(dF_ik)`, averaged over the batch.
pub fn loss(
    pred_e: &[f64],
    ref_e: &[f64],
    pred_f: &[Vec<[f64; 3]>],
    ref_f: &[Vec<[f64; 3]>],
    w_e: f64,
    w_f: f64,
    kind: LossKind,
) -> Result<f64, TrainError> {
    let b = pred_e.len();
    if ref_e.len() != b || pred_f.len() != b || ref_f.len() != b {
        return Err(TrainError::Shape("batch sizes differ".into()));
    }
    if b == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = 0.0;
    for i in 0..b {
        let n = ref_f[i].len();
        if pred_f[i].len() != n || n == 0 {
            return Err(TrainError::Shape(format!("structure {i}: force arrays differ in length")));
        }
        let fe: f64 = pred_f[i].iter().flatten().zip(ref_f[i].iter().flatten()).map(|(p, r)| penalty(p - r, kind)).sum();
        total += w_e * penalty(pred_e[i] - ref_e[i], kind) / n as f64 + w_f * fe / (3 * n) as f64;
    }
    Ok(total / b as f64)
}

fn abs_var(x: &Var) -> Result<Var, AdError> {
    let cond: Vec<bool> = x.value().data().iter().map(|&v| v >= 0.0).collect();
    Var::where_(&cond, x.shape(), x, &x.neg()?)
}

fn penalty_var(x: &Var, kind: LossKind) -> Result<Var, AdError> {
    match kind {
        LossKind::L1 => abs_var(x),
        LossKind::L2 => x.square(),
    }
}

/// Single-structure loss recorded on the tape that holds `params`.
pub(crate) fn sample_loss_var(
    model: &Potential,
    params: &ParamVars,
    sample: &Sample,
    cfg: &TrainConfig,
) -> Result<Var, TrainError> {
    let s = &sample.structure;
    let n = s.len();
    let idx = model.species_indices(s.species())?;
    let pos = Tensor::from_rows3(s.positions());
    let (energy, forces) = match model.config.head {
        Head::Gradient => {
            let tape = params.0.values().find_map(|v| v.tape().cloned()).expect("parameters are on a tape");
            let x = tape.var(pos);
            let (e, _) = model.forward(params, &idx, &x, None)?;
            let g = grad(&e, &[&x], true)?.remove(0);
            (e, g.neg()?)
        }
        Head::Direct => {
            let (e, f) = model.forward(params, &idx, &Var::constant(pos), None)?;
            (e, f.expect("direct head returns forces"))
        }
    };
    let de = energy.add_scalar(-sample.energy)?;
    let e_term = penalty_var(&de, cfg.loss)?.scale(cfg.energy_weight / n as f64)?;
    let df = forces.sub(&Var::constant(Tensor::from_rows3(&sample.forces)))?;
    let f_term = penalty_var(&df, cfg.loss)?.mean()?.scale(cfg.force_weight)?;
    Ok(e_term.add(&f_term)?)
}

/// Loss of one structure and its gradient with respect to every parameter.
pub fn sample_gradients(
    model: &Potential,
    sample: &Sample,
    cfg: &TrainConfig,
) -> Result<(f64, BTreeMap<String, Tensor>), TrainError> {
    let tape = Tape::new();
    let params = model.params.on_tape(&tape);
    let l = sample_loss_var(model, &params, sample, cfg)?;
    let names: Vec<&String> = params.0.keys().collect();
    let vars: Vec<&Var> = params.0.values().collect();
    let g = grad(&l, &vars, false)?;
    Ok((l.item(), names.into_iter().cloned().zip(g.into_iter().map(|v| v.value().clone())).collect()))
}

/// Mean loss over `data` without gradients.
pub fn dataset_loss(model: &Potential, data: &[Sample], cfg: &TrainConfig) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let preds: Vec<(f64, Vec<[f64; 3]>)> =
        data.par_iter().map(|s| model.energy_forces(&s.structure)).collect::<Result<_, _>>()?;
    let (pe, pf): (Vec<f64>, Vec<Vec<[f64; 3]>>) = preds.into_iter().unzip();
    let re: Vec<f64> = data.iter().map(|s| s.energy).collect();
    let rf: Vec<Vec<[f64; 3]>> = data.iter().map(|s| s.forces.clone()).collect();
    loss(&pe, &re, &pf, &rf, cfg.energy_weight, cfg.force_weight, cfg.loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate at the last step of the epoch.
    pub lr: f64,
    /// Mean of the batch losses seen during the epoch.
    pub loss: f64,
    /// Mean global gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub raw: Potential,
    pub ema: Potential,
    pub history: Vec<EpochRecord>,
}

impl TrainResult {
    pub fn history_csv(&self) -> String {
        crate::util::csv_string(&self.history)
    }
}

/// Minibatch training. Per-structure gradients inside a batch are computed in
/// parallel and summed in dataset order, so the result depends only on the
/// seeds.
pub fn train(data: &[Sample], pcfg: &PotentialConfig, cfg: &TrainConfig) -> Result<TrainResult, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut model = Potential::new(pcfg.clone())?;
    if cfg.fit_offsets {
        let offsets = fit_offsets(data, pcfg)?;
        model.params.tensors.insert("offsets".into(), Tensor::from_vec(offsets));
    }
    let mut ema = Ema::new(&model.params, cfg.ema_decay, cfg.ema_warmup);
    let mut opt = AdamW::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut norm_sum, mut lr) = (0.0, 0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let per: Vec<(f64, BTreeMap<String, Tensor>)> = batch
                .par_iter()
                .map(|&i| sample_gradients(&model, &data[i], cfg))
                .collect::<Result<_, _>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut total: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (l, g) in per {
                batch_loss += l * scale;
                for (name, t) in g {
                    let acc = total.entry(name).or_insert_with(|| vec![0.0; t.numel()]);
                    for (a, v) in acc.iter_mut().zip(t.data()) {
                        *a += v * scale;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            let grads: BTreeMap<String, Tensor> = total
                .into_iter()
                .map(|(k, v)| {
                    let shape = model.params.tensors[&k].shape().to_vec();
                    Tensor::new(shape, v).map(|t| (k, t))
                })
                .collect::<Result<_, _>>()?;
            lr = learning_rate(cfg, step, steps_per_epoch, total_steps);
            let norm = optimizer_step(&mut opt, &mut model.params, &grads, cfg, step, steps_per_epoch, total_steps)
                .map_err(|e| match e {
                    TrainError::NonFiniteGradient => TrainError::Diverged { epoch },
                    e => e,
                })?;
            ema.update(&model.params);
            step += 1;
            loss_sum += batch_loss;
            norm_sum += norm;
        }
        history.push(EpochRecord {
            epoch,
            lr,
            loss: loss_sum / steps_per_epoch as f64,
            grad_norm: norm_sum / steps_per_epoch as f64,
        });
    }
    let ema_model = Potential::from_parts(pcfg.clone(), ema.shadow().clone())?;
    Ok(TrainResult { raw: model, ema: ema_model, history })
}

/// The smoothness ablations trained identically for the FSD study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Vanilla,
    WeightDecay,
    Smearing,
    Temperature,
    SmearingTemperature,
}

impl Ablation {
    pub const ALL: [Ablation; 5] =
        [Self::Vanilla, Self::WeightDecay, Self::Smearing, Self::Temperature, Self::SmearingTemperature];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::WeightDecay => "weight_decay",
            Self::Smearing => "smearing",
            Self::Temperature => "temperature",
            Self::SmearingTemperature => "smearing_temperature",
        }
    }

    /// Applies the ablation to a base configuration pair. The vanilla model
    /// keeps `weight_decay = 1e-3`, `gamma = 1` and `tau = 1`; every other
    /// variant uses `weight_decay = 5e-2`.
    pub fn apply(self, pcfg: &PotentialConfig, tcfg: &TrainConfig) -> (PotentialConfig, TrainConfig) {
        let (mut p, mut t) = (pcfg.clone(), tcfg.clone());
        p.gamma = 1.0;
        p.tau = 1.0;
        t.weight_decay = 5e-2;
        match self {
            Self::Vanilla => t.weight_decay = 1e-3,
            Self::WeightDecay => {}
            Self::Smearing => p.gamma = 5.0,
            Self::Temperature => p.tau = 10.0,
            Self::SmearingTemperature => {
                p.gamma = 5.0;
                p.tau = 10.0;
            }
        }
        (p, t)
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown ablation '{s}'"))
    }
}
