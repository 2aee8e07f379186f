use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Head, PotentialConfig, PotentialError};
use crate::autodiff::{Tape, Tensor, Var};

/// Named weight arrays of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub tensors: BTreeMap<String, Tensor>,
}

/// Expected `(name, shape)` list for a configuration, in a fixed order.
pub fn parameter_shapes(c: &PotentialConfig) -> Vec<(String, Vec<usize>)> {
    let d = c.embed_dim;
    let h = d * c.hidden_factor;
    let s = c.species.len();
    let mut out = vec![
        ("offsets".to_string(), vec![s]),
        ("src_embed".into(), vec![s, d]),
        ("dst_embed".into(), vec![s, d]),
        ("radial_w".into(), vec![c.n_radial, d]),
        ("angular_w".into(), vec![c.n_angular(), d]),
        ("input_b".into(), vec![d]),
    ];
    for l in 0..c.n_layers {
        let p = |n: &str| format!("layer{l}.{n}");
        out.extend([
            (p("ln1.gain"), vec![d]),
            (p("ln1.bias"), vec![d]),
            (p("q_w"), vec![d, d]),
            (p("k_w"), vec![d, d]),
            (p("v_w"), vec![d, d]),
            (p("o_w"), vec![d, d]),
            (p("ln2.gain"), vec![d]),
            (p("ln2.bias"), vec![d]),
            (p("ff1_w"), vec![d, h]),
            (p("ff1_b"), vec![h]),
            (p("ff2_w"), vec![h, d]),
            (p("ff2_b"), vec![d]),
        ]);
    }
    out.extend([
        ("out_ln.gain".to_string(), vec![d]),
        ("out_ln.bias".into(), vec![d]),
        ("energy1_w".into(), vec![d, d]),
        ("energy1_b".into(), vec![d]),
        ("energy2_w".into(), vec![d, 1]),
        ("energy2_b".into(), vec![1]),
    ]);
    if c.head == Head::Direct {
        out.extend([
            ("force1_w".to_string(), vec![d, d]),
            ("force1_b".into(), vec![d]),
            ("force2_w".into(), vec![d, 1]),
            ("force2_b".into(), vec![1]),
        ]);
    }
    out
}

/// Weight matrices are decayed; gains, biases, embeddings and offsets are not.
pub fn is_decayed(name: &str) -> bool {
    name.ends_with("_w")
}

impl Parameters {
    /// Random initialization: normal weights with variance `1/fan_in`, zero
    /// biases and offsets, unit gains.
    pub fn init(c: &PotentialConfig) -> Result<Self, PotentialError> {
        c.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(c.init_seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in parameter_shapes(c) {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".gain") {
                vec![1.0; n]
            } else if name.ends_with("_b") || name.ends_with(".bias") || name == "offsets" {
                vec![0.0; n]
            } else {
                let std = if name.ends_with("_embed") { 1.0 } else { 1.0 / (shape[0] as f64).sqrt() };
                let dist = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            };
            tensors.insert(name, Tensor::new(shape, data)?);
        }
        Ok(Self { tensors })
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[name]
    }

    pub fn n_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Checks names, shapes and finiteness against `c`.
    pub fn check(&self, c: &PotentialConfig) -> Result<(), PotentialError> {
        let expected = parameter_shapes(c);
        if expected.len() != self.tensors.len() {
            return Err(PotentialError::Shape(format!(
                "expected {} parameter arrays, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (name, shape) in expected {
            match self.tensors.get(&name) {
                None => return Err(PotentialError::Shape(format!("missing parameter '{name}'"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(PotentialError::Shape(format!(
                        "parameter '{name}' has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                Some(t) if !t.is_finite() => return Err(PotentialError::NonFinite(format!("parameter '{name}'"))),
                _ => {}
            }
        }
        Ok(())
    }

    /// Every array as a constant.
    pub fn constants(&self) -> ParamVars {
        ParamVars(self.tensors.iter().map(|(k, v)| (k.clone(), Var::constant(v.clone()))).collect())
    }

    /// Every array as a differentiable leaf on `tape`.
    pub fn on_tape(&self, tape: &Tape) -> ParamVars {
        ParamVars(self.tensors.iter().map(|(k, v)| (k.clone(), tape.var(v.clone()))).collect())
    }
}

/// Parameters lifted to [`Var`]s for one evaluation.
#[derive(Debug, Clone)]
pub struct ParamVars(pub BTreeMap<String, Var>);

impl ParamVars {
    pub fn get(&self, name: &str) -> &Var {
        &self.0[name]
    }
}
