//! Scaled dot-product attention with a temperature, in a dense reference form
//! and in the grouped, taped form the model uses.

use std::rc::Rc;

use crate::autodiff::{AdError, Tensor, Var};

/// `softmax(z / tau)`; entries equal to `-inf` get weight 0, and an all-masked
/// row returns all zeros.
pub fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|&z| ((z - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `d softmax(z/tau)_i / d z_j = p_i (delta_ij - p_j) / tau`.
pub fn softmax_jacobian(logits: &[f64], tau: f64) -> Vec<Vec<f64>> {
    let p = softmax(logits, tau);
    (0..p.len())
        .map(|i| (0..p.len()).map(|j| p[i] * (f64::from(u8::from(i == j)) - p[j]) / tau).collect())
        .collect()
}

/// Largest absolute Jacobian entry.
pub fn softmax_jacobian_max_norm(logits: &[f64], tau: f64) -> f64 {
    softmax_jacobian(logits, tau).iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// `softmax(Q K^T / (tau sqrt(d_k)) + bias) V` for row-major `Q [nq][d_k]`,
/// `K [nk][d_k]`, `V [nk][d_v]` and `bias [nq][nk]`. Masked keys carry a bias
/// of `-inf`.
pub fn attention(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    tau: f64,
    logit_bias: Option<&[Vec<f64>]>,
) -> Vec<Vec<f64>> {
    assert!(tau > 0.0, "temperature must be positive");
    assert_eq!(k.len(), v.len(), "one value row per key");
    let dk = q.first().map_or(1, Vec::len).max(1) as f64;
    let dv = v.first().map_or(0, Vec::len);
    q.iter()
        .enumerate()
        .map(|(i, qi)| {
            let logits: Vec<f64> = k
                .iter()
                .enumerate()
                .map(|(j, kj)| {
                    let b = logit_bias.map_or(0.0, |b| b[i][j]);
                    if b == f64::NEG_INFINITY {
                        return b;
                    }
                    qi.iter().zip(kj).map(|(a, c)| a * c).sum::<f64>() / (tau * dk.sqrt()) + b
                })
                .collect();
            // the temperature is already inside the logits
            let w = softmax(&logits, 1.0);
            let mut out = vec![0.0; dv];
            for (wj, vj) in w.iter().zip(v) {
                for (o, x) in out.iter_mut().zip(vj) {
                    *o += wj * x;
                }
            }
            out
        })
        .collect()
}

/// Edges grouped into attention windows, as a flat list of every ordered
/// `(query, key)` pair that shares a window.
#[derive(Debug, Clone)]
pub(crate) struct PairList {
    pub query: Rc<Vec<usize>>,
    pub key: Rc<Vec<usize>>,
}

impl PairList {
    /// Windows are the sets of items with equal `group[item]`.
    pub fn from_groups(group: &[usize], n_groups: usize) -> Self {
        let mut members = vec![Vec::new(); n_groups];
        for (e, &g) in group.iter().enumerate() {
            members[g].push(e);
        }
        let (mut query, mut key) = (Vec::new(), Vec::new());
        for m in &members {
            for &a in m {
                for &b in m {
                    query.push(a);
                    key.push(b);
                }
            }
        }
        Self { query: Rc::new(query), key: Rc::new(key) }
    }
}

/// Windows padded to the largest group size; `None` marks a masked slot.
pub fn padded_windows(group: &[usize], n_groups: usize) -> (usize, Vec<Option<usize>>) {
    let mut members = vec![Vec::new(); n_groups];
    for (e, &g) in group.iter().enumerate() {
        members[g].push(e);
    }
    let width = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut slots = vec![None; n_groups * width];
    for (g, m) in members.iter().enumerate() {
        for (s, &e) in m.iter().enumerate() {
            slots[g * width + s] = Some(e);
        }
    }
    (width, slots)
}

/// Multi-head attention inside windows. `q`, `k`, `v` are `[E, D]`;
/// `key_log_weight` (`[E]`) is added to the logit of every pair by its key.
/// Returns the output and the `[P, n_heads]` attention weights.
pub(crate) fn window_attention(
    q: &Var,
    k: &Var,
    v: &Var,
    pairs: &PairList,
    n_heads: usize,
    tau: f64,
    key_log_weight: Option<&Var>,
    value_weight: Option<&Var>,
) -> Result<(Var, Var), AdError> {
    let (e, d) = (q.shape()[0], q.shape()[1]);
    let dh = d / n_heads;
    let p = pairs.query.len();
    let qp = q.gather(pairs.query.clone())?.reshape(&[p, n_heads, dh])?;
    let kp = k.gather(pairs.key.clone())?.reshape(&[p, n_heads, dh])?;
    let mut logits = qp.mul(&kp)?.sum_axis(2)?.scale(1.0 / (tau * (dh as f64).sqrt()))?;
    if let Some(lw) = key_log_weight {
        logits = logits.add(&lw.gather(pairs.key.clone())?.reshape(&[p, 1])?)?;
    }
    // per-query maximum as a constant shift
    let mut shift = vec![f64::NEG_INFINITY; e * n_heads];
    for (m, &qi) in pairs.query.iter().enumerate() {
        for h in 0..n_heads {
            let s = &mut shift[qi * n_heads + h];
            *s = s.max(logits.value().data()[m * n_heads + h]);
        }
    }
    let shift = Var::constant(Tensor::new(vec![e, n_heads], shift)?).gather(pairs.query.clone())?;
    let a = logits.sub(&shift)?.exp()?;
    let denom = a.scatter_add(pairs.query.clone(), e)?.gather(pairs.query.clone())?;
    let weights = a.div(&denom)?;
    let w = weights.reshape(&[p, n_heads, 1])?;
    let mut vp = v.gather(pairs.key.clone())?;
    if let Some(vw) = value_weight {
        vp = vp.mul(&vw.gather(pairs.key.clone())?.reshape(&[p, 1])?)?;
    }
    let vp = vp.reshape(&[p, n_heads, dh])?;
    let out = w.mul(&vp)?.reshape(&[p, d])?.scatter_add(pairs.query.clone(), e)?;
    Ok((out, weights))
}
