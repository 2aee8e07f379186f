//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Operations on [`Var`]s attached to a [`Tape`] are recorded in evaluation
//! order. [`grad`] walks the tape backwards. Every adjoint rule is itself
//! written in terms of `Var` operations, so passing `create_graph = true`
//! records the backward pass and its results can be differentiated once more.
//! That second level is what force matching needs (forces are `-dE/dx`, and the
//! loss on forces is differentiated with respect to parameters). A third level
//! is rejected with [`AdError::UnsupportedDepth`].
//!
//! ```
//! use bsct_lab::autodiff::{grad, Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.var(Tensor::scalar(3.0));
//! let y = x.mul(&x).unwrap();
//! let g = grad(&y, &[&x], false).unwrap();
//! assert_eq!(g[0].item(), 6.0);
//! ```

mod ops;
mod tape;
mod tensor;

pub use tape::{Tape, Var};
pub use tensor::{broadcast_shape, Tensor};

pub(crate) use ops::sigmoid;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("invalid axis {axis} for rank {rank} in {op}")]
    Axis { op: &'static str, axis: usize, rank: usize },
    #[error("index {index} out of bounds (length {len}) in {op}")]
    Index { op: &'static str, index: usize, len: usize },
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("gradient output must be a scalar, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("nesting deeper than second-order differentiation is not supported")]
    UnsupportedDepth,
    #[error("values recorded on different tapes were combined")]
    TapeMismatch,
}

/// Gradients of the scalar `output` with respect to each of `wrt`.
///
/// Inputs that `output` does not depend on receive zeros. With
/// `create_graph = true` the returned values are attached to the tape and
/// may be differentiated again; otherwise they are constants.
pub fn grad(output: &Var, wrt: &[&Var], create_graph: bool) -> Result<Vec<Var>, AdError> {
    if output.value().numel() != 1 {
        return Err(AdError::NonScalarOutput(output.shape().to_vec()));
    }
    let zeros = |v: &Var| Var::constant(Tensor::zeros(v.shape()));
    let Some((tape, out_id)) = output.node.clone() else {
        return Ok(wrt.iter().map(|v| zeros(v)).collect());
    };
    if create_graph && output.level() >= 1 {
        return Err(AdError::UnsupportedDepth);
    }
    for v in wrt {
        if let Some((t, _)) = &v.node {
            if !std::rc::Rc::ptr_eq(&t.inner, &tape.inner) {
                return Err(AdError::TapeMismatch);
            }
        }
    }

    let n = out_id + 1;
    let mut needed = vec![false; n];
    for v in wrt {
        if let Some(id) = v.id() {
            if id < n {
                needed[id] = true;
            }
        }
    }
    {
        let inner = tape.inner.borrow();
        for id in 0..n {
            if !needed[id] {
                needed[id] = inner.nodes[id]
                    .inputs
                    .iter()
                    .any(|i| i.id.is_some_and(|j| needed[j]));
            }
        }
    }

    let mut adj: Vec<Option<Var>> = vec![None; n];
    adj[out_id] = Some(Var::constant(Tensor::ones(output.shape())));
    let mut results: Vec<Option<Var>> = vec![None; wrt.len()];

    let prev_level = tape.inner.borrow().recording_level;
    if create_graph {
        tape.inner.borrow_mut().recording_level = 1;
    }
    let outcome = (|| {
        for id in (0..n).rev() {
            if !needed[id] {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            for (k, v) in wrt.iter().enumerate() {
                if v.id() == Some(id) {
                    results[k] = Some(g.clone());
                }
            }
            let (op, inputs, value) = {
                let inner = tape.inner.borrow();
                let node = &inner.nodes[id];
                (node.op.clone(), node.inputs.clone(), node.value.clone())
            };
            if matches!(op, tape::Op::Leaf) {
                continue;
            }
            let attach = |id: Option<usize>| if create_graph { id.map(|i| (tape.clone(), i)) } else { None };
            let in_vars: Vec<Var> = inputs
                .iter()
                .map(|i| Var { value: i.value.clone(), node: attach(i.id) })
                .collect();
            let out_var = Var { value, node: attach(Some(id)) };
            let contribs = ops::vjp(&op, &in_vars, &out_var, &g)?;
            for (input, c) in inputs.iter().zip(contribs) {
                let (Some(iid), Some(c)) = (input.id, c) else { continue };
                if !needed[iid] {
                    continue;
                }
                adj[iid] = Some(match adj[iid].take() {
                    None => c,
                    Some(acc) => acc.add(&c)?,
                });
            }
        }
        Ok(())
    })();
    tape.inner.borrow_mut().recording_level = prev_level;
    outcome?;

    Ok(wrt
        .iter()
        .zip(results)
        .map(|(v, r)| r.unwrap_or_else(|| zeros(v)))
        .collect())
}

/// Plain gradient arrays; shorthand for `grad(.., false)`.
pub fn gradients(output: &Var, wrt: &[&Var]) -> Result<Vec<Tensor>, AdError> {
    Ok(grad(output, wrt, false)?.into_iter().map(|v| v.value().clone()).collect())
}

/// Differentiates `loss_fn(first-order gradients)` with respect to `params`.
///
/// `first_order_of` is the scalar whose gradient with respect to `x` feeds the
/// loss (for force matching: the energy, with `x` the positions).
pub fn grad_of_grad(
    first_order_of: &Var,
    x: &Var,
    params: &[&Var],
    loss_fn: impl FnOnce(&Var) -> Result<Var, AdError>,
) -> Result<(Var, Vec<Tensor>), AdError> {
    let dx = grad(first_order_of, &[x], true)?.remove(0);
    let loss = loss_fn(&dx)?;
    let g = gradients(&loss, params)?;
    Ok((loss, g))
}
