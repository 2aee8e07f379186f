//! Differentiable operations on [`Var`].

use std::rc::Rc;

use super::tape::{Op, Var};
use super::tensor::Tensor;
use super::AdError;

type R = Result<Var, AdError>;

impl Var {
    pub fn add(&self, o: &Var) -> R {
        let v = self.value.zip_with(&o.value, "add", |a, b| a + b)?;
        Var::record(Op::Add, &[self, o], v)
    }

    pub fn sub(&self, o: &Var) -> R {
        let v = self.value.zip_with(&o.value, "sub", |a, b| a - b)?;
        Var::record(Op::Sub, &[self, o], v)
    }

    pub fn mul(&self, o: &Var) -> R {
        let v = self.value.zip_with(&o.value, "mul", |a, b| a * b)?;
        Var::record(Op::Mul, &[self, o], v)
    }

    pub fn div(&self, o: &Var) -> R {
        let v = self.value.zip_with(&o.value, "div", |a, b| a / b)?;
        Var::record(Op::Div, &[self, o], v)
    }

    pub fn neg(&self) -> R {
        Var::record(Op::Neg, &[self], self.value.map(|x| -x))
    }

    pub fn scale(&self, c: f64) -> R {
        self.mul(&Var::scalar(c))
    }

    pub fn add_scalar(&self, c: f64) -> R {
        self.add(&Var::scalar(c))
    }

    pub fn square(&self) -> R {
        self.mul(self)
    }

    pub fn exp(&self) -> R {
        Var::record(Op::Exp, &[self], self.value.map(f64::exp))
    }

    pub fn log(&self) -> R {
        if let Some(&bad) = self.value.data().iter().find(|&&x| !(x > 0.0)) {
            return Err(AdError::Domain { op: "log", detail: format!("non-positive input {bad}") });
        }
        Var::record(Op::Log, &[self], self.value.map(f64::ln))
    }

    /// `x^p` for a constant exponent.
    pub fn powf(&self, p: f64) -> R {
        if p.fract() != 0.0 {
            if let Some(&bad) = self.value.data().iter().find(|&&x| x < 0.0) {
                return Err(AdError::Domain {
                    op: "powf",
                    detail: format!("negative base {bad} with fractional exponent {p}"),
                });
            }
        }
        Var::record(Op::Powf(p), &[self], self.value.map(|x| x.powf(p)))
    }

    pub fn sqrt(&self) -> R {
        if let Some(&bad) = self.value.data().iter().find(|&&x| x < 0.0) {
            return Err(AdError::Domain { op: "sqrt", detail: format!("negative input {bad}") });
        }
        Var::record(Op::Sqrt, &[self], self.value.map(f64::sqrt))
    }

    pub fn tanh(&self) -> R {
        Var::record(Op::Tanh, &[self], self.value.map(f64::tanh))
    }

    /// Logistic sigmoid, evaluated without overflow for large |x|.
    pub fn sigmoid(&self) -> R {
        Var::record(Op::Sigmoid, &[self], self.value.map(sigmoid))
    }

    /// `x * sigmoid(x)`.
    pub fn silu(&self) -> R {
        self.mul(&self.sigmoid()?)
    }

    pub fn sum(&self) -> R {
        let s: f64 = self.value.data().iter().sum();
        Var::record(Op::SumAll, &[self], Tensor::scalar(s))
    }

    pub fn mean(&self) -> R {
        let n = self.value.numel().max(1) as f64;
        self.sum()?.scale(1.0 / n)
    }

    pub fn sum_axis(&self, axis: usize) -> R {
        let v = self.value.sum_axis(axis)?;
        Var::record(Op::SumAxis(axis), &[self], v)
    }

    pub fn mean_axis(&self, axis: usize) -> R {
        let n = self.shape().get(axis).copied().unwrap_or(1).max(1) as f64;
        self.sum_axis(axis)?.scale(1.0 / n)
    }

    /// Max over `axis`; the adjoint flows to the first maximal element.
    pub fn max_axis(&self, axis: usize) -> R {
        let (v, mask) = self.value.max_axis_with_mask(axis)?;
        Var::record(Op::MaxAxis { axis, mask: Rc::new(mask) }, &[self], v)
    }

    /// Max over all elements.
    pub fn max(&self) -> R {
        self.reshape(&[self.value.numel()])?.max_axis(0)
    }

    pub fn matmul(&self, o: &Var) -> R {
        let v = self.value.matmul(&o.value)?;
        Var::record(Op::MatMul, &[self, o], v)
    }

    pub fn transpose(&self) -> R {
        let v = self.value.transpose()?;
        Var::record(Op::Transpose, &[self], v)
    }

    pub fn reshape(&self, shape: &[usize]) -> R {
        let v = self.value.reshape(shape)?;
        Var::record(Op::Reshape, &[self], v)
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> R {
        let v = self.value.broadcast_to(shape)?;
        Var::record(Op::BroadcastTo, &[self], v)
    }

    pub fn sum_to(&self, shape: &[usize]) -> R {
        let v = self.value.sum_to(shape)?;
        Var::record(Op::SumTo, &[self], v)
    }

    pub fn gather(&self, index: Rc<Vec<usize>>) -> R {
        let v = self.value.gather_rows(&index)?;
        Var::record(Op::Gather(index), &[self], v)
    }

    pub fn scatter_add(&self, index: Rc<Vec<usize>>, rows: usize) -> R {
        let v = self.value.scatter_add_rows(&index, rows)?;
        Var::record(Op::ScatterAdd(index), &[self], v)
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> R {
        let v = self.value.slice_axis(axis, start, len)?;
        Var::record(Op::Slice { axis, start, len }, &[self], v)
    }

    pub fn concat(parts: &[&Var], axis: usize) -> R {
        let tensors: Vec<&Tensor> = parts.iter().map(|p| p.value.as_ref()).collect();
        let v = Tensor::concat(&tensors, axis)?;
        let sizes = Rc::new(parts.iter().map(|p| p.shape()[axis]).collect());
        Var::record(Op::Concat { axis, sizes }, parts, v)
    }

    /// Elementwise `cond ? a : b`; `cond` is a constant boolean array broadcastable
    /// with both branches.
    pub fn where_(cond: &[bool], cond_shape: &[usize], a: &Var, b: &Var) -> R {
        let mask = Tensor::new(
            cond_shape.to_vec(),
            cond.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
        )?;
        let shape = super::tensor::broadcast_shape(a.shape(), b.shape())
            .and_then(|s| super::tensor::broadcast_shape(&s, mask.shape()))
            .ok_or_else(|| AdError::ShapeMismatch {
                op: "where",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            })?;
        let mask = mask.broadcast_to(&shape)?;
        let av = a.value.broadcast_to(&shape)?;
        let bv = b.value.broadcast_to(&shape)?;
        let data = mask
            .data()
            .iter()
            .zip(av.data().iter().zip(bv.data()))
            .map(|(&m, (&x, &y))| if m != 0.0 { x } else { y })
            .collect();
        let v = Tensor::new(shape, data)?;
        Var::record(Op::Where(Rc::new(mask)), &[a, b], v)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Reduces a broadcast cotangent back to an operand's shape.
fn unbroadcast(g: Var, shape: &[usize]) -> R {
    if g.shape() == shape {
        Ok(g)
    } else {
        g.sum_to(shape)
    }
}

/// Vector-Jacobian products for one recorded node. All arithmetic goes through
/// [`Var`] so that, when the inputs are attached, the adjoint itself is taped.
pub(crate) fn vjp(op: &Op, inputs: &[Var], out: &Var, g: &Var) -> Result<Vec<Option<Var>>, AdError> {
    let shape = |i: usize| inputs[i].shape().to_vec();
    Ok(match op {
        Op::Leaf => vec![],
        Op::Add => vec![Some(unbroadcast(g.clone(), &shape(0))?), Some(unbroadcast(g.clone(), &shape(1))?)],
        Op::Sub => vec![Some(unbroadcast(g.clone(), &shape(0))?), Some(unbroadcast(g.neg()?, &shape(1))?)],
        Op::Mul => vec![
            Some(unbroadcast(g.mul(&inputs[1])?, &shape(0))?),
            Some(unbroadcast(g.mul(&inputs[0])?, &shape(1))?),
        ],
        Op::Div => {
            let ga = g.div(&inputs[1])?;
            let gb = ga.mul(out)?.neg()?;
            vec![Some(unbroadcast(ga, &shape(0))?), Some(unbroadcast(gb, &shape(1))?)]
        }
        Op::Neg => vec![Some(g.neg()?)],
        Op::Exp => vec![Some(g.mul(out)?)],
        Op::Log => vec![Some(g.div(&inputs[0])?)],
        Op::Powf(p) => {
            let d = if *p == 2.0 {
                inputs[0].scale(2.0)?
            } else {
                inputs[0].powf(p - 1.0)?.scale(*p)?
            };
            vec![Some(g.mul(&d)?)]
        }
        Op::Sqrt => vec![Some(g.div(out)?.scale(0.5)?)],
        Op::Tanh => {
            let d = out.square()?.neg()?.add_scalar(1.0)?;
            vec![Some(g.mul(&d)?)]
        }
        Op::Sigmoid => {
            let d = out.mul(&out.neg()?.add_scalar(1.0)?)?;
            vec![Some(g.mul(&d)?)]
        }
        Op::SumAll => vec![Some(g.broadcast_to(&shape(0))?)],
        Op::SumAxis(axis) => {
            let mut s = g.shape().to_vec();
            s.insert(*axis, 1);
            vec![Some(g.reshape(&s)?.broadcast_to(&shape(0))?)]
        }
        Op::MaxAxis { axis, mask } => {
            let mut s = g.shape().to_vec();
            s.insert(*axis, 1);
            let gb = g.reshape(&s)?.broadcast_to(&shape(0))?;
            vec![Some(gb.mul(&Var { value: mask.clone(), node: None })?)]
        }
        Op::MatMul => vec![
            Some(g.matmul(&inputs[1].transpose()?)?),
            Some(inputs[0].transpose()?.matmul(g)?),
        ],
        Op::Transpose => vec![Some(g.transpose()?)],
        Op::Where(mask) => {
            let m = Var { value: mask.clone(), node: None };
            let inv = Var::constant(mask.map(|x| 1.0 - x));
            vec![
                Some(unbroadcast(g.mul(&m)?, &shape(0))?),
                Some(unbroadcast(g.mul(&inv)?, &shape(1))?),
            ]
        }
        Op::Concat { axis, sizes } => {
            let mut start = 0;
            let mut out = Vec::with_capacity(sizes.len());
            for &len in sizes.iter() {
                out.push(Some(g.slice(*axis, start, len)?));
                start += len;
            }
            out
        }
        Op::Slice { axis, start, len } => {
            let full = shape(0);
            let mut parts = Vec::new();
            if *start > 0 {
                let mut s = full.clone();
                s[*axis] = *start;
                parts.push(Var::constant(Tensor::zeros(&s)));
            }
            parts.push(g.clone());
            let tail = full[*axis] - start - len;
            if tail > 0 {
                let mut s = full.clone();
                s[*axis] = tail;
                parts.push(Var::constant(Tensor::zeros(&s)));
            }
            let refs: Vec<&Var> = parts.iter().collect();
            vec![Some(Var::concat(&refs, *axis)?)]
        }
        Op::Gather(index) => vec![Some(g.scatter_add(index.clone(), shape(0)[0])?)],
        Op::ScatterAdd(index) => vec![Some(g.gather(index.clone())?)],
        Op::BroadcastTo => vec![Some(g.sum_to(&shape(0))?)],
        Op::SumTo => vec![Some(g.broadcast_to(&shape(0))?)],
        Op::Reshape => vec![Some(g.reshape(&shape(0))?)],
    })
}
