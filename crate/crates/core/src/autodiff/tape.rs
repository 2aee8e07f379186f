use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::tensor::Tensor;
use super::AdError;

/// Recorded operation kinds. Index payloads are shared so that replaying an
/// adjoint never copies them.
#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Powf(f64),
    Sqrt,
    Tanh,
    Sigmoid,
    SumAll,
    SumAxis(usize),
    MaxAxis { axis: usize, mask: Rc<Tensor> },
    MatMul,
    Transpose,
    /// Elementwise select; `mask` has the output shape, 1.0 picks the first input.
    Where(Rc<Tensor>),
    Concat { axis: usize, sizes: Rc<Vec<usize>> },
    Slice { axis: usize, start: usize, len: usize },
    Gather(Rc<Vec<usize>>),
    ScatterAdd(Rc<Vec<usize>>),
    BroadcastTo,
    SumTo,
    Reshape,
}

#[derive(Clone)]
pub(crate) struct NodeInput {
    pub value: Rc<Tensor>,
    pub id: Option<usize>,
}

pub(crate) struct Node {
    pub op: Op,
    pub inputs: Vec<NodeInput>,
    pub value: Rc<Tensor>,
    /// 0 for forward recordings, 1 for values produced by a differentiable backward pass.
    pub level: u8,
}

pub(crate) struct TapeInner {
    pub nodes: Vec<Node>,
    pub recording_level: u8,
}

/// A recording of operations in evaluation order.
///
/// A tape and every [`Var`] attached to it are confined to one thread.
#[derive(Clone)]
pub struct Tape {
    pub(crate) inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new(), recording_level: 0 })),
        }
    }

    /// Registers a differentiable input.
    pub fn var(&self, value: Tensor) -> Var {
        let value = Rc::new(value);
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node { op: Op::Leaf, inputs: Vec::new(), value: value.clone(), level: 0 });
        Var { value, node: Some((self.clone(), id)) }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

/// A value that is either a constant or a reference into a [`Tape`].
#[derive(Clone)]
pub struct Var {
    pub(crate) value: Rc<Tensor>,
    pub(crate) node: Option<(Tape, usize)>,
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("shape", &self.value.shape())
            .field("node", &self.node.as_ref().map(|n| n.1))
            .finish()
    }
}

impl Var {
    pub fn constant(value: Tensor) -> Self {
        Self { value: Rc::new(value), node: None }
    }

    pub fn scalar(v: f64) -> Self {
        Self::constant(Tensor::scalar(v))
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn item(&self) -> f64 {
        self.value.item()
    }

    pub fn is_constant(&self) -> bool {
        self.node.is_none()
    }

    pub fn tape(&self) -> Option<&Tape> {
        self.node.as_ref().map(|(t, _)| t)
    }

    /// Same value, cut from the tape; gradients do not flow through the result.
    pub fn detach(&self) -> Var {
        Var { value: self.value.clone(), node: None }
    }

    pub(crate) fn id(&self) -> Option<usize> {
        self.node.as_ref().map(|(_, id)| *id)
    }

    pub(crate) fn level(&self) -> u8 {
        match &self.node {
            Some((tape, id)) => tape.inner.borrow().nodes[*id].level,
            None => 0,
        }
    }

    /// Records `value` as the result of `op` applied to `inputs`.
    pub(crate) fn record(op: Op, inputs: &[&Var], value: Tensor) -> Result<Var, AdError> {
        let value = Rc::new(value);
        let mut tape: Option<&Tape> = None;
        for v in inputs {
            if let Some((t, _)) = &v.node {
                match tape {
                    None => tape = Some(t),
                    Some(prev) if !prev.same(t) => return Err(AdError::TapeMismatch),
                    _ => {}
                }
            }
        }
        let Some(tape) = tape else {
            return Ok(Var { value, node: None });
        };
        let mut inner = tape.inner.borrow_mut();
        let mut level = inner.recording_level;
        let node_inputs = inputs
            .iter()
            .map(|v| {
                let id = v.id();
                if let Some(i) = id {
                    level = level.max(inner.nodes[i].level);
                }
                NodeInput { value: v.value.clone(), id }
            })
            .collect();
        let id = inner.nodes.len();
        inner.nodes.push(Node { op, inputs: node_inputs, value: value.clone(), level });
        drop(inner);
        Ok(Var { value, node: Some((tape.clone(), id)) })
    }
}
