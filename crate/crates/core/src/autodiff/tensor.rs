//! Dense row-major `f64` arrays with numpy-style broadcasting.

use super::AdError;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        s[d] = acc;
        acc *= shape[d];
    }
    s
}

/// Broadcast two shapes, aligning trailing dimensions.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` when viewed inside the (larger) broadcast shape `target`;
/// broadcast dimensions get stride 0.
fn broadcast_strides(shape: &[usize], target: &[usize]) -> Vec<usize> {
    let own = strides(shape);
    let offset = target.len() - shape.len();
    (0..target.len())
        .map(|d| {
            if d < offset || shape[d - offset] == 1 {
                0
            } else {
                own[d - offset]
            }
        })
        .collect()
}

/// Calls `f(out_index, a_index, b_index)` over every element of the broadcast shape.
fn for_each_broadcast(
    out_shape: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let n = numel(out_shape);
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    for flat in 0..n {
        f(flat, ia, ib);
        // odometer increment
        let mut d = rank;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            ia -= sa[d] * idx[d];
            ib -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
}

/// Fast paths for a small operand that repeats along leading axes (`[.., n]`
/// against `[m, n]`) or along the last axis (`[m, 1]` against `[m, n]`).
/// `swap` passes the arguments to `f` as `(small, big)`.
fn tiled(
    big: &[f64],
    big_shape: &[usize],
    small: &[f64],
    small_shape: &[usize],
    f: &impl Fn(f64, f64) -> f64,
    swap: bool,
) -> Option<Vec<f64>> {
    let apply = |a: f64, b: f64| if swap { f(b, a) } else { f(a, b) };
    let rank = big_shape.len();
    let trimmed: Vec<usize> = small_shape.iter().copied().skip_while(|&d| d == 1).collect();
    if !trimmed.is_empty() && big_shape.ends_with(&trimmed) {
        let n = small.len();
        return Some(big.chunks_exact(n).flat_map(|row| row.iter().zip(small).map(|(&a, &b)| apply(a, b))).collect());
    }
    let s_rank = small_shape.len();
    if rank >= 2 && s_rank == rank && small_shape[rank - 1] == 1 && small_shape[..rank - 1] == big_shape[..rank - 1] {
        let n = big_shape[rank - 1];
        return Some(big.chunks_exact(n).zip(small).flat_map(|(row, &b)| row.iter().map(move |&a| apply(a, b))).collect());
    }
    None
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, AdError> {
        if numel(&shape) != data.len() {
            return Err(AdError::ShapeMismatch {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![], data: vec![v] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![v; numel(shape)] }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Builds an `[n, 3]` tensor from a slice of 3-vectors.
    pub fn from_rows3(rows: &[[f64; 3]]) -> Self {
        Self {
            shape: vec![rows.len(), 3],
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn to_rows3(&self) -> Vec<[f64; 3]> {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, AdError> {
        if self.shape == other.shape {
            let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Self { shape: self.shape.clone(), data });
        }
        if other.data.len() == 1 && other.rank() <= self.rank() {
            let b = other.data[0];
            return Ok(self.map(|a| f(a, b)));
        }
        if self.data.len() == 1 && self.rank() <= other.rank() {
            let a = self.data[0];
            return Ok(other.map(|b| f(a, b)));
        }
        let out_shape = broadcast_shape(&self.shape, &other.shape).ok_or_else(|| {
            AdError::ShapeMismatch { op, lhs: self.shape.clone(), rhs: other.shape.clone() }
        })?;
        if out_shape == self.shape {
            if let Some(data) = tiled(&self.data, &self.shape, &other.data, &other.shape, &f, false) {
                return Ok(Self { shape: out_shape, data });
            }
        } else if out_shape == other.shape {
            if let Some(data) = tiled(&other.data, &other.shape, &self.data, &self.shape, &f, true) {
                return Ok(Self { shape: out_shape, data });
            }
        }
        let sa = broadcast_strides(&self.shape, &out_shape);
        let sb = broadcast_strides(&other.shape, &out_shape);
        let mut data = vec![0.0; numel(&out_shape)];
        for_each_broadcast(&out_shape, &sa, &sb, |o, ia, ib| {
            data[o] = f(self.data[ia], other.data[ib]);
        });
        Ok(Self { shape: out_shape, data })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self, AdError> {
        if numel(shape) != self.numel() {
            return Err(AdError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Self { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Self, AdError> {
        match broadcast_shape(&self.shape, shape) {
            Some(s) if s == shape => {}
            _ => {
                return Err(AdError::ShapeMismatch {
                    op: "broadcast_to",
                    lhs: self.shape.clone(),
                    rhs: shape.to_vec(),
                })
            }
        }
        if self.shape == shape {
            return Ok(self.clone());
        }
        let trimmed: Vec<usize> = self.shape.iter().copied().skip_while(|&d| d == 1).collect();
        if !trimmed.is_empty() && shape.ends_with(&trimmed) {
            let reps = numel(shape) / self.data.len();
            let mut data = Vec::with_capacity(numel(shape));
            for _ in 0..reps {
                data.extend_from_slice(&self.data);
            }
            return Ok(Self { shape: shape.to_vec(), data });
        }
        let sa = broadcast_strides(&self.shape, shape);
        let zero = vec![0; shape.len()];
        let mut data = vec![0.0; numel(shape)];
        for_each_broadcast(shape, &sa, &zero, |o, ia, _| data[o] = self.data[ia]);
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Sums over broadcast dimensions so the result has `shape`; inverse of `broadcast_to`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Self, AdError> {
        if self.shape == shape {
            return Ok(self.clone());
        }
        match broadcast_shape(shape, &self.shape) {
            Some(s) if s == self.shape => {}
            _ => {
                return Err(AdError::ShapeMismatch {
                    op: "sum_to",
                    lhs: self.shape.clone(),
                    rhs: shape.to_vec(),
                })
            }
        }
        let n = numel(shape);
        let trimmed: Vec<usize> = shape.iter().copied().skip_while(|&d| d == 1).collect();
        if n > 0 && self.shape.ends_with(&trimmed) {
            let mut data = vec![0.0; n];
            for row in self.data.chunks_exact(n) {
                for (d, x) in data.iter_mut().zip(row) {
                    *d += x;
                }
            }
            return Ok(Self { shape: shape.to_vec(), data });
        }
        let rank = self.shape.len();
        if rank >= 2 && shape.len() == rank && shape[rank - 1] == 1 && shape[..rank - 1] == self.shape[..rank - 1] {
            let data = self.data.chunks_exact(self.shape[rank - 1]).map(|r| r.iter().sum()).collect();
            return Ok(Self { shape: shape.to_vec(), data });
        }
        let st = broadcast_strides(shape, &self.shape);
        let zero = vec![0; self.shape.len()];
        let mut data = vec![0.0; n];
        for_each_broadcast(&self.shape, &st, &zero, |o, it, _| data[it] += self.data[o]);
        Ok(Self { shape: shape.to_vec(), data })
    }

    fn check_axis(&self, axis: usize, op: &'static str) -> Result<(), AdError> {
        if axis >= self.rank() {
            return Err(AdError::Axis { op, axis, rank: self.rank() });
        }
        Ok(())
    }

    /// (outer, len, inner) decomposition around `axis`.
    fn split_at_axis(&self, axis: usize) -> (usize, usize, usize) {
        let outer = numel(&self.shape[..axis]);
        let inner = numel(&self.shape[axis + 1..]);
        (outer, self.shape[axis], inner)
    }

    /// Sum over `axis`, removing it from the shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Self, AdError> {
        self.check_axis(axis, "sum_axis")?;
        let (outer, len, inner) = self.split_at_axis(axis);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    data[o * inner + i] += self.data[base + i];
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(Self { shape, data })
    }

    /// Max over `axis` together with a one-hot mask selecting the first maximal element.
    pub fn max_axis_with_mask(&self, axis: usize) -> Result<(Self, Self), AdError> {
        self.check_axis(axis, "max_axis")?;
        let (outer, len, inner) = self.split_at_axis(axis);
        if len == 0 {
            return Err(AdError::Domain { op: "max_axis", detail: "empty axis".into() });
        }
        let mut data = vec![f64::NEG_INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    let v = self.data[base + i];
                    if v > data[o * inner + i] || l == 0 {
                        data[o * inner + i] = v;
                        arg[o * inner + i] = l;
                    }
                }
            }
        }
        let mut mask = vec![0.0; self.numel()];
        for o in 0..outer {
            for i in 0..inner {
                mask[(o * len + arg[o * inner + i]) * inner + i] = 1.0;
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok((Self { shape, data }, Self { shape: self.shape.clone(), data: mask }))
    }

    /// Inserts a unit dimension at `axis`.
    pub fn unsqueeze(&self, axis: usize) -> Self {
        let mut shape = self.shape.clone();
        shape.insert(axis, 1);
        Self { shape, data: self.data.clone() }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Self, AdError> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(AdError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut data[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (r, &b) in row.iter_mut().zip(brow) {
                    *r += a * b;
                }
            }
        }
        Ok(Self { shape: vec![m, n], data })
    }

    pub fn transpose(&self) -> Result<Self, AdError> {
        if self.rank() != 2 {
            return Err(AdError::Axis { op: "transpose", axis: 1, rank: self.rank() });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self { shape: vec![n, m], data })
    }

    fn row_len(&self) -> usize {
        numel(&self.shape[1..])
    }

    /// Selects rows (entries along axis 0) by index; indices may repeat.
    pub fn gather_rows(&self, index: &[usize]) -> Result<Self, AdError> {
        if self.rank() == 0 {
            return Err(AdError::Axis { op: "gather", axis: 0, rank: 0 });
        }
        let rows = self.shape[0];
        let w = self.row_len();
        let mut data = Vec::with_capacity(index.len() * w);
        for &r in index {
            if r >= rows {
                return Err(AdError::Index { op: "gather", index: r, len: rows });
            }
            data.extend_from_slice(&self.data[r * w..(r + 1) * w]);
        }
        let mut shape = self.shape.clone();
        shape[0] = index.len();
        Ok(Self { shape, data })
    }

    /// Accumulates row `m` into output row `index[m]`; output has `rows` rows.
    pub fn scatter_add_rows(&self, index: &[usize], rows: usize) -> Result<Self, AdError> {
        if self.rank() == 0 || self.shape[0] != index.len() {
            return Err(AdError::ShapeMismatch {
                op: "scatter_add",
                lhs: self.shape.clone(),
                rhs: vec![index.len()],
            });
        }
        let w = self.row_len();
        let mut data = vec![0.0; rows * w];
        for (m, &r) in index.iter().enumerate() {
            if r >= rows {
                return Err(AdError::Index { op: "scatter_add", index: r, len: rows });
            }
            let dst = &mut data[r * w..(r + 1) * w];
            for (d, s) in dst.iter_mut().zip(&self.data[m * w..(m + 1) * w]) {
                *d += s;
            }
        }
        let mut shape = self.shape.clone();
        shape[0] = rows;
        Ok(Self { shape, data })
    }

    pub fn slice_axis(&self, axis: usize, start: usize, len: usize) -> Result<Self, AdError> {
        self.check_axis(axis, "slice")?;
        if start + len > self.shape[axis] {
            return Err(AdError::Index { op: "slice", index: start + len, len: self.shape[axis] });
        }
        let (outer, full, inner) = self.split_at_axis(axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Self { shape, data })
    }

    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Self, AdError> {
        let first = parts.first().ok_or(AdError::Domain {
            op: "concat",
            detail: "no inputs".into(),
        })?;
        first.check_axis(axis, "concat")?;
        for p in parts {
            let same = p.rank() == first.rank()
                && (0..p.rank()).all(|d| d == axis || p.shape[d] == first.shape[d]);
            if !same {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
        }
        let outer = numel(&first.shape[..axis]);
        let inner = numel(&first.shape[axis + 1..]);
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total;
        Ok(Self { shape, data })
    }
}
