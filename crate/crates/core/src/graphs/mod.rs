//! Neighbour graphs over atomic positions.
//!
//! Edges are directed `i -> j` with vector `x_j - x_i`; node `i`'s
//! neighbourhood is the set of edges leaving it. Edge lists are always sorted
//! by source, then by destination (radius graphs) or by rank (kNN graphs).

mod diff;
mod stats;

pub use diff::{
    bump, combine_rank_radius, diff_knn, diff_knn_memeff, diff_knn_with, envelope, envelope_exponent,
    soft_rank, DiffGraph, DiffKnnParams, RankKernel, TruncationReport, SIGMOID_MARGIN,
};
pub use stats::{neighbor_stats, neighbor_stats_csv, NeighborStats};

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeSet {
    pub n_nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub vectors: Vec<[f64; 3]>,
    pub dist: Vec<f64>,
    /// For kNN graphs: row-major `n_nodes x k` slots holding edge indices, `None` for padding.
    pub knn_slots: Option<(usize, Vec<Option<usize>>)>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    fn push(&mut self, positions: &[[f64; 3]], i: usize, j: usize) {
        let v = sub(&positions[j], &positions[i]);
        self.src.push(i);
        self.dst.push(j);
        self.vectors.push(v);
        self.dist.push(norm(&v));
    }

    /// Half-open edge index range of each source node.
    pub fn source_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = vec![0..0; self.n_nodes];
        let mut start = 0;
        while start < self.len() {
            let s = self.src[start];
            let mut end = start;
            while end < self.len() && self.src[end] == s {
                end += 1;
            }
            out[s] = start..end;
            start = end;
        }
        out
    }

    /// Edge pairs `(i, j)` as a sorted list, for set comparisons.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<_> = self.src.iter().copied().zip(self.dst.iter().copied()).collect();
        p.sort_unstable();
        p
    }

    pub fn subset(&self, keep: &[usize]) -> EdgeSet {
        EdgeSet {
            n_nodes: self.n_nodes,
            src: keep.iter().map(|&e| self.src[e]).collect(),
            dst: keep.iter().map(|&e| self.dst[e]).collect(),
            vectors: keep.iter().map(|&e| self.vectors[e]).collect(),
            dist: keep.iter().map(|&e| self.dist[e]).collect(),
            knn_slots: None,
        }
    }
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// For each atom, the other atoms closer than `cutoff`, ascending by index.
/// Uses a cell list with cell edge `cutoff`.
pub fn neighbors_within(positions: &[[f64; 3]], cutoff: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    if n == 0 {
        return Vec::new();
    }
    let mut lo = positions[0];
    for p in positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
        }
    }
    let cell_of = |p: &[f64; 3]| -> [i64; 3] {
        let c = |k: usize| ((p[k] - lo[k]) / cutoff).floor() as i64;
        [c(0), c(1), c(2)]
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    (0..n)
        .map(|i| {
            let c = cell_of(&positions[i]);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(members) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            out.extend(
                                members
                                    .iter()
                                    .copied()
                                    .filter(|&j| j != i && norm(&sub(&positions[j], &positions[i])) < cutoff),
                            );
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// All directed edges with `d_ij < r_c`.
pub fn radius_graph(positions: &[[f64; 3]], r_c: f64) -> EdgeSet {
    assert!(r_c > 0.0, "cutoff must be positive");
    let mut g = EdgeSet { n_nodes: positions.len(), ..EdgeSet::default() };
    for (i, nb) in neighbors_within(positions, r_c).into_iter().enumerate() {
        for j in nb {
            g.push(positions, i, j);
        }
    }
    g
}

fn knn_from_candidates(positions: &[[f64; 3]], k: usize, candidates: Vec<Vec<usize>>) -> EdgeSet {
    assert!(k >= 1, "k must be at least 1");
    let n = positions.len();
    let mut g = EdgeSet { n_nodes: n, ..EdgeSet::default() };
    let mut slots = vec![None; n * k];
    for (i, mut cand) in candidates.into_iter().enumerate() {
        let d = |j: usize| norm(&sub(&positions[j], &positions[i]));
        cand.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
        for (m, &j) in cand.iter().take(k).enumerate() {
            slots[i * k + m] = Some(g.len());
            g.push(positions, i, j);
        }
    }
    g.knn_slots = Some((k, slots));
    g
}

/// The `k` nearest other atoms of each atom; ties go to the smaller index.
pub fn hard_knn(positions: &[[f64; 3]], k: usize) -> EdgeSet {
    let n = positions.len();
    let all = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
    knn_from_candidates(positions, k, all)
}

/// Hard kNN restricted to neighbours closer than `r_c`.
pub fn hard_knn_cutoff(positions: &[[f64; 3]], k: usize, r_c: f64) -> EdgeSet {
    knn_from_candidates(positions, k, neighbors_within(positions, r_c))
}
