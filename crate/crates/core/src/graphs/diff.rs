//! Differentiable kNN: soft ranks, a rank/radius soft maximum and a smooth
//! envelope that reaches zero exactly where an edge leaves the graph.

use crate::autodiff::sigmoid;

use super::{neighbors_within, EdgeSet};

/// Comparison neighbours for sigmoid ranks extend this many `d0` past `r_c`;
/// the omitted terms are below `sigmoid(-40) ~ 4e-18`.
pub const SIGMOID_MARGIN: f64 = 40.0;

/// Exponents below this are treated as an exact zero weight.
const EXP_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKernel {
    Sigmoid,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffKnnParams {
    pub k: usize,
    pub d0: f64,
    pub r_c: f64,
    pub beta: f64,
    pub kernel: RankKernel,
}

impl DiffKnnParams {
    fn validate(&self) {
        assert!(self.k >= 1, "k must be at least 1");
        assert!(self.d0 > 0.0 && self.r_c > 0.0 && self.beta > 0.0, "d0, r_c and beta must be positive");
    }

    /// How far past `r_c` comparison neighbours are gathered.
    pub fn comparison_reach(&self) -> f64 {
        self.r_c
            + match self.kernel {
                RankKernel::Sigmoid => SIGMOID_MARGIN * self.d0,
                RankKernel::Bump => self.d0,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffGraph {
    /// Retained edges (`f_env < 1`), sorted by source then destination.
    pub edges: EdgeSet,
    pub soft_ranks: Vec<f64>,
    pub f_rank: Vec<f64>,
    pub f_dist: Vec<f64>,
    pub f_env: Vec<f64>,
    pub weights: Vec<f64>,
    pub params: DiffKnnParams,
    /// Every edge that enters a rank sum, grouped by source.
    pub candidates: EdgeSet,
    /// Candidate index of each retained edge.
    pub retained: Vec<usize>,
}

impl DiffGraph {
    /// `(retained edge, competing candidate)` index pairs whose kernel terms sum to the soft ranks.
    pub fn comparison_pairs(&self) -> (Vec<usize>, Vec<usize>) {
        let ranges = self.candidates.source_ranges();
        let mut edge = Vec::new();
        let mut other = Vec::new();
        for (e, &c) in self.retained.iter().enumerate() {
            for c2 in ranges[self.candidates.src[c]].clone() {
                if c2 != c {
                    edge.push(e);
                    other.push(c2);
                }
            }
        }
        (edge, other)
    }
}

/// Smooth step with compact-support derivative: 0 for `x <= -1`, 1 for
/// `x >= 1`, `sigmoid(2/(1-x) - 2/(1+x))` in between.
pub fn bump(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        sigmoid(2.0 / (1.0 - x) - 2.0 / (1.0 + x))
    }
}

fn kernel(kind: RankKernel, x: f64) -> f64 {
    match kind {
        RankKernel::Sigmoid => sigmoid(x),
        RankKernel::Bump => bump(x),
    }
}

/// Sigmoid soft rank of `d_query` within `neighborhood`, which includes the
/// query edge itself; one entry equal to `d_query` is skipped as the self term.
pub fn soft_rank(d_query: f64, neighborhood: &[f64], d0: f64) -> f64 {
    let mut skipped = false;
    neighborhood
        .iter()
        .filter(|&&d| {
            if !skipped && d == d_query {
                skipped = true;
                false
            } else {
                true
            }
        })
        .map(|&d| sigmoid((d_query - d) / d0))
        .sum()
}

/// `ln(exp(beta a) + exp(beta b)) / beta`, shifted by the maximum.
pub fn combine_rank_radius(f_rank: f64, f_dist: f64, beta: f64) -> f64 {
    let m = f_rank.max(f_dist);
    m + ((beta * (f_rank - m)).exp() + (beta * (f_dist - m)).exp()).ln() / beta
}

/// `-f^2 / (1 - f^2)`, or `None` when the weight is zero (`f >= 1` or underflow).
pub fn envelope_exponent(f: f64) -> Option<f64> {
    if f >= 1.0 {
        return None;
    }
    let f2 = f * f;
    let t = -f2 / (1.0 - f2);
    (t > EXP_FLOOR).then_some(t)
}

pub fn envelope(f: f64) -> f64 {
    envelope_exponent(f).map_or(0.0, f64::exp)
}

fn candidate_set(positions: &[[f64; 3]], reach: f64) -> EdgeSet {
    let mut g = EdgeSet { n_nodes: positions.len(), ..EdgeSet::default() };
    for (i, nb) in neighbors_within(positions, reach).into_iter().enumerate() {
        for j in nb {
            g.push(positions, i, j);
        }
    }
    g
}

fn evaluate(candidates: EdgeSet, params: DiffKnnParams) -> DiffGraph {
    let ranges = candidates.source_ranges();
    let mut retained = Vec::new();
    let (mut soft_ranks, mut f_rank, mut f_dist, mut f_env, mut weights) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for range in &ranges {
        for c in range.clone() {
            let d = candidates.dist[c];
            if d >= params.r_c {
                continue;
            }
            let rank: f64 = range
                .clone()
                .filter(|&c2| c2 != c)
                .map(|c2| kernel(params.kernel, (d - candidates.dist[c2]) / params.d0))
                .sum();
            let fr = rank / params.k as f64;
            let fd = d / params.r_c;
            let fe = combine_rank_radius(fr, fd, params.beta);
            let w = envelope(fe);
            if fe < 1.0 && w > 0.0 {
                retained.push(c);
                soft_ranks.push(rank);
                f_rank.push(fr);
                f_dist.push(fd);
                f_env.push(fe);
                weights.push(w);
            }
        }
    }
    DiffGraph {
        edges: candidates.subset(&retained),
        soft_ranks,
        f_rank,
        f_dist,
        f_env,
        weights,
        params,
        candidates,
        retained,
    }
}

pub fn diff_knn_with(positions: &[[f64; 3]], params: DiffKnnParams) -> DiffGraph {
    params.validate();
    evaluate(candidate_set(positions, params.comparison_reach()), params)
}

/// Sigmoid-ranked Diff-kNN.
pub fn diff_knn(positions: &[[f64; 3]], k: usize, d0: f64, r_c: f64, beta: f64) -> DiffGraph {
    diff_knn_with(positions, DiffKnnParams { k, d0, r_c, beta, kernel: RankKernel::Sigmoid })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruncationReport {
    /// Nodes that had more than `k + delta` candidates.
    pub truncated_nodes: usize,
    /// Retained edges `(i, j)` whose rank missed a discarded competitor.
    pub rank_violations: Vec<(usize, usize)>,
    /// Nodes where a discarded edge is not provably outside the graph.
    pub exclusion_violations: Vec<usize>,
}

impl TruncationReport {
    /// True when the truncated graph provably equals the untruncated one.
    pub fn valid(&self) -> bool {
        self.rank_violations.is_empty() && self.exclusion_violations.is_empty()
    }
}

/// Bump-ranked Diff-kNN that keeps only the `k + delta` shortest candidates
/// per node. The report says whether the truncation changed anything.
pub fn diff_knn_memeff(
    positions: &[[f64; 3]],
    k: usize,
    delta: usize,
    d0: f64,
    r_c: f64,
    beta: f64,
) -> (DiffGraph, TruncationReport) {
    let params = DiffKnnParams { k, d0, r_c, beta, kernel: RankKernel::Bump };
    params.validate();
    let all = candidate_set(positions, params.comparison_reach());
    let keep_n = k + delta;
    let mut kept = Vec::new();
    // smallest discarded distance per node
    let mut cut = vec![None; positions.len()];
    for (i, range) in all.source_ranges().into_iter().enumerate() {
        let mut order: Vec<usize> = range.collect();
        order.sort_by(|&a, &b| all.dist[a].total_cmp(&all.dist[b]).then(all.dst[a].cmp(&all.dst[b])));
        if order.len() > keep_n {
            cut[i] = Some(all.dist[order[keep_n]]);
            order.truncate(keep_n);
        }
        order.sort_by_key(|&c| all.dst[c]);
        kept.extend(order);
    }
    let graph = evaluate(all.subset(&kept), params);

    let mut report = TruncationReport { truncated_nodes: cut.iter().flatten().count(), ..Default::default() };
    for (e, (&i, &d)) in graph.edges.src.iter().zip(&graph.edges.dist).enumerate() {
        if let Some(dmin) = cut[i] {
            if dmin < d + d0 {
                report.rank_violations.push((i, graph.edges.dst[e]));
            }
        }
    }
    let ranges = graph.candidates.source_ranges();
    for (i, dmin) in cut.iter().enumerate() {
        let Some(dmin) = *dmin else { continue };
        if dmin >= r_c {
            continue;
        }
        let sure = ranges[i].clone().filter(|&c| graph.candidates.dist[c] <= dmin - d0).count();
        if sure < k {
            report.exclusion_violations.push(i);
        }
    }
    report.rank_violations.dedup();
    (graph, report)
}
