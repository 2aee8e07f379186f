use serde::Serialize;

use crate::chem::Structure;

use super::neighbors_within;

/// Per-atom in-radius neighbour counts at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborStats {
    pub cutoff: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: usize,
}

pub fn neighbor_stats(structures: &[Structure], cutoffs: &[f64]) -> Vec<NeighborStats> {
    cutoffs
        .iter()
        .map(|&cutoff| {
            let counts: Vec<usize> = structures
                .iter()
                .flat_map(|s| neighbors_within(s.positions(), cutoff).into_iter().map(|nb| nb.len()))
                .collect();
            if counts.is_empty() {
                return NeighborStats { cutoff, mean: 0.0, std: 0.0, max: 0 };
            }
            let n = counts.len() as f64;
            let mean = counts.iter().sum::<usize>() as f64 / n;
            let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
            NeighborStats { cutoff, mean, std: var.sqrt(), max: counts.iter().copied().max().unwrap_or(0) }
        })
        .collect()
}

pub fn neighbor_stats_csv(stats: &[NeighborStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in stats {
        w.serialize(s).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
