use serde::{Deserialize, Serialize};

use super::PotentialError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Forces are `-dE/dx`.
    Gradient,
    /// Forces come from a separate per-edge vector readout.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    HardKnn,
    DiffKnn,
    DiffKnnMemeff,
}

impl std::str::FromStr for Head {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gradient" => Ok(Head::Gradient),
            "direct" => Ok(Head::Direct),
            _ => Err(format!("unknown head '{s}' (expected gradient or direct)")),
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard_knn" => Ok(GraphKind::HardKnn),
            "diff_knn" => Ok(GraphKind::DiffKnn),
            "diff_knn_memeff" => Ok(GraphKind::DiffKnnMemeff),
            _ => Err(format!("unknown graph '{s}' (expected hard_knn, diff_knn or diff_knn_memeff)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub embed_dim: usize,
    pub hidden_factor: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub k: usize,
    /// Å.
    pub r_c: f64,
    /// Å.
    pub d0: f64,
    pub beta: f64,
    /// Extra candidates kept per node by the memory-efficient graph.
    pub delta: usize,
    pub n_radial: usize,
    /// Gaussian width in units of the center spacing.
    pub gamma: f64,
    pub l_max: usize,
    /// Attention temperature.
    pub tau: f64,
    pub head: Head,
    pub graph: GraphKind,
    /// Also scale value vectors by the key edge's envelope weight.
    pub value_scaling: bool,
    /// Atomic numbers with an embedding row, in row order.
    pub species: Vec<u8>,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden_factor: 2,
            n_layers: 2,
            n_heads: 4,
            k: 30,
            r_c: 6.0,
            d0: 0.2,
            beta: 10.0,
            delta: 20,
            n_radial: 128,
            gamma: 1.0,
            l_max: 5,
            tau: 1.0,
            head: Head::Gradient,
            graph: GraphKind::DiffKnn,
            value_scaling: false,
            species: vec![1, 6, 7, 8],
            init_seed: 0,
        }
    }
}

impl PotentialConfig {
    pub fn validate(&self) -> Result<(), PotentialError> {
        let bad = |m: String| Err(PotentialError::Config(m));
        if self.embed_dim == 0 || self.n_heads == 0 || self.embed_dim % self.n_heads != 0 {
            return bad(format!("embed_dim {} must be a positive multiple of n_heads {}", self.embed_dim, self.n_heads));
        }
        if self.hidden_factor == 0 || self.k == 0 || self.n_radial < 2 {
            return bad("hidden_factor and k must be positive, n_radial at least 2".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.gamma >= 1.0) {
            return bad(format!("gamma must be at least 1, got {}", self.gamma));
        }
        if !(self.r_c > 0.0 && self.d0 > 0.0 && self.beta > 0.0) {
            return bad("r_c, d0 and beta must be positive".into());
        }
        if self.species.is_empty() {
            return bad("species list is empty".into());
        }
        let mut s = self.species.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.species.len() {
            return bad("species list has duplicates".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }

    /// Number of Cartesian monomials of total degree at most `l_max`.
    pub fn n_angular(&self) -> usize {
        super::features::monomial_exponents(self.l_max).len()
    }

    pub fn species_index(&self, z: u8) -> Result<usize, PotentialError> {
        self.species.iter().position(|&s| s == z).ok_or(PotentialError::UnknownSpecies(z))
    }
}
