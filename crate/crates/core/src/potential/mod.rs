//! The learned attention potential and the analytic reference potential.

mod attention;
pub mod checkpoint;
mod config;
mod features;
mod model;
mod params;
mod reference;

pub use attention::{attention, padded_windows, softmax, softmax_jacobian, softmax_jacobian_max_norm};
pub use config::{GraphKind, Head, PotentialConfig};
pub use features::{angular_features, monomial_exponents, radial_features, radial_spacing, smearing_derivative_ratio};
pub use model::{AttentionMap, BoundModel, Potential};
pub use params::{is_decayed, parameter_shapes, ParamVars, Parameters};
pub use reference::{reference_energy, reference_potential, ReferenceParams, ReferencePotential};

use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("element with atomic number {0} has no embedding")]
    UnknownSpecies(u8),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that maps positions of a fixed set of atoms to an energy and forces.
pub trait ForceField {
    fn energy_forces(&self, positions: &[[f64; 3]]) -> Result<(f64, Vec<[f64; 3]>), PotentialError>;
}

impl ForceField for ReferencePotential {
    fn energy_forces(&self, positions: &[[f64; 3]]) -> Result<(f64, Vec<[f64; 3]>), PotentialError> {
        Ok(ReferencePotential::energy_forces(self, positions))
    }
}
