//! Elements, units, molecular structures and (extended) XYZ I/O.

pub mod elements;
pub mod library;
mod structure;
pub mod xyz;

pub use elements::{covalent_radius, Element};
#[cfg(test)]
pub(crate) use structure::dist as structure_dist;
pub use structure::{perceive_bonds, Bond, Structure, DEFAULT_BOND_SCALE};

use std::path::PathBuf;

use thiserror::Error;

/// Project-wide unit conventions: Å, eV, eV/Å, fs, amu, K.
pub mod units {
    /// Boltzmann constant in eV/K.
    pub const BOLTZMANN: f64 = 8.617333262e-5;
    /// Converts a force/mass ratio in eV/(Å·amu) to an acceleration in Å/fs².
    ///
    /// 1 eV/(Å·amu) = 1.602176634e-19 J / (1e-10 m · 1.66053906660e-27 kg)
    /// = 9.64853322e17 m/s² = 9.64853322e-3 Å/fs².
    pub const ACCEL_CONVERSION: f64 = 9.64853322e-3;
    /// amu·(Å/fs)² expressed in eV; the reciprocal of [`ACCEL_CONVERSION`].
    pub const KINETIC_CONVERSION: f64 = 103.642697;
}

#[derive(Debug, Error)]
pub enum ChemError {
    #[error("unsupported element with atomic number {0}")]
    UnsupportedElement(u32),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
