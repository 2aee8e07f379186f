use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::chem::Structure;
use crate::dynamics::{relax, RelaxSettings};
use crate::potential::{PotentialConfig, ReferencePotential};
use crate::scanner::{find_bridge_bonds, fragment_labels};

/// A structure with its reference labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub structure: Structure,
    /// eV
    pub energy: f64,
    /// eV/Å
    pub forces: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub frames_per_molecule: usize,
    /// Standard deviation of the Gaussian displacement of every coordinate, Å.
    pub perturbation: f64,
    /// Fraction of frames with one bond stretched or compressed first.
    pub stretch_fraction: f64,
    /// Range of the bond-length change, Å. Both fragments move by half.
    pub stretch_min: f64,
    pub stretch_max: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            frames_per_molecule: 24,
            perturbation: 0.04,
            stretch_fraction: 0.3,
            stretch_min: -0.2,
            stretch_max: 0.5,
            seed: 0,
        }
    }
}

/// Relaxes each molecule under its own reference potential, then samples
/// perturbed frames around the minimum, some with a stretched bridge bond, and
/// labels them with the reference potential.
pub fn generate_dataset(molecules: &[Structure], cfg: &DatasetConfig) -> Result<Vec<Sample>, TrainError> {
    if !(cfg.perturbation >= 0.0) || !(0.0..=1.0).contains(&cfg.stretch_fraction) || cfg.stretch_min > cfg.stretch_max
    {
        return Err(TrainError::Config("invalid dataset configuration".into()));
    }
    let noise = Normal::new(0.0, cfg.perturbation.max(f64::MIN_POSITIVE)).expect("positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(molecules.len() * cfg.frames_per_molecule);
    for m in molecules {
        let reference = ReferencePotential::new(m);
        let relaxed = relax(&reference, m.positions(), &RelaxSettings::default())?;
        let base = m.with_positions(relaxed.positions).map_err(|e| TrainError::Config(e.to_string()))?;
        let bonds = reference.bonds();
        let bridges = find_bridge_bonds(&base, &bonds);
        for _ in 0..cfg.frames_per_molecule {
            let mut pos = base.positions().to_vec();
            if !bridges.is_empty() && rng.random::<f64>() < cfg.stretch_fraction {
                let bridge = bridges[rng.random_range(0..bridges.len())];
                let labels = fragment_labels(&base, &bonds, bridge)?;
                let half = 0.5 * rng.random_range(cfg.stretch_min..=cfg.stretch_max);
                let (a, b) = (pos[bridge.0], pos[bridge.1]);
                let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let l = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                for (p, &h) in pos.iter_mut().zip(&labels) {
                    for k in 0..3 {
                        p[k] += half * f64::from(h) * d[k] / l;
                    }
                }
            }
            if cfg.perturbation > 0.0 {
                for p in pos.iter_mut().flatten() {
                    *p += noise.sample(&mut rng);
                }
            }
            let (energy, forces) = reference.energy_forces(&pos);
            let structure = base.with_positions(pos).map_err(|e| TrainError::Config(e.to_string()))?;
            out.push(Sample { structure, energy, forces });
        }
    }
    Ok(out)
}

/// Per-species energies minimizing the squared error of `sum_i o[z_i]`
/// against the labels, in the species order of `pcfg`. A ridge term scaled
/// to the normal matrix picks a solution when the counts are collinear (a
/// single molecule) and keeps absent species at zero.
pub fn fit_offsets(data: &[Sample], pcfg: &PotentialConfig) -> Result<Vec<f64>, TrainError> {
    let s = pcfg.species.len();
    let mut ata = vec![vec![0.0; s]; s];
    let mut atb = vec![0.0; s];
    for d in data {
        let mut counts = vec![0.0; s];
        for &z in d.structure.species() {
            counts[pcfg.species_index(z)?] += 1.0;
        }
        for i in 0..s {
            atb[i] += counts[i] * d.energy;
            for j in 0..s {
                ata[i][j] += counts[i] * counts[j];
            }
        }
    }
    let ridge = 1e-10 * (1.0 + (0..s).map(|i| ata[i][i]).sum::<f64>());
    let mut damped = ata.clone();
    for (i, row) in damped.iter_mut().enumerate() {
        row[i] += ridge;
    }
    // iterative refinement removes the ridge bias along well-determined directions
    let mut x = vec![0.0; s];
    for _ in 0..4 {
        let r: Vec<f64> = (0..s).map(|i| atb[i] - (0..s).map(|j| ata[i][j] * x[j]).sum::<f64>()).collect();
        for (xi, d) in x.iter_mut().zip(solve(damped.clone(), r)) {
            *xi += d;
        }
    }
    Ok(x)
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).expect("non-empty");
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
