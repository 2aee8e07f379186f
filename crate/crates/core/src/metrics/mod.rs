//! Scan-curve metrics: perturbation-force norms, the force smoothness
//! deviation (FSD) and its compress/stretch split, MAEs, and aggregation.
//!
//! For a scan with frames `m`, `dF(m) = F(m) - F(m*)` where `m*` is the
//! curve's own minimum-energy frame. FSD compares a model curve to a
//! reference curve through `g = ln|dF_model|^2 - ln|dF_ref|^2` and reports the
//! largest `|dg/dalpha|`. Frames where either norm is below `1e-8` of that
//! curve's maximum are excluded, since `g` is singular at each minimum.

mod report;
mod synth;

pub use report::{aggregate_report, evaluate_scan, FsdAggregate, FsdReport, ScanFsd};
pub use synth::{local_minima, synth_demo, synth_pes, PesKind, SynthDemo};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{ForceField, Potential, PotentialError};
use crate::scanner::BondScan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("alpha grids differ between model and reference curves")]
    GridMismatch,
    #[error("only {0} valid points, at least 3 are needed")]
    InsufficientData(usize),
    #[error("no valid scans to aggregate")]
    NoValidScans,
}

/// Relative floor below which a perturbation-force norm counts as zero.
pub const EPS_FLOOR: f64 = 1e-8;

/// Energies and forces along one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub id: String,
    pub source: String,
    pub alpha_grid: Vec<f64>,
    pub energies: Vec<f64>,
    /// Per frame, `N x 3` forces.
    pub forces: Vec<Vec<[f64; 3]>>,
    pub min_e_index: usize,
}

impl ScanCurve {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        alpha_grid: Vec<f64>,
        energies: Vec<f64>,
        forces: Vec<Vec<[f64; 3]>>,
    ) -> Result<Self, MetricsError> {
        if alpha_grid.is_empty() || energies.len() != alpha_grid.len() || forces.len() != alpha_grid.len() {
            return Err(MetricsError::Shape(format!(
                "{} alphas, {} energies, {} force frames",
                alpha_grid.len(),
                energies.len(),
                forces.len()
            )));
        }
        if forces.iter().any(|f| f.len() != forces[0].len()) {
            return Err(MetricsError::Shape("atom count varies between frames".into()));
        }
        let min_e_index = argmin(&energies);
        Ok(Self { id: id.into(), source: source.into(), alpha_grid, energies, forces, min_e_index })
    }

    pub fn n_atoms(&self) -> usize {
        self.forces[0].len()
    }
}

/// Index of the smallest value; ties go to the first.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// `|F(alpha) - F(alpha_minE)|^2` per frame over all force components.
pub fn delta_force_norm_sq(curve: &ScanCurve) -> Vec<f64> {
    let f0 = &curve.forces[curve.min_e_index];
    curve
        .forces
        .iter()
        .map(|f| {
            f.iter()
                .zip(f0)
                .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Per-point log-ratio derivatives of one model/reference pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FsdProfile {
    pub alpha: Vec<f64>,
    /// `ln|dF_model|^2 - ln|dF_ref|^2`, absent where either norm is below the floor.
    pub g: Vec<Option<f64>>,
    /// `dg/dalpha`, absent where the stencil touches an excluded point.
    pub dg: Vec<Option<f64>>,
}

impl FsdProfile {
    pub fn n_valid_points(&self) -> usize {
        self.g.iter().flatten().count()
    }

    /// Largest `|dg/dalpha|` over stencils centred at points accepted by `keep`.
    pub fn max_abs_derivative(&self, keep: impl Fn(f64) -> bool) -> Option<f64> {
        self.alpha
            .iter()
            .zip(&self.dg)
            .filter(|(a, _)| keep(**a))
            .filter_map(|(_, d)| d.map(f64::abs))
            .reduce(f64::max)
    }
}

fn valid_mask(norms: &[f64]) -> Vec<bool> {
    let max = norms.iter().copied().fold(0.0, f64::max);
    norms.iter().map(|&x| max > 0.0 && x > 0.0 && x >= EPS_FLOOR * max).collect()
}

/// Log-ratio profile from perturbation-force norms on a uniform grid. Central
/// differences inside, one-sided at the two grid ends.
pub fn fsd_profile_from_delta_norms(
    model: &[f64],
    reference: &[f64],
    alpha: &[f64],
) -> Result<FsdProfile, MetricsError> {
    let n = alpha.len();
    if model.len() != n || reference.len() != n {
        return Err(MetricsError::Shape(format!("{} model, {} reference norms, {n} alphas", model.len(), reference.len())));
    }
    let vm = valid_mask(model);
    let vr = valid_mask(reference);
    let g: Vec<Option<f64>> =
        (0..n).map(|i| (vm[i] && vr[i]).then(|| model[i].ln() - reference[i].ln())).collect();
    let n_valid = g.iter().flatten().count();
    if n_valid < 3 {
        return Err(MetricsError::InsufficientData(n_valid));
    }
    let h = (alpha[n - 1] - alpha[0]) / (n - 1) as f64;
    let dg = (0..n)
        .map(|i| {
            let gi = g[i]?;
            if i == 0 {
                Some((g[1]? - gi) / h)
            } else if i == n - 1 {
                Some((gi - g[n - 2]?) / h)
            } else {
                Some((g[i + 1]? - g[i - 1]?) / (2.0 * h))
            }
        })
        .collect();
    Ok(FsdProfile { alpha: alpha.to_vec(), g, dg })
}

/// FSD straight from perturbation-force norms.
pub fn fsd_from_delta_norms(model: &[f64], reference: &[f64], alpha: &[f64]) -> Result<f64, MetricsError> {
    let p = fsd_profile_from_delta_norms(model, reference, alpha)?;
    p.max_abs_derivative(|_| true).ok_or(MetricsError::InsufficientData(p.n_valid_points()))
}

fn check_pair(model: &ScanCurve, reference: &ScanCurve) -> Result<(), MetricsError> {
    if model.alpha_grid.len() != reference.alpha_grid.len()
        || model.alpha_grid.iter().zip(&reference.alpha_grid).any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(MetricsError::GridMismatch);
    }
    Ok(())
}

pub fn fsd_profile(model: &ScanCurve, reference: &ScanCurve) -> Result<FsdProfile, MetricsError> {
    check_pair(model, reference)?;
    fsd_profile_from_delta_norms(&delta_force_norm_sq(model), &delta_force_norm_sq(reference), &reference.alpha_grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsdResult {
    pub fsd: f64,
    /// Grid points whose derivative stencil was usable.
    pub valid: Vec<bool>,
}

pub fn fsd(model: &ScanCurve, reference: &ScanCurve) -> Result<FsdResult, MetricsError> {
    let p = fsd_profile(model, reference)?;
    let fsd = p.max_abs_derivative(|_| true).ok_or(MetricsError::InsufficientData(p.n_valid_points()))?;
    Ok(FsdResult { fsd, valid: p.dg.iter().map(Option::is_some).collect() })
}

/// Where compression ends and stretching begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPoint {
    /// The reference curve's minimum-energy alpha.
    #[default]
    ReferenceMinimum,
    /// `alpha = 0`, the unperturbed structure.
    Origin,
}

impl SplitPoint {
    pub fn alpha(self, reference: &ScanCurve) -> f64 {
        match self {
            SplitPoint::ReferenceMinimum => reference.alpha_grid[reference.min_e_index],
            SplitPoint::Origin => 0.0,
        }
    }
}

fn side(p: &FsdProfile, on_side: impl Fn(f64) -> bool) -> Option<f64> {
    let points = p.alpha.iter().zip(&p.g).filter(|(a, g)| on_side(**a) && g.is_some()).count();
    if points < 3 {
        return None;
    }
    p.max_abs_derivative(on_side)
}

/// `(compress, stretch)`; a side with fewer than 3 valid points is `None`.
pub fn fsd_split_from_profile(p: &FsdProfile, split: f64) -> (Option<f64>, Option<f64>) {
    (side(p, |a| a < split), side(p, |a| a > split))
}

pub fn fsd_split(
    model: &ScanCurve,
    reference: &ScanCurve,
    split: SplitPoint,
) -> Result<(Option<f64>, Option<f64>), MetricsError> {
    let p = fsd_profile(model, reference)?;
    Ok(fsd_split_from_profile(&p, split.alpha(reference)))
}

/// Mean over frames of `|dE| / N`, in meV/atom.
pub fn mae_energy(pred: &[f64], reference: &[f64], n_atoms: usize) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() || pred.is_empty() || n_atoms == 0 {
        return Err(MetricsError::Shape(format!("{} vs {} energies", pred.len(), reference.len())));
    }
    let s: f64 = pred.iter().zip(reference).map(|(a, b)| (a - b).abs() / n_atoms as f64).sum();
    Ok(1000.0 * s / pred.len() as f64)
}

/// Mean absolute force-component error, in meV/Å.
pub fn mae_forces(pred: &[Vec<[f64; 3]>], reference: &[Vec<[f64; 3]>]) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() || pred.iter().zip(reference).any(|(a, b)| a.len() != b.len()) {
        return Err(MetricsError::Shape("force arrays differ in shape".into()));
    }
    let (mut s, mut n) = (0.0, 0usize);
    for (a, b) in pred.iter().zip(reference) {
        for (x, y) in a.iter().zip(b) {
            for k in 0..3 {
                s += (x[k] - y[k]).abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(MetricsError::Shape("no force components".into()));
    }
    Ok(1000.0 * s / n as f64)
}

/// Evaluates `ff` on every frame of `scan`.
pub fn scan_curve<F: ForceField + ?Sized>(
    scan: &BondScan,
    id: impl Into<String>,
    source: impl Into<String>,
    ff: &F,
) -> Result<ScanCurve, PotentialError> {
    let (energies, forces) = scan.frames.iter().map(|p| ff.energy_forces(p)).collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
    ScanCurve::new(id, source, scan.alpha_grid.clone(), energies, forces).map_err(|e| PotentialError::Shape(e.to_string()))
}

/// `d ln|dF|^2 / d alpha` of a model along `scan` from the force Jacobian
/// rather than finite differences over the grid; a cross-check of the model
/// half of `g`. `dF` is taken from the model's own minimum-energy frame, whose
/// entry is `None` along with any frame below the floor.
pub fn model_log_slope_autodiff(model: &Potential, scan: &BondScan) -> Result<Vec<Option<f64>>, PotentialError> {
    let species = scan.base.species();
    // frames move as x_i + alpha h_i r
    let v: Vec<[f64; 3]> = scan.labels.iter().map(|&h| scan.direction.map(|d| f64::from(h) * d)).collect();
    let mut energies = Vec::with_capacity(scan.frames.len());
    let mut forces = Vec::with_capacity(scan.frames.len());
    let mut slopes = Vec::with_capacity(scan.frames.len());
    for p in &scan.frames {
        energies.push(model.energy_at(species, p)?);
        let (f, jv) = model.force_derivative_at(species, p, &v)?;
        forces.push(f);
        slopes.push(jv);
    }
    let m0 = argmin(&energies);
    let delta: Vec<Vec<[f64; 3]>> = forces
        .iter()
        .map(|f| f.iter().zip(&forces[m0]).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect())
        .collect();
    let norms: Vec<f64> = delta.iter().map(|d| d.iter().flatten().map(|x| x * x).sum()).collect();
    let floor = EPS_FLOOR * norms.iter().copied().fold(0.0, f64::max);
    Ok(delta
        .iter()
        .zip(&slopes)
        .zip(&norms)
        .enumerate()
        .map(|(m, ((d, jv), &n))| {
            (m != m0 && n > floor).then(|| {
                2.0 * d.iter().flatten().zip(jv.iter().flatten()).map(|(a, b)| a * b).sum::<f64>() / n
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub curves: Vec<ScanCurve>,
}

#[cfg(test)]
mod tests;
