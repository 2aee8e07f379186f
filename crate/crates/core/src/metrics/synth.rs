//! Two synthetic 1-D energy curves against a quadratic truth: one that drifts
//! away smoothly, and one that additionally hides a narrow spurious minimum.

use std::str::FromStr;

use super::ScanCurve;

const K: f64 = 2.0;
const CUBIC: f64 = 0.2;
const DIP_DEPTH: f64 = 0.1;
const DIP_CENTER: f64 = 0.6;
const DIP_WIDTH: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PesKind {
    /// Quadratic plus a cubic drift; smooth.
    Pes1,
    /// `Pes1` plus a Gaussian dip deep enough to form a second minimum.
    Pes2,
}

impl FromStr for PesKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pes1" => Ok(PesKind::Pes1),
            "pes2" => Ok(PesKind::Pes2),
            other => Err(format!("unknown synthetic surface '{other}' (expected pes1 or pes2)")),
        }
    }
}

fn reference(a: f64) -> (f64, f64) {
    (0.5 * K * a * a, K * a)
}

fn model(kind: PesKind, a: f64) -> (f64, f64) {
    let (e, de) = reference(a);
    let (mut e, mut de) = (e + CUBIC * a.powi(3), de + 3.0 * CUBIC * a * a);
    if kind == PesKind::Pes2 {
        let x = (a - DIP_CENTER) / DIP_WIDTH;
        let g = (-0.5 * x * x).exp();
        e -= DIP_DEPTH * g;
        de += DIP_DEPTH * g * x / DIP_WIDTH;
    }
    (e, de)
}

fn curve(id: &str, source: &str, grid: &[f64], f: impl Fn(f64) -> (f64, f64)) -> ScanCurve {
    let (energies, forces) = grid
        .iter()
        .map(|&a| {
            let (e, de) = f(a);
            (e, vec![[-de, 0.0, 0.0]])
        })
        .unzip();
    ScanCurve::new(id, source, grid.to_vec(), energies, forces).expect("consistent lengths")
}

/// `(reference, model)` curves on `grid`, with forces on one atom's x component.
pub fn synth_pes(kind: PesKind, grid: &[f64]) -> (ScanCurve, ScanCurve) {
    let name = match kind {
        PesKind::Pes1 => "pes1",
        PesKind::Pes2 => "pes2",
    };
    (curve(name, "reference", grid, reference), curve(name, name, grid, |a| model(kind, a)))
}

/// Number of strict interior local minima.
pub fn local_minima(energies: &[f64]) -> usize {
    energies.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count()
}

/// Figure-style comparison of the two synthetic surfaces against the truth.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SynthDemo {
    pub grid_points: usize,
    pub fsd_pes1: f64,
    pub fsd_pes2: f64,
    pub fsd_ratio: f64,
    /// meV/Å
    pub force_mae_pes1: f64,
    pub force_mae_pes2: f64,
    /// meV/atom
    pub energy_mae_pes1: f64,
    pub energy_mae_pes2: f64,
    pub minima_pes1: usize,
    pub minima_pes2: usize,
}

/// Evaluates both surfaces on `grid`.
pub fn synth_demo(grid: &[f64]) -> Result<SynthDemo, super::MetricsError> {
    let (reference, p1) = synth_pes(PesKind::Pes1, grid);
    let (_, p2) = synth_pes(PesKind::Pes2, grid);
    let fsd_pes1 = super::fsd(&p1, &reference)?.fsd;
    let fsd_pes2 = super::fsd(&p2, &reference)?.fsd;
    Ok(SynthDemo {
        grid_points: grid.len(),
        fsd_pes1,
        fsd_pes2,
        fsd_ratio: fsd_pes2 / fsd_pes1,
        force_mae_pes1: super::mae_forces(&p1.forces, &reference.forces)?,
        force_mae_pes2: super::mae_forces(&p2.forces, &reference.forces)?,
        energy_mae_pes1: super::mae_energy(&p1.energies, &reference.energies, 1)?,
        energy_mae_pes2: super::mae_energy(&p2.energies, &reference.energies, 1)?,
        minima_pes1: local_minima(&p1.energies),
        minima_pes2: local_minima(&p2.energies),
    })
}
