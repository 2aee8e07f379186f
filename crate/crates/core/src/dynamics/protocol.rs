use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, DynamicsError, Langevin, MdReport, MdState, RunSettings};
use crate::chem::Structure;
use crate::potential::{ForceField, PotentialError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxSettings {
    /// Largest per-atom force norm accepted as converged, eV/Å.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for RelaxSettings {
    fn default() -> Self {
        Self { tolerance: 0.02, max_steps: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub positions: Vec<[f64; 3]>,
    pub energy: f64,
    pub max_force: f64,
    pub steps: usize,
    pub converged: bool,
}

fn max_force(f: &[[f64; 3]]) -> f64 {
    f.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).fold(0.0, f64::max)
}

/// Steepest descent with a backtracking (Armijo) line search. The first trial
/// step length of each iteration is the Barzilai-Borwein estimate from the
/// previous step, and no atom moves more than 0.1 Å per trial.
pub fn relax<F: ForceField + ?Sized>(
    ff: &F,
    positions: &[[f64; 3]],
    settings: &RelaxSettings,
) -> Result<Relaxed, PotentialError> {
    let mut x = positions.to_vec();
    let (mut e, mut f) = ff.energy_forces(&x)?;
    let mut alpha: f64 = 0.01;
    let mut steps = 0;
    while steps < settings.max_steps {
        let fmax = max_force(&f);
        if fmax <= settings.tolerance {
            return Ok(Relaxed { positions: x, energy: e, max_force: fmax, steps, converged: true });
        }
        let f2: f64 = f.iter().flatten().map(|v| v * v).sum();
        let mut a = alpha.min(0.1 / fmax);
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<[f64; 3]> =
                x.iter().zip(&f).map(|(p, g)| [p[0] + a * g[0], p[1] + a * g[1], p[2] + a * g[2]]).collect();
            let (et, ft) = ff.energy_forces(&trial)?;
            if et.is_finite() && et <= e - 1e-4 * a * f2 {
                accepted = Some((trial, et, ft));
                break;
            }
            a *= 0.5;
        }
        steps += 1;
        let Some((t, et, ft)) = accepted else { break };
        // s = a f, y = f - f_new (gradient change); BB1 = s.s / s.y
        let sy: f64 = f.iter().flatten().zip(ft.iter().flatten()).map(|(g0, g1)| a * g0 * (g0 - g1)).sum();
        alpha = if sy > 0.0 { (a * a * f2 / sy).clamp(1e-5, 1.0) } else { 2.0 * a };
        x = t;
        e = et;
        f = ft;
    }
    let fmax = max_force(&f);
    Ok(Relaxed { positions: x, energy: e, max_force: fmax, steps, converged: fmax <= settings.tolerance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// K
    pub temperatures: Vec<f64>,
    pub n_seeds: usize,
    /// fs
    pub dt: f64,
    /// fs
    pub equilibration: f64,
    /// fs
    pub production: f64,
    /// 1/fs
    pub friction: f64,
    /// fs
    pub jump_window: f64,
    pub relax: RelaxSettings,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            temperatures: vec![300.0, 600.0, 1000.0],
            n_seeds: 10,
            dt: 1.0,
            equilibration: 500.0,
            production: 1000.0,
            friction: 1e-3,
            jump_window: 10.0,
            relax: RelaxSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub structure: String,
    pub structure_index: usize,
    pub temperature: f64,
    pub seed: usize,
    /// False when relaxation did not converge; the trajectory was not run.
    pub relaxed: bool,
    /// Step of a blow-up, counted from the start of equilibration.
    pub aborted_at: Option<usize>,
    /// Largest kinetic-temperature rise over the jump window during
    /// production, K.
    pub max_temp_jump: Option<f64>,
    pub mean_temperature: Option<f64>,
    /// Production-phase series.
    pub production: Option<MdReport>,
}

/// Relaxes every structure, then runs a Langevin equilibration and a
/// Langevin production phase for each (structure, temperature, seed).
/// Trajectories run in parallel; each has its own random stream, so results
/// do not depend on scheduling.
pub fn run_stability_protocol<M, F>(
    make_ff: M,
    structures: &[Structure],
    cfg: &StabilityConfig,
) -> Result<Vec<TrajectoryReport>, DynamicsError>
where
    M: Fn(&Structure) -> Result<F, PotentialError> + Sync,
    F: ForceField,
{
    if cfg.dt <= 0.0 || cfg.friction < 0.0 || cfg.temperatures.iter().any(|&t| !(t >= 0.0)) {
        return Err(DynamicsError::Invalid("dt must be positive; friction and temperatures non-negative".into()));
    }
    let relaxed: Vec<Relaxed> = structures
        .par_iter()
        .map(|s| relax(&make_ff(s)?, s.positions(), &cfg.relax))
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for si in 0..structures.len() {
        for ti in 0..cfg.temperatures.len() {
            for seed in 0..cfg.n_seeds {
                jobs.push((si, ti, seed));
            }
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(stream, &(si, ti, seed))| {
            let s = &structures[si];
            let t = cfg.temperatures[ti];
            let mut report = TrajectoryReport {
                structure: s.tag.clone(),
                structure_index: si,
                temperature: t,
                seed,
                relaxed: relaxed[si].converged,
                aborted_at: None,
                max_temp_jump: None,
                mean_temperature: None,
                production: None,
            };
            if !report.relaxed {
                return Ok(report);
            }
            let ff = make_ff(s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream as u64);
            let mut state = MdState::at_rest(relaxed[si].positions.clone(), s.masses())?;
            state.thermalize(t, &mut rng);
            let bath = Some(Langevin { friction: cfg.friction, temperature: t });
            let steps = |fs: f64| (fs / cfg.dt).round() as usize;
            let equil = RunSettings { dt: cfg.dt, steps: steps(cfg.equilibration), thermostat: bath, jump_window: cfg.jump_window };
            let (eq, state) = run(&ff, state, &equil, &mut rng)?;
            if let Some(a) = eq.aborted_at {
                report.aborted_at = Some(a);
                return Ok(report);
            }
            let prod = RunSettings { steps: steps(cfg.production), ..equil };
            let (pr, _) = run(&ff, state, &prod, &mut rng)?;
            report.aborted_at = pr.aborted_at.map(|a| a + equil.steps);
            report.max_temp_jump = Some(pr.max_temp_jump);
            report.mean_temperature = Some(pr.temperature.iter().sum::<f64>() / pr.temperature.len() as f64);
            report.production = Some(pr);
            Ok(report)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub temperature: f64,
    pub trajectories: usize,
    pub skipped: usize,
    pub aborted: usize,
    /// Mean max jump over every trajectory that reached production.
    pub mean_jump: Option<f64>,
    /// Mean max jump over trajectories that ran to completion.
    pub mean_jump_completed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub rows: Vec<SummaryRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// One row per temperature, in the order temperatures first appear.
pub fn summarize(reports: &[TrajectoryReport]) -> StabilitySummary {
    let mut temps: Vec<f64> = Vec::new();
    for r in reports {
        if !temps.contains(&r.temperature) {
            temps.push(r.temperature);
        }
    }
    let rows = temps
        .into_iter()
        .map(|t| {
            let group: Vec<&TrajectoryReport> = reports.iter().filter(|r| r.temperature == t).collect();
            let all: Vec<f64> = group.iter().filter_map(|r| r.max_temp_jump).collect();
            let done: Vec<f64> =
                group.iter().filter(|r| r.aborted_at.is_none()).filter_map(|r| r.max_temp_jump).collect();
            SummaryRow {
                temperature: t,
                trajectories: group.len(),
                skipped: group.iter().filter(|r| !r.relaxed).count(),
                aborted: group.iter().filter(|r| r.aborted_at.is_some()).count(),
                mean_jump: mean(&all),
                mean_jump_completed: mean(&done),
            }
        })
        .collect();
    StabilitySummary { rows }
}
