//! Molecular dynamics: velocity-Verlet (NVE), BAOAB Langevin (NVT), geometry
//! relaxation and the high-temperature stability protocol.

mod protocol;

pub use protocol::{
    relax, run_stability_protocol, summarize, Relaxed, RelaxSettings, StabilityConfig, StabilitySummary,
    SummaryRow, TrajectoryReport,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::units::{ACCEL_CONVERSION, BOLTZMANN, KINETIC_CONVERSION};
use crate::potential::{ForceField, PotentialError};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("integration blew up at step {step}")]
    Blowup { step: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdState {
    /// Å
    pub positions: Vec<[f64; 3]>,
    /// Å/fs
    pub velocities: Vec<[f64; 3]>,
    /// amu
    pub masses: Vec<f64>,
    /// fs
    pub time: f64,
}

impl MdState {
    pub fn at_rest(positions: Vec<[f64; 3]>, masses: Vec<f64>) -> Result<Self, DynamicsError> {
        let n = positions.len();
        Self::new(positions, vec![[0.0; 3]; n], masses)
    }

    pub fn new(positions: Vec<[f64; 3]>, velocities: Vec<[f64; 3]>, masses: Vec<f64>) -> Result<Self, DynamicsError> {
        if positions.len() != velocities.len() || positions.len() != masses.len() {
            return Err(DynamicsError::Invalid("positions, velocities and masses differ in length".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(DynamicsError::Invalid("masses must be positive".into()));
        }
        if positions.iter().chain(&velocities).flatten().any(|x| !x.is_finite()) {
            return Err(DynamicsError::Invalid("non-finite position or velocity".into()));
        }
        Ok(Self { positions, velocities, masses, time: 0.0 })
    }

    /// eV
    pub fn kinetic_energy(&self) -> f64 {
        kinetic_energy(&self.velocities, &self.masses)
    }

    pub fn temperature(&self) -> f64 {
        kinetic_temperature(&self.velocities, &self.masses)
    }

    /// Maxwell-Boltzmann velocities at `temperature` with the centre-of-mass
    /// drift removed.
    pub fn thermalize<R: Rng>(&mut self, temperature: f64, rng: &mut R) {
        for (v, &m) in self.velocities.iter_mut().zip(&self.masses) {
            let s = thermal_speed(temperature, m);
            for c in v.iter_mut() {
                *c = s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let total: f64 = self.masses.iter().sum();
        for k in 0..3 {
            let p: f64 = self.velocities.iter().zip(&self.masses).map(|(v, m)| v[k] * m).sum();
            for v in &mut self.velocities {
                v[k] -= p / total;
            }
        }
    }
}

/// Per-component velocity standard deviation (Å/fs) at equilibrium.
fn thermal_speed(temperature: f64, mass: f64) -> f64 {
    (BOLTZMANN * temperature / mass * ACCEL_CONVERSION).sqrt()
}

pub fn kinetic_energy(velocities: &[[f64; 3]], masses: &[f64]) -> f64 {
    0.5 * KINETIC_CONVERSION
        * velocities.iter().zip(masses).map(|(v, m)| m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).sum::<f64>()
}

/// `2 KE / (3 N k_B)` in K.
pub fn kinetic_temperature(velocities: &[[f64; 3]], masses: &[f64]) -> f64 {
    assert!(!velocities.is_empty(), "kinetic temperature of an empty system");
    2.0 * kinetic_energy(velocities, masses) / (3.0 * velocities.len() as f64 * BOLTZMANN)
}

/// Largest signed increase `T(t2) - T(t1)` over pairs with
/// `0 <= t2 - t1 <= window`. Times must be non-decreasing.
pub fn max_temp_jump(times: &[f64], temps: &[f64], window: f64) -> f64 {
    assert_eq!(times.len(), temps.len());
    // indices of a window minimum candidate queue, temperatures increasing
    let mut queue = std::collections::VecDeque::new();
    let mut best = 0.0f64;
    for j in 0..times.len() {
        while queue.back().is_some_and(|&i: &usize| temps[i] >= temps[j]) {
            queue.pop_back();
        }
        queue.push_back(j);
        while queue.front().is_some_and(|&i| times[j] - times[i] > window) {
            queue.pop_front();
        }
        best = best.max(temps[j] - temps[queue[0]]);
    }
    best
}

/// `|E_last - E[1]| / n_atoms` in meV/atom. The first sample is skipped so a
/// first-step integrator offset does not count as drift.
pub fn energy_drift(energies: &[f64], n_atoms: usize) -> f64 {
    assert!(energies.len() >= 2, "drift needs at least two samples");
    (energies[energies.len() - 1] - energies[1]).abs() / n_atoms as f64 * 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Langevin {
    /// 1/fs
    pub friction: f64,
    /// K
    pub temperature: f64,
}

/// A running trajectory. The forces at the current positions are cached, so
/// each step costs exactly one force evaluation.
pub struct Md<'a, F: ForceField + ?Sized> {
    ff: &'a F,
    pub state: MdState,
    forces: Vec<[f64; 3]>,
    potential_energy: f64,
    steps: usize,
}

impl<'a, F: ForceField + ?Sized> Md<'a, F> {
    pub fn new(ff: &'a F, state: MdState) -> Result<Self, DynamicsError> {
        let (e, f) = evaluate(ff, &state.positions, 0)?;
        Ok(Self { ff, state, forces: f, potential_energy: e, steps: 0 })
    }

    pub fn potential_energy(&self) -> f64 {
        self.potential_energy
    }

    pub fn total_energy(&self) -> f64 {
        self.potential_energy + self.state.kinetic_energy()
    }

    pub fn forces(&self) -> &[[f64; 3]] {
        &self.forces
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn kick(&mut self, dt: f64) {
        for ((v, f), m) in self.state.velocities.iter_mut().zip(&self.forces).zip(&self.state.masses) {
            for k in 0..3 {
                v[k] += dt * f[k] / m * ACCEL_CONVERSION;
            }
        }
    }

    fn drift(&mut self, dt: f64) {
        for (x, v) in self.state.positions.iter_mut().zip(&self.state.velocities) {
            for k in 0..3 {
                x[k] += dt * v[k];
            }
        }
    }

    fn refresh(&mut self) -> Result<(), DynamicsError> {
        let step = self.steps + 1;
        if self.state.positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(DynamicsError::Blowup { step });
        }
        let (e, f) = evaluate(self.ff, &self.state.positions, step)?;
        self.potential_energy = e;
        self.forces = f;
        Ok(())
    }

    pub fn verlet_step(&mut self, dt: f64) -> Result<(), DynamicsError> {
        assert!(dt > 0.0, "time step must be positive");
        self.kick(0.5 * dt);
        self.drift(dt);
        self.refresh()?;
        self.kick(0.5 * dt);
        self.finish(dt)
    }

    /// BAOAB splitting. With zero friction and zero temperature the O step is
    /// the identity.
    pub fn langevin_step<R: Rng>(&mut self, dt: f64, bath: Langevin, rng: &mut R) -> Result<(), DynamicsError> {
        assert!(dt > 0.0, "time step must be positive");
        assert!(bath.friction >= 0.0 && bath.temperature >= 0.0, "friction and temperature must be >= 0");
        self.kick(0.5 * dt);
        self.drift(0.5 * dt);
        let c1 = (-bath.friction * dt).exp();
        let c2 = (1.0 - c1 * c1).sqrt();
        for (v, &m) in self.state.velocities.iter_mut().zip(&self.state.masses) {
            let s = c2 * thermal_speed(bath.temperature, m);
            for c in v.iter_mut() {
                *c = c1 * *c + s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.drift(0.5 * dt);
        self.refresh()?;
        self.kick(0.5 * dt);
        self.finish(dt)
    }

    fn finish(&mut self, dt: f64) -> Result<(), DynamicsError> {
        self.steps += 1;
        self.state.time += dt;
        if self.state.velocities.iter().flatten().any(|x| !x.is_finite()) {
            return Err(DynamicsError::Blowup { step: self.steps });
        }
        Ok(())
    }
}

fn evaluate<F: ForceField + ?Sized>(
    ff: &F,
    positions: &[[f64; 3]],
    step: usize,
) -> Result<(f64, Vec<[f64; 3]>), DynamicsError> {
    match ff.energy_forces(positions) {
        Ok((e, f)) if e.is_finite() && f.iter().flatten().all(|x| x.is_finite()) => Ok((e, f)),
        Ok(_) | Err(PotentialError::NonFinite(_)) => Err(DynamicsError::Blowup { step }),
        Err(e) => Err(e.into()),
    }
}

/// Per-step series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdReport {
    pub n_atoms: usize,
    pub dt: f64,
    pub time: Vec<f64>,
    pub potential_energy: Vec<f64>,
    pub kinetic_energy: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub temperature: Vec<f64>,
    /// Step at which the run aborted on non-finite values.
    pub aborted_at: Option<usize>,
    /// meV/atom
    pub energy_drift: f64,
    /// K
    pub max_temp_jump: f64,
}

#[derive(Serialize)]
struct SeriesRow {
    step: usize,
    time: f64,
    e_total: f64,
    e_kin: f64,
    t_kin: f64,
}

impl MdReport {
    pub fn csv(&self) -> String {
        let rows: Vec<SeriesRow> = (0..self.time.len())
            .map(|i| SeriesRow {
                step: i,
                time: self.time[i],
                e_total: self.total_energy[i],
                e_kin: self.kinetic_energy[i],
                t_kin: self.temperature[i],
            })
            .collect();
        crate::util::csv_string(&rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// fs
    pub dt: f64,
    pub steps: usize,
    /// `None` integrates NVE with velocity Verlet.
    pub thermostat: Option<Langevin>,
    /// fs
    pub jump_window: f64,
}

/// Runs `settings.steps` steps from `state`. A blow-up ends the run early and
/// is recorded in the report instead of being returned as an error.
pub fn run<F: ForceField + ?Sized, R: Rng>(
    ff: &F,
    state: MdState,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<(MdReport, MdState), DynamicsError> {
    let mut md = Md::new(ff, state)?;
    let n = md.state.positions.len();
    let mut r = MdReport {
        n_atoms: n,
        dt: settings.dt,
        time: Vec::with_capacity(settings.steps + 1),
        potential_energy: Vec::with_capacity(settings.steps + 1),
        kinetic_energy: Vec::with_capacity(settings.steps + 1),
        total_energy: Vec::with_capacity(settings.steps + 1),
        temperature: Vec::with_capacity(settings.steps + 1),
        aborted_at: None,
        energy_drift: 0.0,
        max_temp_jump: 0.0,
    };
    let record = |md: &Md<F>, r: &mut MdReport| {
        let ke = md.state.kinetic_energy();
        r.time.push(md.state.time);
        r.potential_energy.push(md.potential_energy);
        r.kinetic_energy.push(ke);
        r.total_energy.push(md.potential_energy + ke);
        r.temperature.push(md.state.temperature());
    };
    record(&md, &mut r);
    for _ in 0..settings.steps {
        let step = match settings.thermostat {
            None => md.verlet_step(settings.dt),
            Some(bath) => md.langevin_step(settings.dt, bath, rng),
        };
        match step {
            Ok(()) => record(&md, &mut r),
            Err(DynamicsError::Blowup { step }) => {
                r.aborted_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if r.total_energy.len() >= 2 {
        r.energy_drift = energy_drift(&r.total_energy, n);
    }
    r.max_temp_jump = max_temp_jump(&r.time, &r.temperature, settings.jump_window);
    Ok((r, md.state))
}
