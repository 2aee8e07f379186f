//! C interface to the benchmark library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`BsctStatus`]; on failure the message is kept per thread and can
//! be read with [`bsct_last_error`]. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bsct_lab::chem::{xyz, ChemError, Structure};
use bsct_lab::dynamics::{self, DynamicsError, MdState, RunSettings};
use bsct_lab::potential::{checkpoint, ForceField, Potential, PotentialError, ReferencePotential};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsctStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Potential = 5,
    Dynamics = 6,
    /// The output buffer is too small; nothing was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// A molecular structure: species, positions and bonds.
pub struct BsctStructure(Structure);

/// Either the analytic reference potential or a trained model.
pub enum BsctModel {
    Reference,
    Learned(Potential),
}

struct Failure(BsctStatus, String);

impl From<ChemError> for Failure {
    fn from(e: ChemError) -> Self {
        let status = match e {
            ChemError::Io { .. } => BsctStatus::Io,
            ChemError::Parse { .. } => BsctStatus::Parse,
            _ => BsctStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<PotentialError> for Failure {
    fn from(e: PotentialError) -> Self {
        let status = match e {
            PotentialError::Io { .. } => BsctStatus::Io,
            PotentialError::Checkpoint(_) => BsctStatus::Parse,
            _ => BsctStatus::Potential,
        };
        Failure(status, e.to_string())
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        Failure(BsctStatus::Dynamics, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(BsctStatus::InvalidArgument, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BsctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BsctStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BsctStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a valid pointer to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(BsctStatus::NullPointer, format!("{name} is null")))
}

fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(BsctStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and, by contract, nul-terminated.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(BsctStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bsct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bsct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses one XYZ frame.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bsct_structure_from_xyz(text: *const c_char, out: *mut *mut BsctStructure) -> BsctStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        out_ptr(out, "out")?;
        let s = xyz::parse_xyz(text)?;
        *out = Box::into_raw(Box::new(BsctStructure(s)));
        Ok(())
    })
}

/// Reads an XYZ file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bsct_structure_load(path: *const c_char, out: *mut *mut BsctStructure) -> BsctStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        out_ptr(out, "out")?;
        let s = xyz::read_xyz_file(Path::new(path))?;
        *out = Box::into_raw(Box::new(BsctStructure(s)));
        Ok(())
    })
}

/// Releases a structure; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bsct_structure_free(s: *mut BsctStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of atoms, or 0 for null.
///
/// # Safety
/// `s` must be null or a live structure.
#[no_mangle]
pub unsafe extern "C" fn bsct_structure_atom_count(s: *const BsctStructure) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the positions (Å, `3 * n_atoms` values, x y z per atom) into `out`.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bsct_structure_positions(
    s: *const BsctStructure,
    out: *mut f64,
    capacity: usize,
) -> BsctStatus {
    guard(|| {
        let s = non_null(s, "structure")?;
        out_ptr(out, "out")?;
        let flat: Vec<f64> = s.0.positions().iter().flatten().copied().collect();
        if capacity < flat.len() {
            return Err(Failure(BsctStatus::BufferTooSmall, format!("need {} values", flat.len())));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// The analytic reference potential.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bsct_model_reference(out: *mut *mut BsctModel) -> BsctStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(BsctModel::Reference));
        Ok(())
    })
}

/// Loads a trained model checkpoint.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bsct_model_load(path: *const c_char, out: *mut *mut BsctModel) -> BsctStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        out_ptr(out, "out")?;
        let p = checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(BsctModel::Learned(p)));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bsct_model_free(m: *mut BsctModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

fn with_field<R>(
    model: &BsctModel,
    s: &Structure,
    f: impl FnOnce(&dyn ForceField) -> Result<R, Failure>,
) -> Result<R, Failure> {
    match model {
        BsctModel::Reference => f(&ReferencePotential::new(s)),
        BsctModel::Learned(p) => f(&p.bind(s.species())?),
    }
}

/// Energy (eV) and forces (eV/Å, `3 * n_atoms` values) of `structure`.
/// `positions` may be null to use the structure's own coordinates; otherwise
/// it holds `3 * n_atoms` values. The reference potential keeps the bonds of
/// `structure`.
///
/// # Safety
/// Pointers must be valid for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn bsct_energy_forces(
    model: *const BsctModel,
    structure: *const BsctStructure,
    positions: *const f64,
    energy: *mut f64,
    forces: *mut f64,
) -> BsctStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let s = &non_null(structure, "structure")?.0;
        out_ptr(energy, "energy")?;
        out_ptr(forces, "forces")?;
        let n = s.len();
        let pos: Vec<[f64; 3]> = if positions.is_null() {
            s.positions().to_vec()
        } else {
            std::slice::from_raw_parts(positions, 3 * n).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
        };
        let (e, f) = with_field(model, s, |ff| Ok(ff.energy_forces(&pos)?))?;
        *energy = e;
        ptr::copy_nonoverlapping(f.as_flattened().as_ptr(), forces, 3 * n);
        Ok(())
    })
}

/// Velocity-Verlet run from `structure` with Maxwell-Boltzmann velocities at
/// `temperature` (K). Writes the energy drift (meV/atom) and the largest
/// kinetic-temperature increase within `jump_window` fs (K). A blow-up is
/// reported as [`BsctStatus::Dynamics`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bsct_run_nve(
    model: *const BsctModel,
    structure: *const BsctStructure,
    steps: usize,
    dt: f64,
    temperature: f64,
    seed: u64,
    energy_drift: *mut f64,
    max_temp_jump: *mut f64,
) -> BsctStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let s = &non_null(structure, "structure")?.0;
        out_ptr(energy_drift, "energy_drift")?;
        out_ptr(max_temp_jump, "max_temp_jump")?;
        if steps == 0 || !(dt > 0.0) || !(temperature >= 0.0) {
            return Err(invalid("need steps > 0, dt > 0 and temperature >= 0"));
        }
        let report = with_field(model, s, |ff| {
            let mut state = MdState::at_rest(s.positions().to_vec(), s.masses())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            state.thermalize(temperature, &mut rng);
            let settings = RunSettings { dt, steps, thermostat: None, jump_window: 10.0 };
            Ok(dynamics::run(ff, state, &settings, &mut rng)?.0)
        })?;
        if let Some(step) = report.aborted_at {
            return Err(Failure(BsctStatus::Dynamics, format!("integration blew up at step {step}")));
        }
        *energy_drift = report.energy_drift;
        *max_temp_jump = report.max_temp_jump;
        Ok(())
    })
}

/// Largest increase `T(t2) - T(t1)` with `t1 <= t2 <= t1 + window` over a
/// series of `n` samples with increasing times.
///
/// # Safety
/// `times` and `temps` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn bsct_max_temp_jump(
    times: *const f64,
    temps: *const f64,
    n: usize,
    window: f64,
    out: *mut f64,
) -> BsctStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if n == 0 {
            *out = 0.0;
            return Ok(());
        }
        non_null(times, "times")?;
        non_null(temps, "temps")?;
        let t = std::slice::from_raw_parts(times, n);
        if t.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("times must be non-decreasing"));
        }
        *out = dynamics::max_temp_jump(t, std::slice::from_raw_parts(temps, n), window);
        Ok(())
    })
}
