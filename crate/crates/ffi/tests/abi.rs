use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use bsct_ffi::*;
use bsct_lab::chem::{library, xyz};
use bsct_lab::potential::{checkpoint, Potential, PotentialConfig, ReferencePotential};

fn cstring(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(bsct_last_error()) }.to_string_lossy().into_owned()
}

fn structure(s: &bsct_lab::chem::Structure) -> *mut BsctStructure {
    let text = cstring(&xyz::write_xyz(s));
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { bsct_structure_from_xyz(text.as_ptr(), &mut out) }, BsctStatus::Ok);
    out
}

fn reference() -> *mut BsctModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bsct_model_reference(&mut m) }, BsctStatus::Ok);
    m
}

#[test]
fn reference_energy_matches_the_library() {
    let ethane = library::ethane();
    let s = structure(&ethane);
    let m = reference();
    let n = unsafe { bsct_structure_atom_count(s) };
    assert_eq!(n, ethane.len());
    let mut pos = vec![0.0; 3 * n];
    assert_eq!(unsafe { bsct_structure_positions(s, pos.as_mut_ptr(), pos.len()) }, BsctStatus::Ok);
    pos[0] += 0.05;
    let (mut e, mut f) = (0.0, vec![0.0; 3 * n]);
    assert_eq!(unsafe { bsct_energy_forces(m, s, pos.as_ptr(), &mut e, f.as_mut_ptr()) }, BsctStatus::Ok);
    let shifted: Vec<[f64; 3]> = pos.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let (e_ref, f_ref) = ReferencePotential::new(&ethane).energy_forces(&shifted);
    assert!((e - e_ref).abs() < 1e-9);
    for (a, b) in f.iter().zip(f_ref.iter().flatten()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(unsafe { bsct_structure_positions(s, pos.as_mut_ptr(), 2) }, BsctStatus::BufferTooSmall);
    unsafe {
        bsct_model_free(m);
        bsct_structure_free(s);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut s = ptr::null_mut();
    let bad = cstring("2\n\nC 0 0 0\n");
    assert_eq!(unsafe { bsct_structure_from_xyz(bad.as_ptr(), &mut s) }, BsctStatus::Parse);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { bsct_structure_from_xyz(ptr::null(), &mut s) }, BsctStatus::NullPointer);
    assert!(last_error().contains("text"));

    let missing = cstring("/nonexistent/model.bsct");
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bsct_model_load(missing.as_ptr(), &mut m) }, BsctStatus::Io);
    let missing = cstring("/nonexistent/a.xyz");
    assert_eq!(unsafe { bsct_structure_load(missing.as_ptr(), &mut s) }, BsctStatus::Io);

    let tmp = tempfile::tempdir().unwrap();
    let junk = tmp.path().join("junk.bsct");
    std::fs::write(&junk, b"nonsense").unwrap();
    let junk = cstring(junk.to_str().unwrap());
    assert_eq!(unsafe { bsct_model_load(junk.as_ptr(), &mut m) }, BsctStatus::Parse);

    // success clears the message
    let r = reference();
    assert!(last_error().is_empty());
    let mut drift = 0.0;
    let mut jump = 0.0;
    let s = structure(&library::water());
    assert_eq!(unsafe { bsct_run_nve(r, s, 0, 1.0, 10.0, 0, &mut drift, &mut jump) }, BsctStatus::InvalidArgument);
    assert_eq!(unsafe { bsct_run_nve(r, s, 10, 1.0, 10.0, 0, ptr::null_mut(), &mut jump) }, BsctStatus::NullPointer);
    unsafe {
        bsct_structure_free(s);
        bsct_model_free(r);
        bsct_structure_free(ptr::null_mut());
        bsct_model_free(ptr::null_mut());
        assert_eq!(bsct_structure_atom_count(ptr::null()), 0);
    }
}

#[test]
fn checkpoint_models_evaluate_and_reject_unknown_species() {
    let cfg = PotentialConfig { embed_dim: 8, n_heads: 2, n_radial: 8, l_max: 1, k: 4, n_layers: 1, ..Default::default() };
    let model = Potential::new(cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.bsct");
    checkpoint::save(&model, &path).unwrap();
    let path = cstring(path.to_str().unwrap());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bsct_model_load(path.as_ptr(), &mut m) }, BsctStatus::Ok);
    let methanol = library::methanol();
    let s = structure(&methanol);
    let (mut e, mut f) = (0.0, vec![0.0; 3 * methanol.len()]);
    assert_eq!(unsafe { bsct_energy_forces(m, s, ptr::null(), &mut e, f.as_mut_ptr()) }, BsctStatus::Ok);
    let (e_lib, _) = model.energy_forces(&methanol).unwrap();
    assert_eq!(e, e_lib);

    // sulfur is a known element without an embedding in this model
    let sulfur = cstring("1\n\nS 0 0 0\n");
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { bsct_structure_from_xyz(sulfur.as_ptr(), &mut g) }, BsctStatus::Ok);
    let mut f1 = [0.0; 3];
    assert_eq!(unsafe { bsct_energy_forces(m, g, ptr::null(), &mut e, f1.as_mut_ptr()) }, BsctStatus::Potential);
    assert!(last_error().contains("16"), "{}", last_error());
    unsafe { bsct_structure_free(g) };
    unsafe {
        bsct_model_free(m);
        bsct_structure_free(s);
    }
}

#[test]
fn nve_and_jump_statistics() {
    let s = structure(&library::ethane());
    let r = reference();
    let (mut drift, mut jump) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { bsct_run_nve(r, s, 500, 0.5, 100.0, 3, &mut drift, &mut jump) }, BsctStatus::Ok);
    assert!(drift.is_finite() && drift < 1.0, "{drift}");
    assert!(jump >= 0.0);

    let times = [0.0, 5.0, 10.0, 15.0, 20.0];
    let temps = [300.0, 250.0, 400.0, 100.0, 180.0];
    let mut out = 0.0;
    assert_eq!(unsafe { bsct_max_temp_jump(times.as_ptr(), temps.as_ptr(), 5, 10.0, &mut out) }, BsctStatus::Ok);
    assert_eq!(out, 150.0);
    let back = [0.0, 5.0, 3.0];
    assert_eq!(
        unsafe { bsct_max_temp_jump(back.as_ptr(), temps.as_ptr(), 3, 10.0, &mut out) },
        BsctStatus::InvalidArgument
    );
    unsafe {
        bsct_model_free(r);
        bsct_structure_free(s);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bsct.h")).unwrap();
    let lib = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = lib
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert_eq!(exports.len(), 13);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
    assert!(header.contains("typedef struct BsctModel BsctModel;"));
    assert!(header.contains("BSCT_STATUS_OK = 0"));
}

/// Directory holding the built static library, next to the test executable.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libbsct_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let dir = env!("CARGO_MANIFEST_DIR");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(format!("{dir}/tests/c_smoke.c"))
        .arg(format!("-I{dir}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    // internal forces sum to zero
    assert!(fields[2].parse::<f64>().unwrap().abs() < 1e-6, "{text}");
}
