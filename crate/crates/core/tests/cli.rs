use std::path::Path;
use std::process::{Command, Output};

use bsct_lab::chem::{library, xyz, Structure};
use bsct_lab::scanner;

fn bsct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsct")).args(args).env_remove("BSCT_JOBS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bsct(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_structure(dir: &Path, s: &Structure) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join(format!("{}.xyz", s.tag)), xyz::write_xyz(s)).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Ethane input, generated scans and reference curves.
fn ethane_curves(tmp: &Path) -> std::path::PathBuf {
    let input = tmp.join("in");
    write_structure(&input, &library::ethane());
    let scans = tmp.join("scans");
    ok(&["scan", "generate", "--in", p(&input), "--out", p(&scans)]);
    let curves = tmp.join("ref.json");
    ok(&["--no-timestamp", "scan", "evaluate", "--scans", p(&scans), "--model", "reference", "--out", p(&curves)]);
    curves
}

#[test]
fn invalid_flags_are_usage_errors() {
    assert_eq!(code(&bsct(&["--bogus"])), 2);
    assert_eq!(code(&bsct(&["scan", "generate", "--in", "x"])), 2);
    assert_eq!(code(&bsct(&["md", "npt", "--model", "reference", "--in", "x.xyz"])), 2);
    assert_eq!(code(&bsct(&["--jobs", "0", "config"])), 2);
    assert_eq!(code(&bsct(&["--help"])), 0);
}

#[test]
fn unknown_configuration_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "potential.k = 12\npotential.kay = 3\n").unwrap();
    let out = bsct(&["--config", p(&cfg), "config"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kay"));

    std::fs::write(&cfg, "potential.k = 12\n").unwrap();
    let text = ok(&["--config", p(&cfg), "--set", "md.steps=7", "config"]);
    assert!(text.contains("potential.k = 12\n") && text.contains("md.steps = 7\n"), "{text}");
    assert!(text.contains("potential.r_c = 6.0\n"));
}

#[test]
fn ethane_yields_one_scan_of_100_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_structure(&input, &library::ethane());
    let out_dir = tmp.path().join("scans");
    let stdout = ok(&["scan", "generate", "--in", p(&input), "--out", p(&out_dir)]);
    assert!(stdout.contains("ethane: accept bond"), "{stdout}");
    let scans = scanner::load_scans(&out_dir).unwrap();
    assert_eq!(scans.len(), 1);
    assert_eq!(scans[0].1.frames.len(), 100);

    let two = tmp.path().join("two");
    ok(&["scan", "generate", "--in", p(&input), "--out", p(&two), "--frames", "2"]);
    let scans = scanner::load_scans(&two).unwrap();
    assert_eq!(scans[0].1.frames.len(), 2);
}

#[test]
fn overlapping_candidate_is_rejected_with_reason() {
    let tmp = tempfile::tempdir().unwrap();
    // one hydrogen on each carbon; compressing the C-C bond pushes them together
    let s = Structure::new(
        vec![6, 6, 1, 1],
        vec![[0.0; 3], [1.5, 0.0, 0.0], [0.2, 1.0, 0.0], [1.3, 1.0, 0.0]],
        None,
        "clash",
    )
    .unwrap();
    let input = tmp.path().join("in");
    write_structure(&input, &s);
    let out = bsct(&["scan", "generate", "--in", p(&input), "--out", p(&tmp.path().join("o")), "--bond-types", "C-C"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("clash: reject bond 0-1: overlap"), "{stdout}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scans"));
}

#[test]
fn outputs_are_reproducible_without_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = ethane_curves(tmp.path());
    let again = tmp.path().join("again.json");
    ok(&["--no-timestamp", "scan", "evaluate", "--scans", p(&tmp.path().join("scans")), "--model", "reference", "--out", p(&again)]);
    assert_eq!(std::fs::read(&curves).unwrap(), std::fs::read(&again).unwrap());

    let stamped = tmp.path().join("stamped.json");
    ok(&["scan", "evaluate", "--scans", p(&tmp.path().join("scans")), "--model", "reference", "--out", p(&stamped)]);
    assert!(json(&stamped).get("generated_at_unix").is_some());
    assert!(json(&curves).get("generated_at_unix").is_none());
}

#[test]
fn fsd_of_reference_against_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = ethane_curves(tmp.path());
    let report = tmp.path().join("fsd.json");
    let csv = tmp.path().join("fsd.csv");
    ok(&["--no-timestamp", "fsd", "--model", p(&curves), "--ref", p(&curves), "--out", p(&report), "--csv", p(&csv)]);
    let v = json(&report);
    assert_eq!(v["kind"], "fsd");
    assert_eq!(v["model"], "reference");
    for s in v["scans"].as_array().unwrap() {
        assert_eq!(s["fsd_full"].as_f64().unwrap(), 0.0);
    }
    assert_eq!(v["aggregate"]["mean_full"].as_f64().unwrap(), 0.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);
}

#[test]
fn mismatched_grids_fail_with_a_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = ethane_curves(tmp.path());
    let mut v = json(&curves);
    v["curves"][0]["alpha_grid"][3] = serde_json::json!(0.123456);
    let bent = tmp.path().join("bent.json");
    std::fs::write(&bent, serde_json::to_string(&v).unwrap()).unwrap();
    let out = bsct(&["fsd", "--model", p(&bent), "--ref", p(&curves), "--out", p(&tmp.path().join("r.json"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
}

#[test]
fn demo_prints_the_synthetic_comparison() {
    let out = ok(&["fsd", "--demo", "pes2"]);
    assert!(out.contains("pes1") && out.contains("pes2") && out.contains("FSD ratio"), "{out}");
    assert_eq!(code(&bsct(&["fsd", "--demo", "pes3"])), 2);
}

#[test]
fn reference_nve_stays_within_the_drift_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("ethane.xyz");
    std::fs::write(&input, xyz::write_xyz(&library::ethane())).unwrap();
    let out = tmp.path().join("md.json");
    let csv = tmp.path().join("md.csv");
    let stdout = ok(&[
        "--no-timestamp", "md", "nve", "--model", "reference", "--in", p(&input), "--steps", "1000", "--temperature", "100",
        "--out", p(&out), "--csv", p(&csv),
    ]);
    assert!(stdout.contains("within the 1 meV/atom budget"), "{stdout}");
    let v = json(&out);
    assert!(v["energy_drift"].as_f64().unwrap() < 1.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1002);
}

#[test]
fn report_joins_three_models() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = ethane_curves(tmp.path());
    let input = tmp.path().join("ethane.xyz");
    std::fs::write(&input, xyz::write_xyz(&library::ethane())).unwrap();
    let mut inputs = Vec::new();
    for (i, label) in ["alpha", "beta", "gamma"].iter().enumerate() {
        let f = tmp.path().join(format!("{label}-fsd.json"));
        ok(&["--no-timestamp", "fsd", "--model", p(&curves), "--ref", p(&curves), "--out", p(&f), "--label", label]);
        let m = tmp.path().join(format!("{label}-md.json"));
        let seed = i.to_string();
        ok(&[
            "--no-timestamp", "--set", "md.equilibration=20", "md", "langevin", "--model", "reference", "--in", p(&input),
            "--steps", "40", "--seeds", "2", "--seed", &seed, "--temperature", "600", "--label", label, "--out", p(&m),
        ]);
        inputs.push(f);
        inputs.push(m);
    }
    let summary = tmp.path().join("summary.json");
    let mut args = vec!["--no-timestamp", "report", "--out", p(&summary), "--csv"];
    let csv = tmp.path().join("summary.csv");
    args.push(p(&csv));
    args.push("--inputs");
    args.extend(inputs.iter().map(|x| p(x)));
    ok(&args);
    let v = json(&summary);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, label) in rows.iter().zip(["alpha", "beta", "gamma"]) {
        assert_eq!(row["model"], label);
        assert_eq!(row["fsd_full"].as_f64(), Some(0.0));
        assert!(row["max_temp_jump"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);

    let bogus = tmp.path().join("bogus.json");
    std::fs::write(&bogus, "{\"kind\": \"weather\"}").unwrap();
    assert_eq!(code(&bsct(&["report", "--out", p(&summary), "--inputs", p(&bogus)])), 1);
}

#[test]
fn train_then_evaluate_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_structure(&data, &library::water());
    write_structure(&data, &library::ethane());
    let ckpt = tmp.path().join("model.bsct");
    let history = tmp.path().join("history.csv");
    let small = [
        "--set", "potential.embed_dim=8", "--set", "potential.n_heads=2", "--set", "potential.n_radial=8",
        "--set", "potential.l_max=1", "--set", "potential.k=4", "--set", "potential.n_layers=1",
        "--set", "dataset.frames_per_molecule=3",
    ];
    let mut args = small.to_vec();
    args.extend(["train", "--data", p(&data), "--out", p(&ckpt), "--epochs", "2", "--history", p(&history)]);
    ok(&args);
    assert_eq!(std::fs::read_to_string(&history).unwrap().lines().count(), 3);

    let input = tmp.path().join("in");
    write_structure(&input, &library::ethane());
    let scans = tmp.path().join("scans");
    ok(&["scan", "generate", "--in", p(&input), "--out", p(&scans)]);
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    for out in [&a, &b] {
        ok(&["--no-timestamp", "scan", "evaluate", "--scans", p(&scans), "--model", p(&ckpt), "--out", p(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(json(&a)["curves"][0]["source"], "model");

    let garbage = tmp.path().join("garbage.bsct");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let out = bsct(&["scan", "evaluate", "--scans", p(&scans), "--model", p(&garbage), "--out", p(&a)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_frame_names_the_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_structure(&input, &library::ethane());
    let scans = tmp.path().join("scans");
    ok(&["scan", "generate", "--in", p(&input), "--out", p(&scans)]);
    let dir = std::fs::read_dir(&scans).unwrap().next().unwrap().unwrap().path();
    let victim = dir.join("frames.xyz");
    assert!(victim.exists());
    std::fs::remove_file(victim).unwrap();
    let out = bsct(&["scan", "evaluate", "--scans", p(&scans), "--model", "reference", "--out", p(&tmp.path().join("c.json"))]);
    assert_eq!(code(&out), 1);
    let name = dir.file_name().unwrap().to_string_lossy().into_owned();
    assert!(String::from_utf8_lossy(&out.stderr).contains(&name), "{}", String::from_utf8_lossy(&out.stderr));
}
