use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scanner::linspace;

/// 1-atom curve whose perturbation-force norm is `norm(alpha)`, with the minimum at `alpha_min`.
fn norm_curve(id: &str, grid: &[f64], alpha_min: f64, norm: impl Fn(f64) -> f64) -> ScanCurve {
    let energies = grid.iter().map(|a| (a - alpha_min).powi(2)).collect();
    let forces = grid.iter().map(|&a| vec![[norm(a).sqrt(), 0.0, 0.0]]).collect();
    ScanCurve::new(id, "test", grid.to_vec(), energies, forces).unwrap()
}

fn random_curve(rng: &mut ChaCha8Rng, grid: &[f64], n: usize) -> ScanCurve {
    let energies = grid.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let forces = grid
        .iter()
        .map(|_| (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect())
        .collect();
    ScanCurve::new("r", "random", grid.to_vec(), energies, forces).unwrap()
}

#[test]
fn delta_force_examples() {
    let grid = linspace(-1.0, 1.0, 101);
    let k = 3.0;
    let energies = grid.iter().map(|a| 0.5 * k * a * a).collect();
    let forces = grid.iter().map(|&a| vec![[-k * a, 0.0, 0.0]]).collect();
    let c = ScanCurve::new("q", "toy", grid.clone(), energies, forces).unwrap();
    assert_eq!(c.min_e_index, 50);
    let d = delta_force_norm_sq(&c);
    assert_eq!(d[50], 0.0);
    for (a, x) in grid.iter().zip(&d) {
        assert!((x - k * k * a * a).abs() < 1e-12);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = random_curve(&mut rng, &grid[..20], 4);
    let d = delta_force_norm_sq(&r);
    for m in 0..20 {
        let mut s = 0.0;
        for i in 0..4 {
            for k in 0..3 {
                s += (r.forces[m][i][k] - r.forces[r.min_e_index][i][k]).powi(2);
            }
        }
        assert!((d[m] - s).abs() < 1e-14);
    }
}

#[test]
fn argmin_ties_go_first() {
    assert_eq!(argmin(&[2.0, 1.0, 1.0, 3.0]), 1);
}

#[test]
fn identical_and_scaled_curves() {
    let (reference, model) = synth_pes(PesKind::Pes1, &linspace(-1.0, 1.0, 100));
    assert_eq!(fsd(&reference, &reference).unwrap().fsd, 0.0);
    for c in [2.5, 1e-3, 7e4] {
        let mut scaled = model.clone();
        for f in scaled.forces.iter_mut().flatten() {
            for x in f.iter_mut() {
                *x *= c;
            }
        }
        let a = fsd(&model, &reference).unwrap().fsd;
        let b = fsd(&scaled, &reference).unwrap().fsd;
        assert!((a - b).abs() <= 1e-9, "c = {c}: {a} vs {b}");
        let mut scaled_ref = reference.clone();
        scaled_ref.forces = scaled.forces.iter().zip(&reference.forces).map(|(_, r)| r.iter().map(|f| [f[0] * c, 0.0, 0.0]).collect()).collect();
        assert!(fsd(&scaled_ref, &reference).unwrap().fsd <= 1e-9);
    }
}

#[test]
fn sinusoidal_artifact_matches_dense_oracle() {
    let (eps, omega) = (0.1, 10.0);
    let grid = linspace(0.2, 1.2, 100);
    let reference: Vec<f64> = grid.iter().map(|a| a * a).collect();
    let model: Vec<f64> = grid.iter().map(|a| a * a * (1.0 + eps * (omega * a).sin())).collect();
    let got = fsd_from_delta_norms(&model, &reference, &grid).unwrap();
    // analytic |dg/dalpha| maximised on a 1e5-point grid
    let oracle = (0..100_000)
        .map(|i| {
            let a = 0.2 + i as f64 / 99_999.0;
            (eps * omega * (omega * a).cos() / (1.0 + eps * (omega * a).sin())).abs()
        })
        .fold(0.0, f64::max);
    assert!((oracle - eps * omega / (1.0 - eps * eps).sqrt()).abs() < 1e-6);
    assert!((got - oracle).abs() / oracle < 0.02, "{got} vs {oracle}");
}

#[test]
fn floor_and_insufficient_data() {
    let grid = linspace(-1.0, 1.0, 5);
    let flat = norm_curve("flat", &grid, 0.0, |_| 0.0);
    assert_eq!(fsd(&flat, &flat), Err(MetricsError::InsufficientData(0)));
    let short = linspace(0.0, 1.0, 2);
    let c = norm_curve("s", &short, 0.0, |a| 1.0 + a);
    assert!(matches!(fsd(&c, &c), Err(MetricsError::InsufficientData(_))));
    let other = norm_curve("o", &linspace(0.0, 2.0, 5), 0.0, |a| a);
    assert_eq!(fsd(&other, &flat).unwrap_err(), MetricsError::GridMismatch);
}

#[test]
fn stencils_touching_the_minimum_are_skipped() {
    let grid = linspace(-1.0, 1.0, 21);
    let (reference, model) = synth_pes(PesKind::Pes1, &grid);
    let r = fsd(&model, &reference).unwrap();
    let m = reference.min_e_index;
    assert!(!r.valid[m - 1] && !r.valid[m] && !r.valid[m + 1]);
    assert!(r.valid[0] && r.valid[20]);
}

#[test]
fn split_locality() {
    let grid = linspace(-1.0, 1.0, 101);
    let reference = norm_curve("ref", &grid, 0.0, |a| a * a);
    let bumpy = norm_curve("m", &grid, 0.0, |a| a * a * if a > 0.3 { 1.0 + 0.3 * (25.0 * a).sin() } else { 1.0 });
    let (c, s) = fsd_split(&bumpy, &reference, SplitPoint::ReferenceMinimum).unwrap();
    let (c, s) = (c.unwrap(), s.unwrap());
    assert!(s > 100.0 * c.max(1e-12), "compress {c}, stretch {s}");
    assert_eq!(fsd_split(&reference, &reference, SplitPoint::Origin).unwrap(), (Some(0.0), Some(0.0)));
}

#[test]
fn one_sided_split_is_missing() {
    let grid = linspace(0.0, 1.0, 11);
    let reference = norm_curve("ref", &grid, 0.0, |a| a * a);
    let (c, s) = fsd_split(&reference, &reference, SplitPoint::ReferenceMinimum).unwrap();
    assert_eq!(c, None);
    assert_eq!(s, Some(0.0));
}

#[test]
fn mae_examples() {
    assert_eq!(mae_energy(&[1.0], &[1.0], 3).unwrap(), 0.0);
    assert!((mae_energy(&[0.002], &[0.0], 2).unwrap() - 1.0).abs() < 1e-12);
    assert!(mae_energy(&[1.0], &[1.0, 2.0], 1).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = linspace(0.0, 1.0, 7);
    let a = random_curve(&mut rng, &grid, 3);
    let b = random_curve(&mut rng, &grid, 3);
    let mut s = 0.0;
    for m in 0..7 {
        for i in 0..3 {
            for k in 0..3 {
                s += (a.forces[m][i][k] - b.forces[m][i][k]).abs();
            }
        }
    }
    assert!((mae_forces(&a.forces, &b.forces).unwrap() - 1000.0 * s / 63.0).abs() < 1e-9);
    let e: f64 = a.energies.iter().zip(&b.energies).map(|(x, y)| (x - y).abs() / 3.0).sum::<f64>() / 7.0;
    assert!((mae_energy(&a.energies, &b.energies, 3).unwrap() - 1000.0 * e).abs() < 1e-9);
}

#[test]
fn synthetic_surfaces() {
    let grid = linspace(-1.0, 1.0, 101);
    let (reference, p1) = synth_pes(PesKind::Pes1, &grid);
    let (_, p2) = synth_pes(PesKind::Pes2, &grid);
    // alpha = 0 is grid point 50
    assert_eq!(grid[50], 0.0);
    for m in [&p1, &p2] {
        assert!((m.energies[50] - reference.energies[50]).abs() < 1e-12);
        assert!((m.forces[50][0][0] - reference.forces[50][0][0]).abs() < 1e-12);
    }
    assert_eq!(local_minima(&p1.energies), 1);
    assert!(local_minima(&p2.energies) >= 2);

    let grid = linspace(-1.0, 1.0, 100);
    let (reference, p1) = synth_pes(PesKind::Pes1, &grid);
    let (_, p2) = synth_pes(PesKind::Pes2, &grid);
    let f1 = fsd(&p1, &reference).unwrap().fsd;
    let f2 = fsd(&p2, &reference).unwrap().fsd;
    let m1 = mae_forces(&p1.forces, &reference.forces).unwrap();
    let m2 = mae_forces(&p2.forces, &reference.forces).unwrap();
    assert!(f2 / f1 >= 10.0, "{f1} {f2}");
    assert!(m2 <= 2.0 * m1, "{m1} {m2}");
}

#[test]
fn grid_refinement_is_stable() {
    let coarse = linspace(-1.0, 1.0, 100);
    let fine = linspace(-1.0, 1.0, 199);
    let (r0, m0) = synth_pes(PesKind::Pes1, &coarse);
    let (r1, m1) = synth_pes(PesKind::Pes1, &fine);
    let a = fsd(&m0, &r0).unwrap().fsd;
    let b = fsd(&m1, &r1).unwrap().fsd;
    assert!((a - b).abs() / a < 0.02, "{a} vs {b}");
}

#[test]
fn aggregation() {
    let rec = |id: &str, f: Option<f64>| ScanFsd {
        scan_id: id.into(),
        fsd_full: f,
        fsd_compress: f,
        fsd_stretch: None,
        n_valid_points: 10,
        error: None,
    };
    let one = aggregate_report(vec![rec("a", Some(12.0))]).unwrap();
    assert_eq!(one.aggregate.mean_full, 12.0);
    let two = aggregate_report(vec![rec("a", Some(10.0)), rec("b", Some(30.0)), rec("c", None)]).unwrap();
    assert_eq!(two.aggregate.mean_full, 20.0);
    assert_eq!((two.aggregate.n_full, two.aggregate.n_scans), (2, 3));
    assert_eq!(two.aggregate.mean_stretch, None);
    assert_eq!(aggregate_report(vec![rec("c", None)]).unwrap_err(), MetricsError::NoValidScans);
    let back: FsdReport = serde_json::from_str(&two.to_json()).unwrap();
    assert_eq!(back, two);
    let csv = two.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("scan_id,fsd_full,fsd_compress,fsd_stretch,n_valid_points,error"));
}

#[test]
fn evaluate_reports_errors_per_scan() {
    let grid = linspace(-1.0, 1.0, 5);
    let flat = norm_curve("flat", &grid, 0.0, |_| 0.0);
    let r = evaluate_scan(&flat, &flat, SplitPoint::ReferenceMinimum);
    assert!(r.fsd_full.is_none() && r.error.is_some());
}

proptest! {
    #[test]
    fn fsd_nonnegative_and_full_is_max_of_parts(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = linspace(-0.5, 1.0, 30);
        let reference = random_curve(&mut rng, &grid, 2);
        let model = random_curve(&mut rng, &grid, 2);
        let p = fsd_profile(&model, &reference).unwrap();
        let full = p.max_abs_derivative(|_| true).unwrap();
        prop_assert!(full >= 0.0);
        let split = SplitPoint::ReferenceMinimum.alpha(&reference);
        let straddle = p.max_abs_derivative(|a| a == split).unwrap_or(0.0);
        let below = p.max_abs_derivative(|a| a < split).unwrap_or(0.0);
        let above = p.max_abs_derivative(|a| a > split).unwrap_or(0.0);
        prop_assert_eq!(full, below.max(above).max(straddle));
        let (c, s) = fsd_split_from_profile(&p, split);
        prop_assert!(full >= c.unwrap_or(0.0) && full >= s.unwrap_or(0.0));
    }
}

#[test]
fn autodiff_log_slope_matches_finite_differences() {
    use crate::potential::{Potential, PotentialConfig};
    let s = crate::chem::library::ethane();
    let scan = crate::scanner::make_scan(&s, (0, 1), &linspace(-0.2, 0.4, 13)).unwrap();
    let model = Potential::new(PotentialConfig { embed_dim: 8, n_heads: 2, n_radial: 12, l_max: 2, k: 4, init_seed: 3, ..PotentialConfig::default() }).unwrap();
    let slopes = model_log_slope_autodiff(&model, &scan).unwrap();
    let curve = scan_curve(&scan, "e", "m", &model.bind(s.species()).unwrap()).unwrap();
    let m0 = curve.min_e_index;
    assert!(slopes[m0].is_none());
    let v: Vec<[f64; 3]> = scan.labels.iter().map(|&h| scan.direction.map(|d| f64::from(h) * d)).collect();
    let log_norm = |m: usize, h: f64| {
        let p: Vec<[f64; 3]> = scan.frames[m].iter().zip(&v).map(|(x, d)| [x[0] + h * d[0], x[1] + h * d[1], x[2] + h * d[2]]).collect();
        let f = model.energy_forces_at(s.species(), &p).unwrap().1;
        f.iter().zip(&curve.forces[m0]).map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>()).sum::<f64>().ln()
    };
    let mut checked = 0;
    for (m, slope) in slopes.iter().enumerate() {
        if let Some(g) = slope {
            let fd = (log_norm(m, 1e-5) - log_norm(m, -1e-5)) / 2e-5;
            assert!((g - fd).abs() <= 1e-5 * fd.abs().max(1.0), "frame {m}: {g} vs {fd}");
            checked += 1;
        }
    }
    assert_eq!(checked, 12);
}
