//! Edge featurization: Gaussian radial smearing and Cartesian monomials of
//! the edge direction, as plain functions and as taped operations.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{AdError, Tensor, Var};

/// Center spacing and Gaussian width for `n_radial` centers on `[0, r_c]`.
pub fn radial_spacing(n_radial: usize, r_c: f64, gamma: f64) -> (f64, f64) {
    let dx = r_c / (n_radial - 1) as f64;
    (dx, gamma * dx)
}

/// `exp(-(d - mu_i)^2 / 2 sigma^2)` for centers `mu_i = i * r_c / (n_radial - 1)`.
pub fn radial_features(d: f64, n_radial: usize, r_c: f64, gamma: f64) -> Vec<f64> {
    let (dx, sigma) = radial_spacing(n_radial, r_c, gamma);
    (0..n_radial)
        .map(|i| {
            let z = (d - i as f64 * dx) / sigma;
            (-0.5 * z * z).exp()
        })
        .collect()
}

/// Exponents `(a, b, c)` with `a + b + c <= l_max`, by degree and then
/// descending lexicographically, so degree one reads x, y, z.
pub fn monomial_exponents(l_max: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for l in 0..=l_max {
        for a in (0..=l).rev() {
            for b in (0..=l - a).rev() {
                out.push([a, b, l - a - b]);
            }
        }
    }
    out
}

/// All monomials `v_x^a v_y^b v_z^c` of total degree at most `l_max`.
pub fn angular_features(v: [f64; 3], l_max: usize) -> Vec<f64> {
    assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-9, "direction must be a unit vector");
    monomial_exponents(l_max)
        .iter()
        .map(|e| v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32))
        .collect()
}

/// Taped radial features of distances `d` (shape `[E, 1]`), shape `[E, n_radial]`.
pub(crate) fn radial_var(d: &Var, n_radial: usize, r_c: f64, gamma: f64) -> Result<Var, AdError> {
    let (dx, sigma) = radial_spacing(n_radial, r_c, gamma);
    let mu = Var::constant(Tensor::new(vec![1, n_radial], (0..n_radial).map(|i| i as f64 * dx).collect())?);
    d.sub(&mu)?.scale(1.0 / sigma)?.square()?.scale(-0.5)?.exp()
}

/// Taped monomials of unit vectors `u` (shape `[E, 3]`), shape `[E, M]`.
pub(crate) fn angular_var(u: &Var, l_max: usize) -> Result<Var, AdError> {
    let e = u.shape()[0];
    let exps = monomial_exponents(l_max);
    let mut factors: Option<Var> = None;
    for axis in 0..3 {
        let c = u.slice(1, axis, 1)?;
        let mut powers = vec![Var::constant(Tensor::ones(&[e, 1]))];
        for p in 1..=l_max {
            let next = powers[p - 1].mul(&c)?;
            powers.push(next);
        }
        let refs: Vec<&Var> = powers.iter().collect();
        // [l_max + 1, E], then one row per monomial
        let table = Var::concat(&refs, 1)?.transpose()?;
        let rows = table.gather(Rc::new(exps.iter().map(|x| x[axis]).collect()))?;
        factors = Some(match factors {
            None => rows,
            Some(f) => f.mul(&rows)?,
        });
    }
    factors.expect("three axes").transpose()
}

/// Largest `max|f'| / max|f|` over `samples` random combinations
/// `f(x) = sum_i a_i exp(-(x - i)^2 / 2 gamma^2)` of `n_basis` unit-spaced
/// Gaussians, with `a_i` standard normal. Both maxima run over `[0, n_basis - 1]`.
pub fn smearing_derivative_ratio(gamma: f64, n_basis: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 0.05;
    let n_grid = ((n_basis - 1) as f64 / step).round() as usize + 1;
    let s2 = gamma * gamma;
    // basis values and derivatives on the grid, evaluated once
    let reach = (8.0 * gamma).ceil() as isize;
    let mut cols: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n_grid];
    for (g, col) in cols.iter_mut().enumerate() {
        let x = g as f64 * step;
        let lo = (x.floor() as isize - reach).max(0) as usize;
        let hi = ((x.ceil() as isize + reach) as usize).min(n_basis - 1);
        for i in lo..=hi {
            let z = x - i as f64;
            let v = (-0.5 * z * z / s2).exp();
            col.push((i, v, -z / s2 * v));
        }
    }
    let mut best = 0.0f64;
    for _ in 0..samples {
        let a: Vec<f64> = (0..n_basis).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (mut fmax, mut dmax) = (0.0f64, 0.0f64);
        for col in &cols {
            let (mut f, mut df) = (0.0, 0.0);
            for &(i, v, dv) in col {
                f += a[i] * v;
                df += a[i] * dv;
            }
            fmax = fmax.max(f.abs());
            dmax = dmax.max(df.abs());
        }
        best = best.max(dmax / fmax);
    }
    best
}
