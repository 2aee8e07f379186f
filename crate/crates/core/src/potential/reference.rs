//! Analytic ground-truth potential: Morse wells on a fixed bond list plus a
//! weak, tapered Lennard-Jones repulsion between every other pair.
//!
//! The bond list is taken once from a base structure and never re-perceived,
//! so the energy stays smooth when a bond is stretched past the perception
//! threshold during a scan.

use crate::chem::{perceive_bonds, Bond, Structure, DEFAULT_BOND_SCALE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceParams {
    /// Morse well depth, eV.
    pub de: f64,
    /// Morse width, 1/Å.
    pub a: f64,
    /// Lennard-Jones well depth, eV.
    pub lj_epsilon: f64,
    /// Lennard-Jones sigma as a multiple of the covalent-radii sum.
    pub lj_sigma_scale: f64,
    /// Lennard-Jones cutoff, Å.
    pub cutoff: f64,
    /// Taper starts at this fraction of the cutoff.
    pub taper_start: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self { de: 4.0, a: 2.0, lj_epsilon: 0.01, lj_sigma_scale: 0.9, cutoff: 6.0, taper_start: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct ReferencePotential {
    params: ReferenceParams,
    /// `(i, j, r0)` for every Morse bond.
    bonds: Vec<(usize, usize, f64)>,
    /// `(i, j, sigma)` for every other pair.
    pairs: Vec<(usize, usize, f64)>,
}

/// Quintic smoothstep switch: 1 below `on`, 0 above `off`, C2 in between.
/// Returns the value and its derivative in `r`.
fn taper(r: f64, on: f64, off: f64) -> (f64, f64) {
    if r <= on {
        return (1.0, 0.0);
    }
    if r >= off {
        return (0.0, 0.0);
    }
    let w = off - on;
    let x = (r - on) / w;
    let s = 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let ds = -30.0 * x * x * (1.0 - x) * (1.0 - x) / w;
    (s, ds)
}

impl ReferencePotential {
    pub fn new(base: &Structure) -> Self {
        Self::with_params(base, &perceive_bonds(base, DEFAULT_BOND_SCALE), ReferenceParams::default())
    }

    pub fn with_params(base: &Structure, bonds: &[Bond], params: ReferenceParams) -> Self {
        let r = base.radii();
        let n = base.len();
        let mut bonded = vec![false; n * n];
        let bonds: Vec<_> = bonds
            .iter()
            .map(|&(i, j)| {
                bonded[i * n + j] = true;
                bonded[j * n + i] = true;
                (i, j, r[i] + r[j])
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !bonded[i * n + j] {
                    pairs.push((i, j, params.lj_sigma_scale * (r[i] + r[j])));
                }
            }
        }
        Self { params, bonds, pairs }
    }

    pub fn params(&self) -> &ReferenceParams {
        &self.params
    }

    pub fn bonds(&self) -> Vec<Bond> {
        self.bonds.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    /// Energy (eV) and forces (eV/Å) at `positions`.
    pub fn energy_forces(&self, positions: &[[f64; 3]]) -> (f64, Vec<[f64; 3]>) {
        let p = &self.params;
        let mut e = 0.0;
        let mut f = vec![[0.0; 3]; positions.len()];
        let mut add_pair = |i: usize, j: usize, energy: f64, de_dr: f64, d: [f64; 3], r: f64| {
            e += energy;
            for k in 0..3 {
                // d = x_j - x_i, so dE/dx_j = de_dr * d / r
                let g = de_dr * d[k] / r;
                f[i][k] += g;
                f[j][k] -= g;
            }
        };
        let sep = |i: usize, j: usize| {
            let d = [
                positions[j][0] - positions[i][0],
                positions[j][1] - positions[i][1],
                positions[j][2] - positions[i][2],
            ];
            (d, (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
        };
        for &(i, j, r0) in &self.bonds {
            let (d, r) = sep(i, j);
            let x = (-p.a * (r - r0)).exp();
            let energy = p.de * (1.0 - x) * (1.0 - x);
            let de_dr = 2.0 * p.de * p.a * (1.0 - x) * x;
            add_pair(i, j, energy, de_dr, d, r);
        }
        let on = p.taper_start * p.cutoff;
        for &(i, j, sigma) in &self.pairs {
            let (d, r) = sep(i, j);
            if r >= p.cutoff {
                continue;
            }
            let sr6 = (sigma / r).powi(6);
            let lj = 4.0 * p.lj_epsilon * (sr6 * sr6 - sr6);
            let dlj = 4.0 * p.lj_epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
            let (s, ds) = taper(r, on, p.cutoff);
            add_pair(i, j, lj * s, dlj * s + lj * ds, d, r);
        }
        (e, f)
    }

    pub fn energy(&self, positions: &[[f64; 3]]) -> f64 {
        self.energy_forces(positions).0
    }
}

/// Energy and forces of `s` with bonds perceived from `s` itself.
pub fn reference_potential(s: &Structure) -> (f64, Vec<[f64; 3]>) {
    ReferencePotential::new(s).energy_forces(s.positions())
}

/// Energy at `positions` with the bond list of `base`.
pub fn reference_energy(base: &Structure, positions: &[[f64; 3]]) -> f64 {
    ReferencePotential::new(base).energy(positions)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn diatomic(r: f64) -> Structure {
        Structure::new(vec![6, 8], vec![[0.0; 3], [r, 0.0, 0.0]], Some(vec![(0, 1)]), "").unwrap()
    }

    #[test]
    fn morse_minimum_and_plateau() {
        let (e, f) = reference_potential(&diatomic(0.76 + 0.66));
        assert!(e.abs() < 1e-15);
        assert!(f.iter().flatten().all(|x| x.abs() < 1e-14));
        let (e, f) = reference_potential(&diatomic(40.0));
        assert!((e - 4.0).abs() < 1e-12);
        assert!(f.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn taper_is_c2() {
        let (on, off) = (4.8, 6.0);
        assert_eq!(taper(on, on, off), (1.0, 0.0));
        assert_eq!(taper(off, on, off), (0.0, 0.0));
        let h = 1e-6;
        for r in [4.9, 5.4, 5.9] {
            let fd = (taper(r + h, on, off).0 - taper(r - h, on, off).0) / (2.0 * h);
            assert!((fd - taper(r, on, off).1).abs() < 1e-8);
        }
        let dd = |r: f64| (taper(r + h, on, off).1 - taper(r - h, on, off).1) / (2.0 * h);
        assert!(dd(on + 2.0 * h).abs() < 1e-4 && dd(off - 2.0 * h).abs() < 1e-4);
    }

    fn cloud(seed: u64, n: usize) -> Structure {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<[f64; 3]> = Vec::new();
        while pos.len() < n {
            let p = [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)];
            if pos.iter().all(|q| crate::chem::structure_dist(&p, q) > 1.0) {
                pos.push(p);
            }
        }
        let species = (0..n).map(|i| [1u8, 6, 7, 8][i % 4]).collect();
        Structure::new(species, pos, None, "").unwrap()
    }

    proptest! {
        #[test]
        fn forces_match_finite_differences(seed in 0u64..200) {
            let s = cloud(seed, 6);
            let pot = ReferencePotential::new(&s);
            let (_, f) = pot.energy_forces(s.positions());
            let h = 1e-4;
            for i in 0..s.len() {
                for k in 0..3 {
                    let at = |t: f64| {
                        let mut p = s.positions().to_vec();
                        p[i][k] += t;
                        pot.energy(&p)
                    };
                    let fd = -(8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
                    prop_assert!((fd - f[i][k]).abs() <= 1e-8 * f[i][k].abs().max(1.0), "{} vs {}", fd, f[i][k]);
                }
            }
        }
    }
}
