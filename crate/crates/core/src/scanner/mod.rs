//! Bond scans: rigid-fragment stretching and compression of a bridge bond.
//!
//! Cutting a bridge bond `(a, b)` splits the molecule in two. Every atom gets a
//! label `h = -1` (side of `a`) or `h = +1` (side of `b`), and frame `m` moves
//! atom `i` by `alpha[m] * h[i] * r`, with `r` the unit vector from `a` to `b`.
//! The bond length is therefore `L0 + 2 alpha`, and positive `alpha` stretches.

mod bridges;
mod io;

pub use bridges::bridges;
pub use io::{load_scan, load_scans, save_scan, scan_dir_name, ScanMeta};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::chem::{elements, perceive_bonds, Bond, ChemError, Structure, DEFAULT_BOND_SCALE};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("bond ({0}, {1}) is not a bridge: removing it leaves the molecule connected")]
    NotABridge(usize, usize),
    #[error("bond ({0}, {1}) is not in the bond list")]
    UnknownBond(usize, usize),
    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),
    #[error("unknown bond type '{0}'")]
    BondType(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("scan {scan}: {msg}")]
    Format { scan: String, msg: String },
}

/// Fraction of the covalent-radii sum below which a non-scanned pair overlaps.
pub const OVERLAP_FACTOR: f64 = 0.9;
/// Scanned bond lengths cover `[MIN, MAX]` times the covalent-radii sum.
pub const LENGTH_RANGE: (f64, f64) = (0.5, 2.0);
pub const DEFAULT_FRAMES: usize = 100;
/// Largest tolerated step discontinuity in a reference energy curve, eV.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BondScan {
    pub base: Structure,
    pub bond: Bond,
    /// `-1` on the side of `bond.0`, `+1` on the side of `bond.1`.
    pub labels: Vec<i8>,
    pub direction: [f64; 3],
    pub alpha_grid: Vec<f64>,
    pub frames: Vec<Vec<[f64; 3]>>,
    /// One side of the cut holds a single atom.
    pub single_atom_fragment: bool,
    pub warnings: Vec<String>,
}

impl BondScan {
    pub fn frame_structure(&self, m: usize) -> Structure {
        self.base.with_positions(self.frames[m].clone()).expect("frames are finite")
    }

    pub fn bond_length(&self, m: usize) -> f64 {
        chem_dist(&self.frames[m][self.bond.0], &self.frames[m][self.bond.1])
    }

    pub fn bond_type(&self) -> BondType {
        BondType::new(self.base.species()[self.bond.0], self.base.species()[self.bond.1])
    }
}

fn chem_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unordered element pair such as C–N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BondType(u8, u8);

impl BondType {
    pub fn new(z1: u8, z2: u8) -> Self {
        BondType(z1.min(z2), z1.max(z2))
    }
}

impl fmt::Display for BondType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |z| elements::symbol(z).unwrap_or("?");
        write!(f, "{}-{}", s(self.0), s(self.1))
    }
}

impl FromStr for BondType {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScanError::BondType(s.to_string());
        let (a, b) = s.split_once(['-', '\u{2013}']).ok_or_else(bad)?;
        let a = elements::from_symbol(a.trim()).ok_or_else(bad)?;
        let b = elements::from_symbol(b.trim()).ok_or_else(bad)?;
        Ok(BondType::new(a.atomic_number, b.atomic_number))
    }
}

pub fn default_bond_types() -> BTreeSet<BondType> {
    ["C-C", "C-N", "C-O", "C-P", "C-S", "N-N", "N-O", "N-P", "O-P"]
        .iter()
        .map(|s| s.parse().expect("valid table entry"))
        .collect()
}

/// Bridge bonds among `bonds` for structure `s`.
pub fn find_bridge_bonds(s: &Structure, bonds: &[Bond]) -> Vec<Bond> {
    bridges(s.len(), bonds)
}

pub fn fragment_labels(s: &Structure, bonds: &[Bond], bridge: Bond) -> Result<Vec<i8>, ScanError> {
    bridges::split_labels(s.len(), bonds, bridge)
}

fn check_grid(alpha_grid: &[f64]) -> Result<(), ScanError> {
    if alpha_grid.len() < 2 {
        return Err(ScanError::InvalidGrid("need at least 2 points".into()));
    }
    if alpha_grid.iter().any(|a| !a.is_finite()) {
        return Err(ScanError::InvalidGrid("non-finite value".into()));
    }
    let h = (alpha_grid[alpha_grid.len() - 1] - alpha_grid[0]) / (alpha_grid.len() - 1) as f64;
    if h <= 0.0 {
        return Err(ScanError::InvalidGrid("not increasing".into()));
    }
    for w in alpha_grid.windows(2) {
        if w[1] <= w[0] || ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(ScanError::InvalidGrid("spacing is not uniform".into()));
        }
    }
    Ok(())
}

/// Builds the scan of `bridge` using `s`'s explicit bonds, or perceived bonds
/// at the default scale.
pub fn make_scan(s: &Structure, bridge: Bond, alpha_grid: &[f64]) -> Result<BondScan, ScanError> {
    make_scan_with_bonds(s, &perceive_bonds(s, DEFAULT_BOND_SCALE), bridge, alpha_grid)
}

pub fn make_scan_with_bonds(
    s: &Structure,
    bonds: &[Bond],
    bridge: Bond,
    alpha_grid: &[f64],
) -> Result<BondScan, ScanError> {
    check_grid(alpha_grid)?;
    let labels = fragment_labels(s, bonds, bridge)?;
    let (a, b) = bridge;
    let pa = s.positions()[a];
    let pb = s.positions()[b];
    let l0 = chem_dist(&pa, &pb);
    if l0 == 0.0 {
        return Err(ScanError::Chem(ChemError::InvalidStructure(format!("atoms {a} and {b} coincide"))));
    }
    let direction = [(pb[0] - pa[0]) / l0, (pb[1] - pa[1]) / l0, (pb[2] - pa[2]) / l0];
    let frames = alpha_grid
        .iter()
        .map(|&alpha| {
            s.positions()
                .iter()
                .zip(&labels)
                .map(|(p, &h)| {
                    let c = alpha * f64::from(h);
                    [p[0] + c * direction[0], p[1] + c * direction[1], p[2] + c * direction[2]]
                })
                .collect()
        })
        .collect();
    let minus = labels.iter().filter(|&&h| h < 0).count();
    let single_atom_fragment = minus == 1 || minus == labels.len() - 1;
    let mut warnings = Vec::new();
    let (lo, hi) = (alpha_grid[0], alpha_grid[alpha_grid.len() - 1]);
    if !(lo..=hi).contains(&0.0) {
        warnings.push(format!(
            "original bond length {l0:.4} A lies outside the scanned range [{:.4}, {:.4}] A",
            l0 + 2.0 * lo,
            l0 + 2.0 * hi
        ));
    }
    Ok(BondScan {
        base: s.clone(),
        bond: bridge,
        labels,
        direction,
        alpha_grid: alpha_grid.to_vec(),
        frames,
        single_atom_fragment,
        warnings,
    })
}

/// Evenly spaced `n` values from `lo` to `hi`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
}

/// Alpha grid whose bond lengths `L0 + 2 alpha` span 0.5 to 2 times the radii sum.
pub fn scan_alpha_range(s: &Structure, bridge: Bond, n_frames: usize) -> Result<Vec<f64>, ScanError> {
    if n_frames < 2 {
        return Err(ScanError::InvalidGrid("n_frames must be at least 2".into()));
    }
    let (a, b) = bridge;
    if a >= s.len() || b >= s.len() {
        return Err(ScanError::UnknownBond(a, b));
    }
    let r = s.radii();
    let sum = r[a] + r[b];
    let l0 = s.distance(a, b);
    Ok(linspace((LENGTH_RANGE.0 * sum - l0) / 2.0, (LENGTH_RANGE.1 * sum - l0) / 2.0, n_frames))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapVerdict {
    pub keep: Vec<bool>,
    pub accepted: bool,
    /// First offending `(frame, i, j)`, if any.
    pub first_overlap: Option<(usize, usize, usize)>,
}

/// Rejects frames where any pair other than the scanned bond comes closer than
/// 0.9 times its radii sum. One rejected frame rejects the whole scan.
pub fn filter_overlaps(scan: &BondScan) -> OverlapVerdict {
    let r = scan.base.radii();
    let n = r.len();
    let key = (scan.bond.0.min(scan.bond.1), scan.bond.0.max(scan.bond.1));
    let mut first_overlap = None;
    let keep: Vec<bool> = scan
        .frames
        .iter()
        .enumerate()
        .map(|(m, pos)| {
            for i in 0..n {
                for j in i + 1..n {
                    if (i, j) == key {
                        continue;
                    }
                    if chem_dist(&pos[i], &pos[j]) < OVERLAP_FACTOR * (r[i] + r[j]) {
                        first_overlap.get_or_insert((m, i, j));
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    let accepted = keep.iter().all(|&k| k);
    OverlapVerdict { keep, accepted, first_overlap }
}

/// Largest step discontinuity in an energy curve: the worst departure of one
/// adjacent difference from the mean of its neighbouring differences.
///
/// A step of height `J` between two frames scores about `J`, while smooth
/// curves score `O(h^3)` even where they are steep.
pub fn energy_jump(energies: &[f64]) -> f64 {
    let d: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    if d.len() < 3 {
        return 0.0;
    }
    (0..d.len())
        .map(|m| {
            let neighbours = match m {
                0 => d[1],
                _ if m == d.len() - 1 => d[m - 1],
                _ => 0.5 * (d[m - 1] + d[m + 1]),
            };
            (d[m] - neighbours).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub bond_types: BTreeSet<BondType>,
    pub n_frames: usize,
    pub bond_scale: f64,
    /// Drop scans where one side of the cut is a lone atom.
    pub reject_single_atom: bool,
    /// Reject scans whose reference energy curve has a larger discontinuity (eV).
    pub jump_threshold: Option<f64>,
    /// Keep at most this many scans per bond type, chosen at random.
    pub max_per_type: Option<usize>,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            bond_types: default_bond_types(),
            n_frames: DEFAULT_FRAMES,
            bond_scale: DEFAULT_BOND_SCALE,
            reject_single_atom: false,
            jump_threshold: Some(DEFAULT_JUMP_THRESHOLD),
            max_per_type: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Overlap,
    SingleAtomFragment,
    EnergyJump,
    NotSampled,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Overlap => "overlap",
            RejectReason::SingleAtomFragment => "single-atom fragment",
            RejectReason::EnergyJump => "reference energy jump",
            RejectReason::NotSampled => "not sampled",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub structure: usize,
    pub tag: String,
    pub bond: Bond,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct ScanDataset {
    pub scans: Vec<BondScan>,
    pub rejections: Vec<Rejection>,
}

fn candidates(index: usize, s: &Structure, cfg: &SampleConfig) -> (Vec<BondScan>, Vec<Rejection>) {
    let bonds = perceive_bonds(s, cfg.bond_scale);
    let mut scans = Vec::new();
    let mut rejected = Vec::new();
    for bridge in bridges(s.len(), &bonds) {
        let ty = BondType::new(s.species()[bridge.0], s.species()[bridge.1]);
        if !cfg.bond_types.contains(&ty) {
            continue;
        }
        let reject = |reason| Rejection { structure: index, tag: s.tag.clone(), bond: bridge, reason };
        let grid = scan_alpha_range(s, bridge, cfg.n_frames).expect("n_frames validated");
        let scan = make_scan_with_bonds(s, &bonds, bridge, &grid).expect("bridge from the same bond list");
        if cfg.reject_single_atom && scan.single_atom_fragment {
            rejected.push(reject(RejectReason::SingleAtomFragment));
            continue;
        }
        if !filter_overlaps(&scan).accepted {
            rejected.push(reject(RejectReason::Overlap));
            continue;
        }
        if let Some(threshold) = cfg.jump_threshold {
            let energies: Vec<f64> = (0..scan.frames.len())
                .map(|m| crate::potential::reference_energy(&scan.base, &scan.frames[m]))
                .collect();
            if energy_jump(&energies) > threshold {
                rejected.push(reject(RejectReason::EnergyJump));
                continue;
            }
        }
        scans.push(scan);
    }
    (scans, rejected)
}

/// Scans every accepted bridge of an allowed bond type in every structure.
/// Output order follows the input order; the seed only matters when
/// `max_per_type` caps a bond type.
pub fn sample_scan_dataset(structures: &[Structure], cfg: &SampleConfig) -> Result<ScanDataset, ScanError> {
    if cfg.n_frames < 2 {
        return Err(ScanError::InvalidGrid("n_frames must be at least 2".into()));
    }
    let per_structure: Vec<_> = structures
        .par_iter()
        .enumerate()
        .map(|(i, s)| candidates(i, s, cfg))
        .collect();
    let mut out = ScanDataset::default();
    let mut tagged: Vec<(usize, BondScan)> = Vec::new();
    for (i, (scans, rejected)) in per_structure.into_iter().enumerate() {
        tagged.extend(scans.into_iter().map(|s| (i, s)));
        out.rejections.extend(rejected);
    }
    if let Some(cap) = cfg.max_per_type {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let types: BTreeSet<BondType> = tagged.iter().map(|(_, s)| s.bond_type()).collect();
        let mut chosen = vec![false; tagged.len()];
        for ty in types {
            let mut idx: Vec<usize> = (0..tagged.len()).filter(|&k| tagged[k].1.bond_type() == ty).collect();
            idx.shuffle(&mut rng);
            for &k in idx.iter().take(cap) {
                chosen[k] = true;
            }
        }
        for (k, (i, scan)) in tagged.into_iter().enumerate() {
            if chosen[k] {
                out.scans.push(scan);
            } else {
                out.rejections.push(Rejection {
                    structure: i,
                    tag: scan.base.tag.clone(),
                    bond: scan.bond,
                    reason: RejectReason::NotSampled,
                });
            }
        }
    } else {
        out.scans = tagged.into_iter().map(|(_, s)| s).collect();
    }
    Ok(out)
}

pub use crate::chem::library::ethane;
