//! On-disk layout: one directory per scan holding `scan.json` (metadata) and
//! `frames.xyz` (all frames in alpha order).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chem::{xyz, ChemError, Structure};

use super::{BondScan, ScanError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub id: String,
    pub source_tag: String,
    pub bond: [usize; 2],
    pub bond_type: String,
    pub labels: Vec<i8>,
    pub direction: [f64; 3],
    pub alpha_grid: Vec<f64>,
    pub base_positions: Vec<[f64; 3]>,
    pub single_atom_fragment: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// File-system-safe directory name for a scan.
pub fn scan_dir_name(scan: &BondScan) -> String {
    let tag: String = scan
        .base
        .tag
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let tag = if tag.is_empty() { "scan".to_string() } else { tag };
    format!("{tag}_{}-{}", scan.bond.0, scan.bond.1)
}

fn io_err(path: &Path, source: std::io::Error) -> ScanError {
    ScanError::Chem(ChemError::Io { path: path.to_path_buf(), source })
}

/// Writes `scan` under `root/<scan_dir_name>` and returns that directory.
pub fn save_scan(scan: &BondScan, root: &Path) -> Result<PathBuf, ScanError> {
    let id = scan_dir_name(scan);
    let dir = root.join(&id);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let meta = ScanMeta {
        id,
        source_tag: scan.base.tag.clone(),
        bond: [scan.bond.0, scan.bond.1],
        bond_type: scan.bond_type().to_string(),
        labels: scan.labels.clone(),
        direction: scan.direction,
        alpha_grid: scan.alpha_grid.clone(),
        base_positions: scan.base.positions().to_vec(),
        single_atom_fragment: scan.single_atom_fragment,
        warnings: scan.warnings.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("plain data serializes");
    let path = dir.join("scan.json");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    let mut text = String::new();
    for m in 0..scan.frames.len() {
        let mut f = scan.frame_structure(m);
        f.tag = format!("{}_frame{m}", meta.source_tag);
        text.push_str(&xyz::write_xyz(&f));
    }
    let path = dir.join("frames.xyz");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(dir)
}

pub fn load_scan(dir: &Path) -> Result<BondScan, ScanError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let fmt_err = |msg: String| ScanError::Format { scan: name.clone(), msg };
    let meta_path = dir.join("scan.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| fmt_err(format!("cannot read scan.json: {e}")))?;
    let meta: ScanMeta = serde_json::from_str(&text).map_err(|e| fmt_err(format!("scan.json: {e}")))?;
    let frames_path = dir.join("frames.xyz");
    let text = fs::read_to_string(&frames_path).map_err(|e| fmt_err(format!("cannot read frames.xyz: {e}")))?;
    let frames = xyz::parse_xyz_frames(&text).map_err(|e| fmt_err(format!("frames.xyz: {e}")))?;
    if frames.len() != meta.alpha_grid.len() {
        return Err(fmt_err(format!(
            "{} frames but {} alpha values",
            frames.len(),
            meta.alpha_grid.len()
        )));
    }
    let first = frames.first().ok_or_else(|| fmt_err("no frames".into()))?;
    if first.len() != meta.base_positions.len() || meta.labels.len() != first.len() {
        return Err(fmt_err("atom count mismatch between scan.json and frames.xyz".into()));
    }
    if frames.iter().any(|f| f.species() != first.species()) {
        return Err(fmt_err("species differ between frames".into()));
    }
    let base = Structure::new(
        first.species().to_vec(),
        meta.base_positions.clone(),
        first.explicit_bonds().map(<[_]>::to_vec),
        meta.source_tag.clone(),
    )?;
    Ok(BondScan {
        base,
        bond: (meta.bond[0], meta.bond[1]),
        labels: meta.labels,
        direction: meta.direction,
        alpha_grid: meta.alpha_grid,
        frames: frames.into_iter().map(|f| f.positions().to_vec()).collect(),
        single_atom_fragment: meta.single_atom_fragment,
        warnings: meta.warnings,
    })
}

/// Loads every scan directory (any subdirectory containing `scan.json`), sorted by name.
pub fn load_scans(root: &Path) -> Result<Vec<(String, BondScan)>, ScanError> {
    let rd = fs::read_dir(root).map_err(|e| io_err(root, e))?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("scan.json").is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            load_scan(d).map(|s| (name, s))
        })
        .collect()
}
