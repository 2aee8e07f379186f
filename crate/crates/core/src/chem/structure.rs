use super::{elements, ChemError};

pub type Bond = (usize, usize);

/// Default bond perception threshold as a multiple of the covalent-radii sum.
pub const DEFAULT_BOND_SCALE: f64 = 1.2;

/// A molecule: species, Cartesian positions in Å, and an optional explicit bond list.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    species: Vec<u8>,
    positions: Vec<[f64; 3]>,
    bonds: Option<Vec<Bond>>,
    pub tag: String,
}

impl Structure {
    pub fn new(
        species: Vec<u8>,
        positions: Vec<[f64; 3]>,
        bonds: Option<Vec<Bond>>,
        tag: impl Into<String>,
    ) -> Result<Self, ChemError> {
        if species.len() != positions.len() {
            return Err(ChemError::InvalidStructure(format!(
                "{} species but {} positions",
                species.len(),
                positions.len()
            )));
        }
        for &z in &species {
            elements::element(z)?;
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ChemError::InvalidStructure("non-finite position".into()));
        }
        let bonds = bonds.map(|b| normalize_bonds(b, species.len())).transpose()?;
        Ok(Self { species, positions, bonds, tag: tag.into() })
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn species(&self) -> &[u8] {
        &self.species
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn explicit_bonds(&self) -> Option<&[Bond]> {
        self.bonds.as_deref()
    }

    pub fn with_positions(&self, positions: Vec<[f64; 3]>) -> Result<Self, ChemError> {
        Self::new(self.species.clone(), positions, self.bonds.clone(), self.tag.clone())
    }

    pub fn with_bonds(mut self, bonds: Vec<Bond>) -> Result<Self, ChemError> {
        self.bonds = Some(normalize_bonds(bonds, self.species.len())?);
        Ok(self)
    }

    pub fn masses(&self) -> Vec<f64> {
        self.species.iter().map(|&z| elements::mass(z).expect("validated species")).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.species
            .iter()
            .map(|&z| elements::element(z).expect("validated species").covalent_radius)
            .collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.positions[i], &self.positions[j])
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn normalize_bonds(bonds: Vec<Bond>, n: usize) -> Result<Vec<Bond>, ChemError> {
    let mut out: Vec<Bond> = Vec::with_capacity(bonds.len());
    for (a, b) in bonds {
        if a >= n || b >= n {
            return Err(ChemError::InvalidStructure(format!("bond ({a}, {b}) out of range for {n} atoms")));
        }
        if a == b {
            return Err(ChemError::InvalidStructure(format!("self-bond on atom {a}")));
        }
        out.push((a.min(b), a.max(b)));
    }
    out.sort_unstable();
    let before = out.len();
    out.dedup();
    if out.len() != before {
        return Err(ChemError::InvalidStructure("duplicate bond".into()));
    }
    Ok(out)
}

/// Bond list of `s`: the explicit list when present, otherwise every pair closer
/// than `scale` times the sum of covalent radii. Sorted lexicographically.
pub fn perceive_bonds(s: &Structure, scale: f64) -> Vec<Bond> {
    if let Some(b) = s.explicit_bonds() {
        return b.to_vec();
    }
    let radii = s.radii();
    let mut bonds = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if s.distance(i, j) < scale * (radii[i] + radii[j]) {
                bonds.push((i, j));
            }
        }
    }
    bonds
}
