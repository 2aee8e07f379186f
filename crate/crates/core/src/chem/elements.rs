//! Element table: symbols, single-bond covalent radii (Cordero et al. 2008) and
//! standard atomic masses.

use super::ChemError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub atomic_number: u8,
    pub symbol: &'static str,
    /// Å
    pub covalent_radius: f64,
    /// amu
    pub mass: f64,
}

const fn el(atomic_number: u8, symbol: &'static str, covalent_radius: f64, mass: f64) -> Element {
    Element { atomic_number, symbol, covalent_radius, mass }
}

// Carbon uses the sp3 radius.
static TABLE: &[Element] = &[
    el(1, "H", 0.31, 1.008),
    el(2, "He", 0.28, 4.0026),
    el(3, "Li", 1.28, 6.94),
    el(4, "Be", 0.96, 9.0122),
    el(5, "B", 0.84, 10.81),
    el(6, "C", 0.76, 12.011),
    el(7, "N", 0.71, 14.007),
    el(8, "O", 0.66, 15.999),
    el(9, "F", 0.57, 18.998),
    el(10, "Ne", 0.58, 20.180),
    el(11, "Na", 1.66, 22.990),
    el(12, "Mg", 1.41, 24.305),
    el(13, "Al", 1.21, 26.982),
    el(14, "Si", 1.11, 28.085),
    el(15, "P", 1.07, 30.974),
    el(16, "S", 1.05, 32.06),
    el(17, "Cl", 1.02, 35.45),
    el(18, "Ar", 1.06, 39.948),
    el(19, "K", 2.03, 39.098),
    el(20, "Ca", 1.76, 40.078),
    el(35, "Br", 1.20, 79.904),
    el(53, "I", 1.39, 126.90),
];

pub fn element(atomic_number: u8) -> Result<&'static Element, ChemError> {
    TABLE
        .iter()
        .find(|e| e.atomic_number == atomic_number)
        .ok_or(ChemError::UnsupportedElement(atomic_number as u32))
}

/// Case-insensitive symbol lookup ("c", "C" and "CL"/"Cl" all resolve).
pub fn from_symbol(symbol: &str) -> Option<&'static Element> {
    TABLE.iter().find(|e| e.symbol.eq_ignore_ascii_case(symbol))
}

pub fn covalent_radius(atomic_number: u32) -> Result<f64, ChemError> {
    let z = u8::try_from(atomic_number).map_err(|_| ChemError::UnsupportedElement(atomic_number))?;
    element(z).map(|e| e.covalent_radius).map_err(|_| ChemError::UnsupportedElement(atomic_number))
}

pub fn mass(atomic_number: u8) -> Result<f64, ChemError> {
    element(atomic_number).map(|e| e.mass)
}

pub fn symbol(atomic_number: u8) -> Result<&'static str, ChemError> {
    element(atomic_number).map(|e| e.symbol)
}

pub fn all() -> &'static [Element] {
    TABLE
}
