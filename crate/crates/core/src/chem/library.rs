//! Built-in small molecules near their equilibrium geometries.

use super::Structure;

const TETRA: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

fn build(tag: &str, atoms: &[(u8, [f64; 3])]) -> Structure {
    let species = atoms.iter().map(|a| a.0).collect();
    let positions = atoms.iter().map(|a| a.1).collect();
    Structure::new(species, positions, None, tag).expect("valid built-in geometry")
}

fn along(dir: [f64; 3], len: f64, from: [f64; 3]) -> [f64; 3] {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    [from[0] + dir[0] / n * len, from[1] + dir[1] / n * len, from[2] + dir[2] / n * len]
}

pub fn water() -> Structure {
    build("water", &[(8, [0.0, 0.0, 0.0]), (1, [0.757, 0.586, 0.0]), (1, [-0.757, 0.586, 0.0])])
}

pub fn ammonia() -> Structure {
    let o = [0.0; 3];
    build(
        "ammonia",
        &[(7, o), (1, along(TETRA[1], 1.01, o)), (1, along(TETRA[2], 1.01, o)), (1, along(TETRA[3], 1.01, o))],
    )
}

pub fn methane() -> Structure {
    let o = [0.0; 3];
    let mut atoms = vec![(6, o)];
    atoms.extend(TETRA.iter().map(|&d| (1, along(d, 1.09, o))));
    build("methane", &atoms)
}

/// Ethane in a staggered conformation.
pub fn ethane() -> Structure {
    let c = 0.765;
    let (hx, hr) = (1.165, 1.02);
    let mut pos = vec![[-c, 0.0, 0.0], [c, 0.0, 0.0]];
    for k in 0..3 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        pos.push([-hx, hr * t.cos(), hr * t.sin()]);
    }
    for k in 0..3 {
        let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 3.0;
        pos.push([hx, hr * t.cos(), hr * t.sin()]);
    }
    Structure::new(vec![6, 6, 1, 1, 1, 1, 1, 1], pos, None, "ethane").expect("valid geometry")
}

pub fn ethylene() -> Structure {
    build(
        "ethylene",
        &[
            (6, [-0.667, 0.0, 0.0]),
            (6, [0.667, 0.0, 0.0]),
            (1, [-1.23, 0.92, 0.0]),
            (1, [-1.23, -0.92, 0.0]),
            (1, [1.23, 0.92, 0.0]),
            (1, [1.23, -0.92, 0.0]),
        ],
    )
}

pub fn formaldehyde() -> Structure {
    build(
        "formaldehyde",
        &[(6, [0.0, 0.0, 0.0]), (8, [1.21, 0.0, 0.0]), (1, [-0.55, 0.94, 0.0]), (1, [-0.55, -0.94, 0.0])],
    )
}

pub fn methanol() -> Structure {
    build(
        "methanol",
        &[
            (6, [0.0, 0.0, 0.0]),
            (8, [1.43, 0.0, 0.0]),
            (1, [1.75, 0.9, 0.0]),
            (1, [-0.36, 1.03, 0.0]),
            (1, [-0.36, -0.51, 0.89]),
            (1, [-0.36, -0.51, -0.89]),
        ],
    )
}

pub fn methylamine() -> Structure {
    build(
        "methylamine",
        &[
            (6, [0.0, 0.0, 0.0]),
            (7, [1.47, 0.0, 0.0]),
            (1, [1.8, 0.47, 0.82]),
            (1, [1.8, 0.47, -0.82]),
            (1, [-0.36, 1.03, 0.0]),
            (1, [-0.36, -0.51, 0.89]),
            (1, [-0.36, -0.51, -0.89]),
        ],
    )
}

pub fn hydroxylamine() -> Structure {
    build(
        "hydroxylamine",
        &[
            (7, [0.0, 0.0, 0.0]),
            (8, [1.45, 0.0, 0.0]),
            (1, [1.75, 0.9, 0.0]),
            (1, [-0.33, -0.45, 0.84]),
            (1, [-0.33, -0.45, -0.84]),
        ],
    )
}

pub fn ethanol() -> Structure {
    build(
        "ethanol",
        &[
            (6, [0.0, 0.0, 0.0]),
            (6, [1.52, 0.0, 0.0]),
            (8, [2.0, 1.35, 0.0]),
            (1, [2.96, 1.35, 0.0]),
            (1, [1.88, -0.51, 0.89]),
            (1, [1.88, -0.51, -0.89]),
            (1, [-0.36, 1.03, 0.0]),
            (1, [-0.36, -0.51, 0.89]),
            (1, [-0.36, -0.51, -0.89]),
        ],
    )
}

/// Every built-in molecule, smallest first.
pub fn all() -> Vec<Structure> {
    vec![
        water(),
        ammonia(),
        formaldehyde(),
        methane(),
        hydroxylamine(),
        methanol(),
        ethylene(),
        methylamine(),
        ethane(),
        ethanol(),
    ]
}

pub fn by_name(name: &str) -> Option<Structure> {
    all().into_iter().find(|s| s.tag == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::perceive_bonds;

    #[test]
    fn molecules_are_connected_with_sensible_bonds() {
        for s in all() {
            let bonds = perceive_bonds(&s, crate::chem::DEFAULT_BOND_SCALE);
            assert!(bonds.len() >= s.len() - 1, "{}: {} bonds", s.tag, bonds.len());
            for i in 0..s.len() {
                for j in 0..i {
                    assert!(s.distance(i, j) > 0.9, "{} atoms {i},{j} too close", s.tag);
                }
            }
        }
    }
}
