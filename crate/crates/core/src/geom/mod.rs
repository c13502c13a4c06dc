//! Atomic structures: parsing, heavy-atom filtering and superposed RMSD.

mod kabsch;
mod parse;

pub use kabsch::kabsch_rmsd;
pub use parse::{parse_structure, read_structure, write_xyz, Format};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Element symbols indexed by atomic number - 1.
const SYMBOLS: [&str; 54] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe",
];

pub const CARBON: u8 = 6;
pub const NITROGEN: u8 = 7;
pub const OXYGEN: u8 = 8;

/// Case-insensitive lookup of an element symbol.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    let s = symbol.trim();
    SYMBOLS
        .iter()
        .position(|e| e.eq_ignore_ascii_case(s))
        .map(|i| (i + 1) as u8)
}

pub fn element_symbol(z: u8) -> Option<&'static str> {
    SYMBOLS.get((z as usize).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Atomic number.
    pub element: u8,
    /// Cartesian position in Å.
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub id: String,
    pub atoms: Vec<Atom>,
}

impl Structure {
    /// Builds a structure, enforcing the two-atom minimum and finite coordinates.
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyStructure);
        }
        if atoms.len() < 2 {
            return Err(Error::DegenerateStructure { atoms: atoms.len() });
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.element == 0 {
                return Err(Error::Domain(format!("atom {i} has element 0")));
            }
            if a.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain(format!("atom {i} has a non-finite coordinate")));
            }
        }
        Ok(Structure {
            id: id.into(),
            atoms,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn elements(&self) -> Vec<u8> {
        self.atoms.iter().map(|a| a.element).collect()
    }
}

/// Keeps carbon, nitrogen and oxygen atoms in their original order.
pub fn filter_heavy_cno(s: &Structure) -> Result<Structure> {
    let atoms: Vec<Atom> = s
        .atoms
        .iter()
        .filter(|a| matches!(a.element, CARBON | NITROGEN | OXYGEN))
        .copied()
        .collect();
    if atoms.len() < 2 {
        return Err(Error::DegenerateStructure { atoms: atoms.len() });
    }
    Ok(Structure {
        id: s.id.clone(),
        atoms,
    })
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let d = sub(a, b);
    dot(&d, &d).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(element: u8) -> Atom {
        Atom {
            element,
            position: [element as f64, 0.0, 0.0],
        }
    }

    #[test]
    fn filter_keeps_cno_in_order() {
        // C, H, O, P, N
        let s = Structure::new("s", vec![atom(6), atom(1), atom(8), atom(15), atom(7)]).unwrap();
        let f = filter_heavy_cno(&s).unwrap();
        assert_eq!(f.elements(), vec![6, 8, 7]);
        assert_eq!(filter_heavy_cno(&f).unwrap(), f);
    }

    #[test]
    fn filter_identity_on_carbons() {
        let s = Structure::new(
            "cc",
            vec![
                atom(6),
                Atom {
                    element: 6,
                    position: [1.0, 1.0, 1.0],
                },
            ],
        )
        .unwrap();
        assert_eq!(filter_heavy_cno(&s).unwrap(), s);
    }

    #[test]
    fn filter_rejects_degenerate_result() {
        let s = Structure::new("hp", vec![atom(1), atom(15)]).unwrap();
        assert!(matches!(
            filter_heavy_cno(&s),
            Err(Error::DegenerateStructure { atoms: 0 })
        ));
    }

    #[test]
    fn symbols_round_trip() {
        for z in 1..=54u8 {
            assert_eq!(atomic_number(element_symbol(z).unwrap()), Some(z));
        }
        assert_eq!(atomic_number("mg"), Some(12));
        assert_eq!(atomic_number("Xx"), None);
    }

    #[test]
    fn rejects_non_finite_positions() {
        let bad = vec![
            atom(6),
            Atom {
                element: 6,
                position: [f64::NAN, 0.0, 0.0],
            },
        ];
        assert!(Structure::new("bad", bad).is_err());
    }
}
