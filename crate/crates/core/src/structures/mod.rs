//! Coordinate data model: protein/ligand structures, concatenated complex
//! states and sampling trajectories, plus their file formats.

mod pdb;
mod state;
mod trajectory;

pub use pdb::{read_pdb, write_pdb, PdbError};
pub use state::{concat_state, split_state, ComplexState, Partition, StateError};
pub use trajectory::{read_trajectory, write_trajectory, Frame, Trajectory, TrajectoryError, TrajectoryMeta};

use crate::Vec3;

/// The twenty standard amino-acid residue names.
pub const AMINO_ACIDS: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ProteinAtom {
    pub name: String,
    pub element: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub name: String,
    pub index: i32,
    pub atoms: Vec<ProteinAtom>,
}

impl Residue {
    /// Position of the residue's Cα, if it has exactly one.
    pub fn ca(&self) -> Option<Vec3> {
        let mut it = self.atoms.iter().filter(|a| a.name == "CA");
        match (it.next(), it.next()) {
            (Some(a), None) => Some(a.position),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: char,
    pub residues: Vec<Residue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigandAtom {
    pub element: String,
    pub position: Vec3,
    pub fragment: usize,
}

/// Protein chains plus ligand heavy atoms. Protein atoms are ordered by
/// chain (file order), residue, then atom.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Structure {
    pub chains: Vec<Chain>,
    pub ligand_atoms: Vec<LigandAtom>,
}

impl Structure {
    pub fn residue_count(&self) -> usize {
        self.chains.iter().map(|c| c.residues.len()).sum()
    }

    pub fn protein_atom_count(&self) -> usize {
        self.residues().map(|r| r.atoms.len()).sum()
    }

    pub fn residues(&self) -> impl Iterator<Item = &Residue> {
        self.chains.iter().flat_map(|c| c.residues.iter())
    }

    /// All protein heavy-atom positions in storage order.
    pub fn protein_coords(&self) -> Vec<Vec3> {
        self.residues()
            .flat_map(|r| r.atoms.iter().map(|a| a.position))
            .collect()
    }

    /// Cα positions, one per residue. Residues without a unique Cα are skipped;
    /// structures from [`read_pdb`] always have one.
    pub fn ca_coords(&self) -> Vec<Vec3> {
        self.residues().filter_map(Residue::ca).collect()
    }

    /// Row index of each residue's Cα within [`Structure::protein_coords`].
    pub fn ca_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for r in self.residues() {
            if let Some(k) = r.atoms.iter().position(|a| a.name == "CA") {
                out.push(offset + k);
            }
            offset += r.atoms.len();
        }
        out
    }

    pub fn ligand_coords(&self) -> Vec<Vec3> {
        self.ligand_atoms.iter().map(|a| a.position).collect()
    }

    pub fn ligand_fragment_ids(&self) -> Vec<usize> {
        self.ligand_atoms.iter().map(|a| a.fragment).collect()
    }

    /// Copy with protein atom positions replaced, in storage order.
    ///
    /// Panics if `coords` does not have one row per protein atom.
    pub fn with_protein_coords(&self, coords: &[Vec3]) -> Structure {
        assert_eq!(coords.len(), self.protein_atom_count(), "protein coordinate count");
        let mut out = self.clone();
        let mut it = coords.iter();
        for chain in &mut out.chains {
            for residue in &mut chain.residues {
                for atom in &mut residue.atoms {
                    atom.position = *it.next().expect("length checked");
                }
            }
        }
        out
    }

    /// Copy with the ligand replaced by the given elements, positions and
    /// fragment labels.
    pub fn with_ligand(&self, elements: &[&str], coords: &[Vec3], fragments: &[usize]) -> Structure {
        assert_eq!(elements.len(), coords.len());
        assert_eq!(fragments.len(), coords.len());
        let mut out = self.clone();
        out.ligand_atoms = elements
            .iter()
            .zip(coords)
            .zip(fragments)
            .map(|((e, p), f)| LigandAtom {
                element: e.to_string(),
                position: *p,
                fragment: *f,
            })
            .collect();
        out
    }

    /// Apply `rotation * x + translation` to every protein and ligand atom.
    pub fn transformed(&self, transform: &crate::geometry::RigidTransform) -> Structure {
        let mut out = self.clone();
        for chain in &mut out.chains {
            for residue in &mut chain.residues {
                for atom in &mut residue.atoms {
                    atom.position = transform.apply(&atom.position);
                }
            }
        }
        for atom in &mut out.ligand_atoms {
            atom.position = transform.apply(&atom.position);
        }
        out
    }
}

/// Capitalize an element symbol: `CL` -> `Cl`.
pub(crate) fn normalize_element(raw: &str) -> String {
    let raw = raw.trim();
    let mut chars = raw.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
        None => String::new(),
    }
}
