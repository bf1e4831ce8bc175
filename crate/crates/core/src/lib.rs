//! Flow-matching toolkit for generating ligand-bound (holo) protein-ligand
//! complexes from unbound (apo) protein templates and ligand SMILES.

pub mod coupling;
pub mod eval;
pub mod fieldnet;
pub mod flow;
pub mod geometry;
pub mod molgraph;
pub mod priors;
pub mod structures;

/// Cartesian point or displacement in Å.
pub type Vec3 = nalgebra::Vector3<f64>;
