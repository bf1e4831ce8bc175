//! Initial-state (`t = 0`) samplers: harmonic ligand fragments drawn from the
//! Gaussian whose precision is the bond-graph Laplacian, and protein templates
//! perturbed by isotropic Gaussian noise.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::molgraph::{FragmentLaplacian, GraphError, MolGraph};
use crate::structures::{concat_state, ComplexState, StateError, Structure};
use crate::Vec3;

/// Default standard deviation (Å) of the template noise.
pub const DEFAULT_SIGMA: f64 = 1e-4;

const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = -1e-10;
const NULL_EIGENVALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PriorError {
    #[error("Laplacian has negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("ligand fragments must occupy contiguous atom ranges")]
    InterleavedFragments,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Where each harmonic ligand fragment is centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Centroid of the template's Cα atoms (origin if there are none).
    #[default]
    ProteinCentroid,
    Origin,
    Point([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub sigma: f64,
    pub center: CenterMode,
    pub seed: u64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            sigma: DEFAULT_SIGMA,
            center: CenterMode::default(),
            seed: 0,
        }
    }
}

/// Draw one fragment from `p(x) ∝ exp(-½ xᵀ L x)` independently per spatial
/// axis, with the free translation fixed so the centroid is `center`.
pub fn sample_harmonic<R: Rng + ?Sized>(
    laplacian: &FragmentLaplacian,
    center: Vec3,
    rng: &mut R,
) -> Result<Vec<Vec3>, PriorError> {
    let n = laplacian.size();
    let eig = SymmetricEigen::new(laplacian.matrix.clone());
    if let Some(&bad) = eig
        .eigenvalues
        .iter()
        .find(|&&v| v < NEGATIVE_EIGENVALUE_TOLERANCE)
    {
        return Err(PriorError::NegativeEigenvalue(bad));
    }
    let mut points = vec![Vec3::zeros(); n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= NULL_EIGENVALUE_TOLERANCE {
            continue;
        }
        let std = lambda.sqrt().recip();
        let coeff = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) * std;
        let v = eig.eigenvectors.column(k);
        for (i, p) in points.iter_mut().enumerate() {
            *p += coeff * v[i];
        }
    }
    if n > 0 {
        let shift = center - crate::geometry::centroid(&points);
        for p in &mut points {
            *p += shift;
        }
    }
    Ok(points)
}

/// Template coordinates plus i.i.d. `N(0, sigma²)` noise per coordinate.
/// `sigma = 0` returns the template unchanged.
pub fn noised_template<R: Rng + ?Sized>(
    template: &[Vec3],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>, PriorError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(PriorError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(template.to_vec());
    }
    Ok(template
        .iter()
        .map(|p| {
            p + Vec3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * sigma
        })
        .collect())
}

/// Resolve a [`CenterMode`] against a protein template.
pub fn resolve_center(template: &Structure, mode: CenterMode) -> Vec3 {
    match mode {
        CenterMode::Origin => Vec3::zeros(),
        CenterMode::Point(p) => Vec3::new(p[0], p[1], p[2]),
        CenterMode::ProteinCentroid => {
            let ca = template.ca_coords();
            if ca.is_empty() {
                Vec3::zeros()
            } else {
                crate::geometry::centroid(&ca)
            }
        }
    }
}

/// Harmonic samples for every fragment of `graph`, in fragment order.
pub fn sample_ligand<R: Rng + ?Sized>(
    graph: &MolGraph,
    center: Vec3,
    rng: &mut R,
) -> Result<Vec<Vec<Vec3>>, PriorError> {
    let ids = graph.fragment_ids();
    if ids.windows(2).any(|w| w[1] < w[0]) {
        return Err(PriorError::InterleavedFragments);
    }
    (0..graph.fragment_count())
        .map(|f| sample_harmonic(&graph.laplacian(f)?, center, rng))
        .collect()
}

/// Prior complex state at `t = 0`: noised protein template followed by one
/// independent harmonic sample per ligand fragment.
pub fn assemble_prior<R: Rng + ?Sized>(
    template: &Structure,
    graph: &MolGraph,
    config: &PriorConfig,
    rng: &mut R,
) -> Result<ComplexState, PriorError> {
    let protein = noised_template(&template.protein_coords(), config.sigma, rng)?;
    let center = resolve_center(template, config.center);
    let fragments = sample_ligand(graph, center, rng)?;
    Ok(concat_state(&protein, &fragments, 0.0)?)
}
