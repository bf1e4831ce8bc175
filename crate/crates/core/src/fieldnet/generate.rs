use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::network::{forward, head_forward, FieldParams};
use super::topology::ComplexTopology;
use super::FieldError;
use crate::flow::{integrate, EndpointField, FlowConfig};
use crate::geometry::kabsch_uniform;
use crate::molgraph::MolGraph;
use crate::priors::{assemble_prior, PriorConfig};
use crate::structures::{ComplexState, Structure, Trajectory};
use crate::Vec3;

/// Number of ranked samples returned by [`generate`].
pub const TOP_K: usize = 5;

/// Trained parameters bound to one complex topology.
#[derive(Debug, Clone, Copy)]
pub struct BoundField<'a> {
    pub params: &'a FieldParams,
    pub topology: &'a ComplexTopology,
}

impl EndpointField for BoundField<'_> {
    fn predict(&self, state: &ComplexState, t: f64) -> Result<Vec<Vec3>, String> {
        predict_endpoint(self.params, self.topology, state, t).map_err(|e| e.to_string())
    }
}

/// Network prediction superposed onto `state`. The aligned structure losses
/// leave the global pose of a prediction unconstrained; pinning it to the
/// input keeps sampled states in the frame the network was trained in.
pub fn predict_endpoint(
    params: &FieldParams,
    topology: &ComplexTopology,
    state: &ComplexState,
    t: f64,
) -> Result<Vec<Vec3>, FieldError> {
    let raw = forward(params, topology, state, t)?.prediction;
    if raw == state.coords {
        return Ok(raw);
    }
    Ok(match kabsch_uniform(&raw, &state.coords) {
        Ok(transform) => transform.apply_all(&raw),
        Err(_) => raw,
    })
}

/// Affinity (pK scale) read from the trunk embedding at `t = 1`.
pub fn predict_affinity(params: &FieldParams, topology: &ComplexTopology, state: &ComplexState) -> Result<f64, FieldError> {
    let out = forward(params, topology, state, 1.0)?;
    Ok(head_forward(params, &out.embedding).0)
}

/// Self-consistency score: minus the mean distance between each atom and its
/// endpoint re-predicted at `t = 1 − 1/steps` by [`predict_endpoint`]. Zero
/// at a fixed point.
pub fn confidence_score(
    params: &FieldParams,
    topology: &ComplexTopology,
    state: &ComplexState,
    steps: usize,
) -> Result<f64, FieldError> {
    let t = 1.0 - 1.0 / steps.max(1) as f64;
    let predicted = predict_endpoint(params, topology, state, t)?;
    let mean = state
        .coords
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).norm())
        .sum::<f64>()
        / state.len() as f64;
    Ok(-mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub flow: FlowConfig,
    pub prior: PriorConfig,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    /// Draw index; also the RNG stream id.
    pub index: usize,
    pub structure: Structure,
    pub trajectory: Trajectory,
    pub confidence: f64,
    pub affinity: f64,
}

/// RNG for draw `index`: the root seed with stream `index`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_sample(
    params: &FieldParams,
    topology: &ComplexTopology,
    template: &Structure,
    graph: &MolGraph,
    config: &GenerateConfig,
    index: usize,
) -> Result<GeneratedSample, FieldError> {
    let mut rng = sample_rng(config.prior.seed, index);
    let x0 = assemble_prior(template, graph, &config.prior, &mut rng)?;
    let field = BoundField { params, topology };
    let trajectory = integrate(&field, &x0, &config.flow, config.prior.seed)?;
    let last = trajectory.last_state().expect("trajectory has frames").clone();
    let confidence = confidence_score(params, topology, &last, config.flow.steps)?;
    let affinity = predict_affinity(params, topology, &last)?;
    let elements = graph.elements();
    let structure = template
        .with_protein_coords(last.protein())
        .with_ligand(&elements, last.ligand(), graph.fragment_ids());
    Ok(GeneratedSample {
        index,
        structure,
        trajectory,
        confidence,
        affinity,
    })
}

/// Draw `samples` prior states, integrate each, and return the
/// `min(samples, 5)` most confident, best first (ties by draw index).
/// Samples run on the current rayon pool.
pub fn generate(
    params: &FieldParams,
    template: &Structure,
    graph: &MolGraph,
    config: &GenerateConfig,
) -> Result<Vec<GeneratedSample>, FieldError> {
    if config.samples == 0 {
        return Err(FieldError::InvalidConfig("need at least one sample".into()));
    }
    config.flow.validate()?;
    let topology = ComplexTopology::from_structure(template, graph);
    let mut all = (0..config.samples)
        .into_par_iter()
        .map(|k| run_sample(params, &topology, template, graph, config, k))
        .collect::<Result<Vec<_>, _>>()?;
    all.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.index.cmp(&b.index)));
    all.truncate(TOP_K);
    Ok(all)
}
