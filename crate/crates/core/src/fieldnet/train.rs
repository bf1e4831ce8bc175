use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward_head, backward_trunk, forward_cached, head_forward, FieldParams};
use super::topology::ComplexTopology;
use super::FieldError;
use crate::flow::interpolate;
use crate::geometry::{kabsch_uniform, RigidTransform};
use crate::molgraph::MolGraph;
use crate::priors::{assemble_prior, noised_template, CenterMode, PriorConfig};
use crate::structures::{ComplexState, Partition, Structure};
use crate::Vec3;

/// Per-atom error cap (Å) of the clamped structure loss.
pub const DEFAULT_ERROR_CLAMP: f64 = 10.0;

const DISTANCE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StructureLoss {
    /// Mean squared coordinate error after optimal superposition (Ų).
    #[default]
    AlignedMse,
    /// Mean per-atom distance after superposition, each capped at `clamp` Å.
    ClampedAlignedError { clamp: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda_x: f64,
    pub lambda_b: f64,
    pub sigma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Independent (prior, t) draws averaged into each update.
    pub batch_size: usize,
    pub seed: u64,
    pub structure_loss: StructureLoss,
    pub prior_center: CenterMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_x: 0.2,
            lambda_b: 0.1,
            sigma: 1e-4,
            learning_rate: 0.2,
            epochs: 200,
            batch_size: 16,
            seed: 0,
            structure_loss: StructureLoss::AlignedMse,
            prior_center: CenterMode::ProteinCentroid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: String| Err(FieldError::InvalidConfig(m));
        if !(self.lambda_x >= 0.0 && self.lambda_b >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if let StructureLoss::ClampedAlignedError { clamp } = self.structure_loss {
            if !(clamp > 0.0) {
                return bad(format!("error clamp must be positive, got {clamp}"));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_x: self.lambda_x,
            lambda_b: self.lambda_b,
            structure_loss: self.structure_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_x: f64,
    pub lambda_b: f64,
    pub structure_loss: StructureLoss,
}

/// One regression target: interpolated state `x_t`, its time, the noised
/// endpoint and optional affinity label.
#[derive(Debug, Clone)]
pub struct TrainItem<'a> {
    pub topology: &'a ComplexTopology,
    pub x_t: ComplexState,
    pub t: f64,
    pub target: Vec<Vec3>,
    pub affinity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossBreakdown {
    /// `λ_X · structure + λ_B · affinity`.
    pub total: f64,
    pub structure: f64,
    /// Squared affinity error; zero for unlabelled items.
    pub affinity: f64,
}

/// Structure loss value and `∂/∂x̂`. With `frozen`, the superposition is
/// taken as given instead of refit.
pub fn structure_loss(
    predicted: &[Vec3],
    target: &[Vec3],
    kind: StructureLoss,
    frozen: Option<&RigidTransform>,
) -> (f64, Vec<Vec3>) {
    let n = predicted.len() as f64;
    let transform = match frozen {
        Some(t) => *t,
        None => structure_alignment(predicted, target),
    };
    let rt = transform.rotation.transpose();
    let residuals: Vec<Vec3> = predicted
        .iter()
        .zip(target)
        .map(|(p, q)| transform.apply(p) - q)
        .collect();
    match kind {
        StructureLoss::AlignedMse => {
            let value = residuals.iter().map(|r| r.norm_squared()).sum::<f64>() / (3.0 * n);
            let grad = residuals.iter().map(|r| rt * r * (2.0 / (3.0 * n))).collect();
            (value, grad)
        }
        StructureLoss::ClampedAlignedError { clamp } => {
            let mut value = 0.0;
            let grad = residuals
                .iter()
                .map(|r| {
                    let d = (r.norm_squared() + DISTANCE_EPSILON).sqrt();
                    if d < clamp {
                        value += d;
                        rt * r / (d * n)
                    } else {
                        value += clamp;
                        Vec3::zeros()
                    }
                })
                .collect();
            (value / n, grad)
        }
    }
}

/// Superposition used by [`structure_loss`] when not frozen.
pub fn structure_alignment(predicted: &[Vec3], target: &[Vec3]) -> RigidTransform {
    kabsch_uniform(predicted, target).unwrap_or_else(|_| RigidTransform::identity())
}

/// Mean loss over `batch` and its exact gradient. The affinity head reads
/// the embedding of the trunk re-run at `t = 1` on the detached prediction,
/// so affinity error reaches only head parameters.
pub fn gradients(
    params: &FieldParams,
    batch: &[TrainItem<'_>],
    weights: &LossWeights,
) -> Result<(LossBreakdown, FieldParams), FieldError> {
    if batch.is_empty() {
        return Err(FieldError::EmptyBatch);
    }
    let mut grads = FieldParams::zeros(params.width())?;
    let mut loss = LossBreakdown::default();
    let scale = 1.0 / batch.len() as f64;
    for item in batch {
        let (out, acts) = forward_cached(params, item.topology, &item.x_t, item.t)?;
        if item.target.len() != out.prediction.len() {
            return Err(FieldError::TopologyMismatch {
                expected: out.prediction.len(),
                actual: item.target.len(),
            });
        }
        let (s, ds) = structure_loss(&out.prediction, &item.target, weights.structure_loss, None);
        if weights.lambda_x != 0.0 {
            backward_trunk(params, &acts, &ds, scale * weights.lambda_x, grads.values_mut());
        }
        let mut a = 0.0;
        if let Some(label) = item.affinity {
            let detached = item.x_t.with_coords(out.prediction.clone(), 1.0)?;
            let (pooled, _) = forward_cached(params, item.topology, &detached, 1.0)?;
            let (b, hidden) = head_forward(params, &pooled.embedding);
            a = (b - label).powi(2);
            if weights.lambda_b != 0.0 {
                backward_head(
                    params,
                    &pooled.embedding,
                    &hidden,
                    2.0 * (b - label),
                    scale * weights.lambda_b,
                    grads.values_mut(),
                );
            }
        }
        loss.structure += scale * s;
        loss.affinity += scale * a;
    }
    loss.total = weights.lambda_x * loss.structure + weights.lambda_b * loss.affinity;
    if !loss.total.is_finite() {
        return Err(FieldError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

/// A coupled apo/holo pair prepared for training: apo template already
/// superposed on the holo frame, holo ligand rows in graph atom order.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub template: Structure,
    pub graph: MolGraph,
    pub topology: ComplexTopology,
    /// Holo protein heavy atoms followed by ligand atoms.
    pub target: ComplexState,
    pub affinity: Option<f64>,
}

impl TrainingExample {
    pub fn new(apo: &Structure, holo: &Structure, graph: &MolGraph, affinity: Option<f64>) -> Result<Self, FieldError> {
        let np = apo.protein_atom_count();
        if holo.protein_atom_count() != np {
            return Err(FieldError::Dataset(format!(
                "apo has {np} protein atoms, holo has {}",
                holo.protein_atom_count()
            )));
        }
        if holo.ligand_atoms.len() != graph.atom_count() {
            return Err(FieldError::Dataset(format!(
                "holo ligand has {} atoms, SMILES has {}",
                holo.ligand_atoms.len(),
                graph.atom_count()
            )));
        }
        if graph.fragment_ids().windows(2).any(|w| w[1] < w[0]) {
            return Err(FieldError::Dataset("ligand fragments must occupy contiguous atom ranges".into()));
        }
        let mut coords = holo.protein_coords();
        coords.extend(holo.ligand_coords());
        let partition = Partition::new(np, graph.fragment_ids().to_vec())?;
        let target = ComplexState::new(coords, partition, 1.0)?;
        Ok(TrainingExample {
            template: apo.clone(),
            graph: graph.clone(),
            topology: ComplexTopology::from_structure(apo, graph),
            target,
            affinity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: FieldParams,
    pub curve: Vec<EpochLoss>,
}

fn draw_item<'a, R: Rng>(example: &'a TrainingExample, config: &TrainConfig, rng: &mut R) -> Result<TrainItem<'a>, FieldError> {
    let prior = PriorConfig {
        sigma: config.sigma,
        center: config.prior_center,
        seed: config.seed,
    };
    let x0 = assemble_prior(&example.template, &example.graph, &prior, rng)?;
    let x1 = example
        .target
        .with_coords(noised_template(&example.target.coords, config.sigma, rng)?, 1.0)?;
    let t: f64 = rng.random_range(0.0..1.0);
    let x_t = interpolate(&x0, &x1, t)?;
    Ok(TrainItem {
        topology: &example.topology,
        x_t,
        t,
        target: x1.coords,
        affinity: example.affinity,
    })
}

/// Plain gradient descent. Each epoch visits every example once in a seeded
/// shuffled order and takes one step per example; the recorded epoch loss is
/// the mean pre-update loss over examples.
pub fn train(initial: &FieldParams, dataset: &[TrainingExample], config: &TrainConfig) -> Result<TrainOutcome, FieldError> {
    if dataset.is_empty() {
        return Err(FieldError::EmptyDataset);
    }
    config.validate()?;
    let weights = config.loss_weights();
    let mut params = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for k in (1..order.len()).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let mut epoch_loss = LossBreakdown::default();
        for &row in &order {
            let batch = (0..config.batch_size)
                .map(|_| draw_item(&dataset[row], config, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let (loss, grads) = gradients(&params, &batch, &weights)?;
            for (p, g) in params.values_mut().iter_mut().zip(grads.values()) {
                *p -= config.learning_rate * g;
            }
            let w = 1.0 / dataset.len() as f64;
            epoch_loss.total += w * loss.total;
            epoch_loss.structure += w * loss.structure;
            epoch_loss.affinity += w * loss.affinity;
        }
        log::debug!("epoch {epoch}: loss {:.6}", epoch_loss.total);
        curve.push(EpochLoss { epoch, loss: epoch_loss });
    }
    Ok(TrainOutcome { params, curve })
}
