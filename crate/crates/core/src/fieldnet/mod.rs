//! Small trainable endpoint network with an affinity head, its training loop
//! and the sampling pipeline built on it.
//!
//! The network is translation-equivariant through centred inputs and
//! permutation-equivariant through shared per-atom weights and mean pooling.
//! Rotation equivariance is not built in.

mod checkpoint;
mod generate;
mod network;
mod topology;
mod train;


pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use generate::{
    confidence_score, generate, predict_affinity, predict_endpoint, sample_rng, BoundField, GenerateConfig, GeneratedSample, TOP_K,
};
pub use network::{forward, init_field, FieldOutput, FieldParams, DEFAULT_WIDTH, FEATURES, POSITION_SCALE};
pub use topology::{ComplexTopology, DESCRIPTORS};
pub use train::{
    gradients, structure_alignment, structure_loss, train, EpochLoss, LossBreakdown, LossWeights, StructureLoss,
    TrainConfig, TrainItem, TrainOutcome, TrainingExample, DEFAULT_ERROR_CLAMP,
};

use crate::flow::FlowError;
use crate::priors::PriorError;
use crate::structures::StateError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("hidden width must be at least 1")]
    InvalidWidth,
    #[error("expected {expected} parameters, got {actual}")]
    ParameterCount { expected: usize, actual: usize },
    #[error("parameters must be finite")]
    NonFiniteParameter,
    #[error("non-finite activations in layer {layer}")]
    NonFinite { layer: &'static str },
    #[error("topology describes {expected} rows, state has {actual}")]
    TopologyMismatch { expected: usize, actual: usize },
    #[error("t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    State(#[from] StateError),
}
