//! Stacking, threshold training and segmentation.
//!
//! Training follows three steps: assemble the out-of-fold prediction matrix
//! (every training image scored by models that never saw its fold), fit the
//! threshold vector with the swarm using class-averaged Dice of the gated
//! fusion as fitness, then segment new images with the fitted thresholds.

mod fitness;
mod matrix;
mod oracle;
mod report;
mod synth;
mod train;

pub use fitness::{fitness_of, FitnessTable};
pub use matrix::{build_prediction_matrix, test_matrix, MatrixImage, PredictionMatrix};
pub use oracle::{grid_oracle, GridOracleSpec, OracleResult, MAX_GRID_POINTS};
pub use report::{evaluate_masks, evaluate_matrix, EvaluationReport};
pub use synth::{
    emit_stack, random_masks, shift_mask, synthesize_matrix, synthesize_predictions, SyntheticPredictorSpec,
};
pub use train::{segment, train, train_matrix};

use crate::clpso::SwarmError;
use crate::fusion::FusionError;
use crate::io::FormatError;
use crate::metrics::MetricsError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error("image {image:?} (fold {fold}) has no out-of-fold prediction{}", model.as_ref().map(|m| format!(" for model {m:?}")).unwrap_or_default())]
    MissingFoldPrediction {
        image: String,
        fold: usize,
        model: Option<String>,
    },
    #[error("image {image:?} is in fold {fold} but {path} comes from a model that held out fold {held_out_fold} (trained on the image's own fold)")]
    FoldLeakage {
        image: String,
        fold: usize,
        held_out_fold: usize,
        path: String,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid of {points_per_dim}^{models} points exceeds the limit of {limit}")]
    GridTooLarge {
        points_per_dim: usize,
        models: usize,
        limit: u64,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

impl PipelineError {
    pub fn is_io(&self) -> bool {
        match self {
            PipelineError::Format(e) => e.is_io(),
            PipelineError::Swarm(SwarmError::Io { .. }) => true,
            _ => false,
        }
    }
}
