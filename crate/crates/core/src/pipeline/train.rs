use super::{build_prediction_matrix, FitnessTable, PipelineError, PredictionMatrix};
use crate::clpso::{self, SwarmConfig, SwarmTrace};
use crate::fusion::{fuse_stack, ThresholdVector};
use crate::io::{DatasetManifest, LabelMask, ProbabilityStack, ThresholdDocument};

/// Fits thresholds on the out-of-fold matrix described by `manifest`.
pub fn train(
    manifest: &DatasetManifest,
    config: &SwarmConfig,
) -> Result<(ThresholdDocument, SwarmTrace), PipelineError> {
    train_matrix(&build_prediction_matrix(manifest)?, config)
}

pub fn train_matrix(
    matrix: &PredictionMatrix,
    config: &SwarmConfig,
) -> Result<(ThresholdDocument, SwarmTrace), PipelineError> {
    let table = FitnessTable::new(matrix);
    let outcome = clpso::optimize(config, &table, matrix.models(), matrix.classes())?;
    let doc = ThresholdDocument {
        model_names: matrix.model_names().to_vec(),
        class_count: matrix.classes(),
        thresholds: outcome.best_position,
        achieved_dice: outcome.best_fitness,
        fallback_pixels: outcome.best_fallback_pixels,
        evaluations: outcome.evaluations,
        seed: config.seed,
        config: config.clone(),
    };
    doc.validate()?;
    Ok((doc, outcome.trace))
}

/// Segments one image with fitted thresholds.
pub fn segment(stack: &ProbabilityStack, doc: &ThresholdDocument) -> Result<LabelMask, PipelineError> {
    if stack.models() != doc.thresholds.len() || stack.classes() != doc.class_count {
        return Err(PipelineError::ShapeMismatch(format!(
            "stack has K={}, M={} but thresholds are for K={}, M={}",
            stack.models(),
            stack.classes(),
            doc.thresholds.len(),
            doc.class_count
        )));
    }
    if let Some(names) = stack.model_names() {
        if names != doc.model_names.as_slice() {
            return Err(PipelineError::ShapeMismatch(format!(
                "stack models {names:?} differ from document models {:?}",
                doc.model_names
            )));
        }
    }
    let thresholds = ThresholdVector::new(doc.thresholds.clone(), doc.class_count)?;
    Ok(fuse_stack(stack, &thresholds)?.mask)
}
