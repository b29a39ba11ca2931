use std::path::Path;

use super::PipelineError;
use crate::io::{read_mask, read_stack, DatasetManifest, LabelMask, ProbabilityStack};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixImage {
    pub id: String,
    /// Training fold; `None` for held-out test images.
    pub fold: Option<usize>,
    pub stack: ProbabilityStack,
    pub mask: LabelMask,
}

/// Per-image prediction stacks of all members with aligned ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    model_names: Vec<String>,
    classes: usize,
    images: Vec<MatrixImage>,
}

impl PredictionMatrix {
    pub fn new(model_names: Vec<String>, classes: usize, images: Vec<MatrixImage>) -> Result<Self, PipelineError> {
        if model_names.is_empty() {
            return Err(PipelineError::ShapeMismatch("no models".into()));
        }
        for img in &images {
            if img.stack.models() != model_names.len() || img.stack.classes() != classes {
                return Err(PipelineError::ShapeMismatch(format!(
                    "image {:?}: stack has K={}, M={}, expected K={}, M={classes}",
                    img.id,
                    img.stack.models(),
                    img.stack.classes(),
                    model_names.len()
                )));
            }
            if (img.stack.height(), img.stack.width()) != (img.mask.height(), img.mask.width()) {
                return Err(PipelineError::ShapeMismatch(format!(
                    "image {:?}: stack is {}x{}, mask is {}x{}",
                    img.id,
                    img.stack.height(),
                    img.stack.width(),
                    img.mask.height(),
                    img.mask.width()
                )));
            }
            img.mask.check_classes(classes)?;
        }
        Ok(Self {
            model_names,
            classes,
            images,
        })
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn models(&self) -> usize {
        self.model_names.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn images(&self) -> &[MatrixImage] {
        &self.images
    }

    pub fn pixel_count(&self) -> usize {
        self.images.iter().map(|i| i.stack.pixel_count()).sum()
    }

    pub fn ground_truth(&self) -> Vec<LabelMask> {
        self.images.iter().map(|i| i.mask.clone()).collect()
    }
}

fn load_combined(
    manifest: &DatasetManifest,
    path: &Path,
) -> Result<ProbabilityStack, PipelineError> {
    let stack = read_stack(manifest.resolve(path))?;
    if let Some(names) = stack.model_names() {
        if names != manifest.model_names.as_slice() {
            return Err(PipelineError::ShapeMismatch(format!(
                "{}: stack models {names:?} differ from manifest models {:?}",
                path.display(),
                manifest.model_names
            )));
        }
    }
    Ok(stack)
}

/// Assembles the out-of-fold prediction matrix of the training entries.
///
/// Each image's predictions must come from models that held out the
/// image's own fold; anything else is rejected as leakage.
pub fn build_prediction_matrix(manifest: &DatasetManifest) -> Result<PredictionMatrix, PipelineError> {
    let k = manifest.model_names.len();
    let folds = manifest.fold_assignment();
    let mut images = Vec::with_capacity(manifest.entries.len());
    for (entry, fold) in manifest.entries.iter().zip(folds) {
        for p in &entry.predictions {
            if p.held_out_fold != fold {
                return Err(PipelineError::FoldLeakage {
                    image: entry.id.clone(),
                    fold,
                    held_out_fold: p.held_out_fold,
                    path: p.path.display().to_string(),
                });
            }
        }
        let missing = |model: Option<&String>| PipelineError::MissingFoldPrediction {
            image: entry.id.clone(),
            fold,
            model: model.cloned(),
        };
        let combined: Vec<_> = entry.predictions.iter().filter(|p| p.model.is_none()).collect();
        let stack = match combined.as_slice() {
            [] => {
                if entry.predictions.is_empty() {
                    return Err(missing(None));
                }
                let mut parts = Vec::with_capacity(k);
                for name in &manifest.model_names {
                    let refs: Vec<_> = entry
                        .predictions
                        .iter()
                        .filter(|p| p.model.as_deref() == Some(name.as_str()))
                        .collect();
                    match refs.as_slice() {
                        [] => return Err(missing(Some(name))),
                        [one] => {
                            let s = read_stack(manifest.resolve(&one.path))?;
                            if s.models() != 1 {
                                return Err(PipelineError::ShapeMismatch(format!(
                                    "{}: per-model prediction holds {} models",
                                    one.path.display(),
                                    s.models()
                                )));
                            }
                            parts.push(s);
                        }
                        _ => {
                            return Err(PipelineError::ShapeMismatch(format!(
                                "image {:?} lists model {name:?} more than once",
                                entry.id
                            )))
                        }
                    }
                }
                ProbabilityStack::concat(&parts)?.with_model_names(manifest.model_names.clone())?
            }
            [one] if entry.predictions.len() == 1 => load_combined(manifest, &one.path)?,
            _ => {
                return Err(PipelineError::ShapeMismatch(format!(
                    "image {:?} mixes combined and per-model predictions",
                    entry.id
                )))
            }
        };
        let mask = read_mask(manifest.resolve(&entry.mask))?;
        images.push(MatrixImage {
            id: entry.id.clone(),
            fold: Some(fold),
            stack,
            mask,
        });
    }
    PredictionMatrix::new(manifest.model_names.clone(), manifest.class_count, images)
}

/// Test entries that carry ground truth, as a matrix for scoring.
pub fn test_matrix(manifest: &DatasetManifest) -> Result<PredictionMatrix, PipelineError> {
    let mut images = Vec::new();
    for t in &manifest.test {
        let Some(mask) = &t.mask else { continue };
        images.push(MatrixImage {
            id: t.id.clone(),
            fold: None,
            stack: load_combined(manifest, &t.stack)?,
            mask: read_mask(manifest.resolve(mask))?,
        });
    }
    PredictionMatrix::new(manifest.model_names.clone(), manifest.class_count, images)
}
