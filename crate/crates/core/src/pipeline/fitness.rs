use rayon::prelude::*;

use super::{PipelineError, PredictionMatrix};
use crate::clpso::{Evaluation, Objective, ObjectiveError};
use crate::fusion::{argmax, combine, entropy, fuse_stack, ThresholdVector};
use crate::metrics::{confusion, ConfusionCounts, DiceReport};

/// Average Dice of the gated fusion over every pixel of the matrix.
///
/// This is the direct route: each stack goes through [`fuse_stack`] and the
/// resulting masks are scored against the ground truth. [`FitnessTable`]
/// computes the same value from cached entropies.
pub fn fitness_of(thresholds: &ThresholdVector, matrix: &PredictionMatrix) -> Result<DiceReport, PipelineError> {
    let mut preds = Vec::with_capacity(matrix.images().len());
    let mut fallback = 0u64;
    for img in matrix.images() {
        let fused = fuse_stack(&img.stack, thresholds)?;
        fallback += fused.fallback_pixels as u64;
        preds.push(fused.mask);
    }
    let counts = confusion(&preds, &matrix.ground_truth(), matrix.classes())?;
    Ok(counts.report(fallback))
}

/// Precomputed renormalized rows and per-model entropies of a prediction
/// matrix, for repeated fitness evaluation.
#[derive(Debug, Clone)]
pub struct FitnessTable {
    models: usize,
    classes: usize,
    /// Pixel-major `[pixel][model][class]`.
    rows: Vec<f64>,
    /// `[pixel][model]`.
    entropies: Vec<f64>,
    ground: Vec<u8>,
    /// Pixel range of every image.
    spans: Vec<(usize, usize)>,
}

impl FitnessTable {
    pub fn new(matrix: &PredictionMatrix) -> Self {
        let (k, m) = (matrix.models(), matrix.classes());
        let n = matrix.pixel_count();
        let mut rows = vec![0.0; n * k * m];
        let mut entropies = vec![0.0; n * k];
        let mut ground = Vec::with_capacity(n);
        let mut spans = Vec::with_capacity(matrix.images().len());
        let mut offset = 0;
        for img in matrix.images() {
            let len = img.stack.pixel_count();
            spans.push((offset, offset + len));
            rows[offset * k * m..(offset + len) * k * m]
                .par_chunks_mut(k * m)
                .zip(entropies[offset * k..(offset + len) * k].par_chunks_mut(k))
                .enumerate()
                .for_each(|(p, (r, e))| {
                    img.stack.pixel_rows(p, r);
                    for (slot, row) in e.iter_mut().zip(r.chunks_exact(m)) {
                        *slot = entropy(row);
                    }
                });
            ground.extend_from_slice(img.mask.labels());
            offset += len;
        }
        Self {
            models: k,
            classes: m,
            rows,
            entropies,
            ground,
            spans,
        }
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixel_count(&self) -> usize {
        self.ground.len()
    }

    /// Largest per-pixel entropy of model `k`.
    pub fn max_entropy(&self, k: usize) -> f64 {
        self.entropies
            .iter()
            .skip(k)
            .step_by(self.models)
            .fold(0.0, |a, &b| a.max(b))
    }

    fn tally(&self, per_pixel: impl Fn(usize, &mut [f64]) -> (usize, bool) + Sync) -> (ConfusionCounts, u64) {
        let m = self.classes;
        self.spans
            .par_iter()
            .map(|&(start, end)| {
                let mut counts = ConfusionCounts::new(m);
                let mut out = vec![0.0; m];
                let mut fallback = 0u64;
                for p in start..end {
                    let (label, fell_back) = per_pixel(p, &mut out);
                    fallback += fell_back as u64;
                    counts.add(label, self.ground[p] as usize);
                }
                (counts, fallback)
            })
            .reduce(
                || (ConfusionCounts::new(m), 0),
                |(a, fa), (b, fb)| (a.merge(&b), fa + fb),
            )
    }

    /// Dice report of the gated fusion under `thresholds` (one per model).
    pub fn report(&self, thresholds: &[f64]) -> DiceReport {
        assert_eq!(thresholds.len(), self.models, "one threshold per model");
        let (k, m) = (self.models, self.classes);
        let (counts, fallback) = self.tally(|p, out| {
            let rows = &self.rows[p * k * m..(p + 1) * k * m];
            let ent = &self.entropies[p * k..(p + 1) * k];
            let selected = combine(rows, ent, thresholds, m, out);
            (argmax(out), selected == 0)
        });
        counts.report(fallback)
    }

    /// Dice of model `k` on its own (argmax of its rows).
    pub fn model_report(&self, k: usize) -> DiceReport {
        let (km, m) = (self.models * self.classes, self.classes);
        let (counts, _) = self.tally(|p, _| {
            let row = &self.rows[p * km + k * m..p * km + (k + 1) * m];
            (argmax(row), false)
        });
        counts.report(0)
    }

    /// Dice of the plain mean over all models.
    pub fn mean_ensemble_report(&self) -> DiceReport {
        let mut r = self.report(&vec![0.0; self.models]);
        r.fallback_pixel_count = 0;
        r
    }
}

impl Objective for FitnessTable {
    fn evaluate(&self, position: &[f64]) -> Result<Evaluation, ObjectiveError> {
        if position.len() != self.models {
            return Err(format!("{} thresholds for {} models", position.len(), self.models).into());
        }
        let r = self.report(position);
        Ok(Evaluation {
            fitness: r.average,
            fallback_pixels: r.fallback_pixel_count,
        })
    }
}
