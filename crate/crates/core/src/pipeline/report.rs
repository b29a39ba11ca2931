use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FitnessTable, PipelineError, PredictionMatrix};
use crate::fusion::ThresholdVector;
use crate::io::LabelMask;
use crate::metrics::{confusion, DiceReport};

/// Scores of every member, the plain mean ensemble, the gated ensemble and
/// optionally a set of externally produced masks on one image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub images: usize,
    pub pixels: u64,
    pub model_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    pub per_model: Vec<DiceReport>,
    pub mean_ensemble: DiceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gated_ensemble: Option<DiceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_masks: Option<DiceReport>,
}

pub fn evaluate_matrix(matrix: &PredictionMatrix, thresholds: Option<&ThresholdVector>) -> EvaluationReport {
    let table = FitnessTable::new(matrix);
    EvaluationReport {
        images: matrix.images().len(),
        pixels: matrix.pixel_count() as u64,
        model_names: matrix.model_names().to_vec(),
        thresholds: thresholds.map(|t| t.values().to_vec()),
        per_model: (0..matrix.models()).map(|k| table.model_report(k)).collect(),
        mean_ensemble: table.mean_ensemble_report(),
        gated_ensemble: thresholds.map(|t| table.report(t.values())),
        predicted_masks: None,
    }
}

/// Dice of predicted masks against the matrix ground truth, matched by
/// position.
pub fn evaluate_masks(matrix: &PredictionMatrix, preds: &[LabelMask]) -> Result<DiceReport, PipelineError> {
    Ok(confusion(preds, &matrix.ground_truth(), matrix.classes())?.report(0))
}

impl EvaluationReport {
    /// Fixed-column UTF-8 table; column order never changes.
    pub fn render_table(&self) -> String {
        let classes = self.mean_ensemble.per_class.len();
        let name_w = self
            .model_names
            .iter()
            .map(String::len)
            .chain(["gated-ensemble".len(), "predicted-masks".len()])
            .max()
            .unwrap_or(0);
        let mut s = String::new();
        let _ = write!(s, "{:<name_w$}  {:>9}  {:>8}", "member", "threshold", "dice");
        for c in 0..classes {
            let _ = write!(s, "  {:>8}", format!("dice[{c}]"));
        }
        let _ = writeln!(s, "  {:>9}", "fallback");
        let mut line = |name: &str, threshold: Option<f64>, r: &DiceReport, fallback: Option<u64>| {
            let t = threshold.map_or("-".to_string(), |t| format!("{t:.6}"));
            let _ = write!(s, "{name:<name_w$}  {t:>9}  {:>8.6}", r.average);
            for d in &r.per_class {
                let _ = write!(s, "  {d:>8.6}");
            }
            let f = fallback.map_or("-".to_string(), |f| f.to_string());
            let _ = writeln!(s, "  {f:>9}");
        };
        for (k, name) in self.model_names.iter().enumerate() {
            let t = self.thresholds.as_ref().map(|t| t[k]);
            line(name, t, &self.per_model[k], None);
        }
        line("mean-ensemble", None, &self.mean_ensemble, None);
        if let Some(g) = &self.gated_ensemble {
            line("gated-ensemble", None, g, Some(g.fallback_pixel_count));
        }
        if let Some(p) = &self.predicted_masks {
            line("predicted-masks", None, p, None);
        }
        let _ = writeln!(s, "images: {}  pixels: {}", self.images, self.pixels);
        s
    }
}
