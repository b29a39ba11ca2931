use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, FormatError};
use crate::clpso::SwarmConfig;

/// Fitted thresholds plus everything needed to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDocument {
    pub model_names: Vec<String>,
    pub class_count: usize,
    /// Entropy thresholds in nats, one per model, each in `[0, ln M]`.
    pub thresholds: Vec<f64>,
    /// Average Dice reached on the training prediction matrix.
    pub achieved_dice: f64,
    pub fallback_pixels: u64,
    pub evaluations: u64,
    pub seed: u64,
    pub config: SwarmConfig,
}

impl ThresholdDocument {
    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |m: String| Err(FormatError::DocumentInvalid(m));
        if self.thresholds.len() != self.model_names.len() {
            return bad(format!(
                "{} thresholds for {} models",
                self.thresholds.len(),
                self.model_names.len()
            ));
        }
        if self.class_count < 2 {
            return bad(format!("class_count {} < 2", self.class_count));
        }
        let max = (self.class_count as f64).ln();
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=max).contains(*t)) {
            return bad(format!("threshold {t} outside [0, ln {}]", self.class_count));
        }
        if !(0.0..=1.0).contains(&self.achieved_dice) {
            return bad(format!("achieved_dice {} outside [0, 1]", self.achieved_dice));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let doc: ThresholdDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text).map_err(|e| FormatError::in_file(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| io_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> ThresholdDocument {
        ThresholdDocument {
            model_names: vec!["a".into(), "b".into()],
            class_count: 2,
            thresholds: vec![0.001, std::f64::consts::LN_2],
            achieved_dice: 0.9,
            fallback_pixels: 3,
            evaluations: 5010,
            seed: 7,
            config: SwarmConfig::default(),
        }
    }

    #[test]
    fn roundtrip() {
        let d = doc();
        assert_eq!(ThresholdDocument::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn threshold_bounds_enforced() {
        let mut d = doc();
        d.thresholds[1] = 0.7;
        assert!(matches!(d.validate(), Err(FormatError::DocumentInvalid(_))));
        d.thresholds = vec![0.1];
        assert!(d.validate().is_err());
    }
}
