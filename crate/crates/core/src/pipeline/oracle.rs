use rayon::prelude::*;
use serde::Serialize;

use super::{FitnessTable, PipelineError, PredictionMatrix};

/// Upper bound on grid evaluations.
pub const MAX_GRID_POINTS: u64 = 1_000_000;

/// Uniform grid over `[0, ln M]` per model with spacing close to `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOracleSpec {
    pub delta: f64,
}

impl GridOracleSpec {
    /// Grid values of one axis: `round(ln M / delta) + 1` evenly spaced
    /// points, the last one exactly `ln M`. `delta` must split `ln M` into
    /// a whole number of cells to within 5% of a cell.
    pub fn axis(&self, classes: usize) -> Result<Vec<f64>, PipelineError> {
        let top = (classes as f64).ln();
        let cells_f = top / self.delta;
        let cells = cells_f.round();
        if !(self.delta > 0.0) || cells < 1.0 || (cells_f - cells).abs() > 0.05 {
            return Err(PipelineError::InvalidSpec(format!(
                "delta {} does not divide ln {classes} = {top:.6} into whole cells",
                self.delta
            )));
        }
        let cells = cells as usize;
        let mut axis: Vec<f64> = (0..cells).map(|i| top * i as f64 / cells as f64).collect();
        axis.push(top);
        Ok(axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub thresholds: Vec<f64>,
    pub dice: f64,
    pub evaluations: u64,
}

/// Exhaustive search over the threshold grid. Ties resolve to the
/// lexicographically smallest threshold vector.
pub fn grid_oracle(matrix: &PredictionMatrix, spec: &GridOracleSpec) -> Result<OracleResult, PipelineError> {
    let axis = spec.axis(matrix.classes())?;
    let k = matrix.models();
    let points = axis.len();
    let total = (points as u64)
        .checked_pow(k as u32)
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or(PipelineError::GridTooLarge {
            points_per_dim: points,
            models: k,
            limit: MAX_GRID_POINTS,
        })?;
    let table = FitnessTable::new(matrix);
    let decode = |mut idx: u64| {
        let mut t = vec![0.0; k];
        for slot in t.iter_mut().rev() {
            *slot = axis[(idx % points as u64) as usize];
            idx /= points as u64;
        }
        t
    };
    let (best_idx, dice) = (0..total)
        .into_par_iter()
        .map(|idx| (idx, table.report(&decode(idx)).average))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(OracleResult {
        thresholds: decode(best_idx),
        dice,
        evaluations: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{random_masks, synthesize_matrix, SyntheticPredictorSpec};
    use std::f64::consts::LN_2;

    #[test]
    fn axis_layout() {
        let axis = GridOracleSpec { delta: 0.0693 }.axis(2).unwrap();
        assert_eq!(axis.len(), 11);
        assert_eq!(axis[0], 0.0);
        assert_eq!(axis[10], LN_2);
        assert!(GridOracleSpec { delta: 0.05 }.axis(2).is_err());
        assert!(GridOracleSpec { delta: 0.0 }.axis(2).is_err());
    }

    #[test]
    fn perfect_model_reaches_one() {
        let masks = random_masks(3, 10, 10, 2, 1);
        let pm = synthesize_matrix(&masks, &[SyntheticPredictorSpec::new("p", 1.0, 2.0, 0, 1)], 2, 3).unwrap();
        let r = grid_oracle(&pm, &GridOracleSpec { delta: 0.0693 }).unwrap();
        assert_eq!(r.dice, 1.0);
        assert_eq!(r.thresholds, vec![0.0]);
        assert_eq!(r.evaluations, 11);
    }

    #[test]
    fn too_many_models() {
        let masks = random_masks(1, 2, 2, 2, 1);
        let specs: Vec<_> = (0..10)
            .map(|i| SyntheticPredictorSpec::new(format!("m{i}"), 0.7, 2.0, 0, i))
            .collect();
        let pm = synthesize_matrix(&masks, &specs, 2, 1).unwrap();
        assert!(matches!(
            grid_oracle(&pm, &GridOracleSpec { delta: 0.0693 }),
            Err(PipelineError::GridTooLarge { points_per_dim: 11, models: 10, .. })
        ));
    }
}
