//! Dice coefficients over crisp label maps.
//!
//! All images are flattened into one long vector per class before scoring,
//! so a corpus Dice is computed from summed integer counts rather than from
//! an average of per-image scores.

use serde::{Deserialize, Serialize};

use crate::io::LabelMask;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {pred} predicted vs {ground} ground-truth entries")]
    LengthMismatch { pred: usize, ground: usize },
    #[error("image {index}: predicted {pred:?} vs ground truth {ground:?} (height, width)")]
    DimensionMismatch {
        index: usize,
        pred: (usize, usize),
        ground: (usize, usize),
    },
    #[error("label {label} is not below the class count {classes}")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// `2 |a . b| / (|a|^2 + |b|^2)` from integer counts; two empty vectors
/// score 1.
pub fn dice_from_counts(intersection: u64, pred: u64, ground: u64) -> f64 {
    let denom = pred + ground;
    if denom == 0 {
        1.0
    } else {
        (2 * intersection) as f64 / denom as f64
    }
}

/// Dice between two binary indicator vectors.
pub fn dice_per_class(pred: &[bool], ground: &[bool]) -> Result<f64, MetricsError> {
    if pred.len() != ground.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            ground: ground.len(),
        });
    }
    let (mut inter, mut np, mut ng) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.iter().zip(ground) {
        inter += (p && g) as u64;
        np += p as u64;
        ng += g as u64;
    }
    Ok(dice_from_counts(inter, np, ng))
}

/// `M x M` confusion counts, indexed `[pred * M + ground]`.
///
/// Counts are additive: merging the counts of two image sets equals the
/// counts of their concatenation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn add(&mut self, pred: usize, ground: usize) {
        self.counts[pred * self.classes + ground] += 1;
    }

    pub fn get(&self, pred: usize, ground: usize) -> u64 {
        self.counts[pred * self.classes + ground]
    }

    pub fn merge(mut self, other: &ConfusionCounts) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Accumulates one mask pair.
    pub fn add_masks(&mut self, pred: &LabelMask, ground: &LabelMask) -> Result<(), MetricsError> {
        let m = self.classes;
        for (&p, &g) in pred.labels().iter().zip(ground.labels()) {
            let (p, g) = (p as usize, g as usize);
            if p >= m || g >= m {
                return Err(MetricsError::LabelOutOfRange {
                    label: p.max(g),
                    classes: m,
                });
            }
            self.counts[p * m + g] += 1;
        }
        Ok(())
    }

    pub fn report(&self, fallback_pixel_count: u64) -> DiceReport {
        let m = self.classes;
        let mut per_class = Vec::with_capacity(m);
        let mut both_empty_classes = Vec::new();
        for c in 0..m {
            let inter = self.get(c, c);
            let pred: u64 = (0..m).map(|g| self.get(c, g)).sum();
            let ground: u64 = (0..m).map(|p| self.get(p, c)).sum();
            if pred + ground == 0 {
                both_empty_classes.push(c);
            }
            per_class.push(dice_from_counts(inter, pred, ground));
        }
        let average = per_class.iter().sum::<f64>() / m as f64;
        DiceReport {
            per_class,
            average,
            fallback_pixel_count,
            both_empty_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub per_class: Vec<f64>,
    pub average: f64,
    pub fallback_pixel_count: u64,
    /// Classes absent from both prediction and ground truth (scored 1).
    pub both_empty_classes: Vec<usize>,
}

/// Class-averaged Dice over aligned lists of predicted and ground-truth
/// masks.
pub fn dice_average(preds: &[LabelMask], grounds: &[LabelMask], classes: usize) -> Result<DiceReport, MetricsError> {
    Ok(confusion(preds, grounds, classes)?.report(0))
}

pub fn confusion(preds: &[LabelMask], grounds: &[LabelMask], classes: usize) -> Result<ConfusionCounts, MetricsError> {
    if preds.len() != grounds.len() {
        return Err(MetricsError::LengthMismatch {
            pred: preds.len(),
            ground: grounds.len(),
        });
    }
    let mut counts = ConfusionCounts::new(classes);
    for (index, (p, g)) in preds.iter().zip(grounds).enumerate() {
        if (p.height(), p.width()) != (g.height(), g.width()) {
            return Err(MetricsError::DimensionMismatch {
                index,
                pred: (p.height(), p.width()),
                ground: (g.height(), g.width()),
            });
        }
        counts.add_masks(p, g)?;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(h: usize, w: usize, v: &[u8]) -> LabelMask {
        LabelMask::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn per_class_examples() {
        let b = |v: &[u8]| v.iter().map(|&x| x == 1).collect::<Vec<_>>();
        assert_eq!(dice_per_class(&b(&[1, 1, 0, 0]), &b(&[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(dice_per_class(&b(&[1, 0, 1]), &b(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(dice_per_class(&b(&[0, 0]), &b(&[0, 0])).unwrap(), 1.0);
        assert_eq!(dice_per_class(&b(&[0, 0]), &b(&[0, 1])).unwrap(), 0.0);
        assert!(dice_per_class(&b(&[0]), &b(&[0, 1])).is_err());
    }

    #[test]
    fn average_two_by_two() {
        let r = dice_average(&[mask(2, 2, &[0, 0, 1, 1])], &[mask(2, 2, &[0, 1, 1, 1])], 2).unwrap();
        assert_eq!(r.per_class, vec![2.0 / 3.0, 0.8]);
        assert_eq!(r.average, (2.0 / 3.0 + 0.8) / 2.0);
    }

    #[test]
    fn identical_and_complement() {
        let g = mask(2, 3, &[0, 1, 1, 0, 0, 1]);
        assert_eq!(dice_average(&[g.clone()], &[g.clone()], 2).unwrap().average, 1.0);
        let c = mask(2, 3, &[1, 0, 0, 1, 1, 0]);
        assert_eq!(dice_average(&[c], &[g], 2).unwrap().average, 0.0);
    }

    #[test]
    fn absent_class_counts_as_perfect() {
        let g = mask(1, 2, &[0, 1]);
        let r = dice_average(&[g.clone()], &[g], 3).unwrap();
        assert_eq!(r.per_class, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.both_empty_classes, vec![2]);
    }

    #[test]
    fn shape_errors() {
        let a = mask(1, 2, &[0, 1]);
        let b = mask(2, 1, &[0, 1]);
        assert!(matches!(
            dice_average(&[a.clone()], &[b], 2),
            Err(MetricsError::DimensionMismatch { index: 0, .. })
        ));
        assert!(matches!(dice_average(&[a.clone()], &[], 2), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(
            dice_average(&[mask(1, 1, &[2])], &[mask(1, 1, &[0])], 2),
            Err(MetricsError::LabelOutOfRange { label: 2, .. })
        ));
    }

    fn binary_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (1usize..64).prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)))
    }

    proptest! {
        #[test]
        fn dice_is_symmetric_and_bounded((a, b) in binary_pair()) {
            let ab = dice_per_class(&a, &b).unwrap();
            prop_assert_eq!(ab, dice_per_class(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b);
        }

        #[test]
        fn average_is_mean_of_classes(labels in prop::collection::vec((0u8..3, 0u8..3), 1..50)) {
            let (p, g): (Vec<u8>, Vec<u8>) = labels.into_iter().unzip();
            let n = p.len();
            let r = dice_average(&[mask(1, n, &p)], &[mask(1, n, &g)], 3).unwrap();
            let mean = r.per_class.iter().sum::<f64>() / 3.0;
            prop_assert!((r.average - mean).abs() <= 1e-12);
        }
    }
}
