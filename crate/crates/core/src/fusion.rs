//! Entropy gating and combination of per-pixel class distributions.
//!
//! For every pixel each model contributes a distribution over `M` classes.
//! A model is selected for that pixel when the Shannon entropy (nats) of its
//! distribution is strictly below its threshold. Selected distributions are
//! averaged and the pixel takes the class of the largest averaged
//! probability, ties going to the lowest class index. When no model is
//! selected the pixel falls back to the plain mean over all models.

use rayon::prelude::*;

use crate::io::{LabelMask, ProbabilityStack};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("threshold {index} = {value} outside [0, {max}]")]
    ThresholdOutOfRange { index: usize, value: f64, max: f64 },
}

/// Per-model entropy thresholds in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    /// Accepts `values` only if each lies in `[0, ln classes]`.
    pub fn new(values: Vec<f64>, classes: usize) -> Result<Self, FusionError> {
        let max = (classes as f64).ln();
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=max).contains(&value) {
                return Err(FusionError::ThresholdOutOfRange { index, value, max });
            }
        }
        Ok(Self(values))
    }

    pub fn filled(models: usize, value: f64) -> Self {
        Self(vec![value; models])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    // rounding can push a degenerate row a hair below zero
    h.max(0.0)
}

pub fn select(entropies: &[f64], thresholds: &ThresholdVector) -> Result<Vec<bool>, FusionError> {
    check_len(thresholds.len(), entropies.len())?;
    Ok(entropies
        .iter()
        .zip(thresholds.values())
        .map(|(e, t)| e < t)
        .collect())
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_len(expected: usize, found: usize) -> Result<(), FusionError> {
    if expected != found {
        return Err(FusionError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Gated mean of `rows` (`K x M`, row-major) into `out`. Returns the number
/// of selected rows; zero means the all-model fallback was used.
#[inline]
pub(crate) fn combine(
    rows: &[f64],
    entropies: &[f64],
    thresholds: &[f64],
    classes: usize,
    out: &mut [f64],
) -> usize {
    out.fill(0.0);
    let mut selected = 0;
    for (k, row) in rows.chunks_exact(classes).enumerate() {
        if entropies[k] < thresholds[k] {
            selected += 1;
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
    }
    let count = if selected == 0 {
        for row in rows.chunks_exact(classes) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        entropies.len()
    } else {
        selected
    };
    let n = count as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    selected
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedPixel {
    pub combined: Vec<f64>,
    pub label: usize,
    /// Zero signals the all-model fallback.
    pub selected_count: usize,
}

/// Fuses one pixel. `rows` holds `K` distributions of `classes` entries
/// each, concatenated.
pub fn fuse_pixel(rows: &[f64], classes: usize, thresholds: &ThresholdVector) -> Result<FusedPixel, FusionError> {
    if classes == 0 || rows.len() % classes != 0 {
        return Err(FusionError::LengthMismatch {
            expected: thresholds.len() * classes,
            found: rows.len(),
        });
    }
    check_len(thresholds.len(), rows.len() / classes)?;
    let entropies: Vec<f64> = rows.chunks_exact(classes).map(entropy).collect();
    let mut combined = vec![0.0; classes];
    let selected_count = combine(rows, &entropies, thresholds.values(), classes, &mut combined);
    Ok(FusedPixel {
        label: argmax(&combined),
        combined,
        selected_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedStack {
    pub mask: LabelMask,
    /// Combined probabilities, pixel-major: index `pixel * M + m`.
    pub combined: Vec<f64>,
    pub fallback_pixels: usize,
}

/// Applies [`fuse_pixel`] to every pixel. Rows are renormalized to the
/// simplex in 64-bit before entropies are taken.
pub fn fuse_stack(stack: &ProbabilityStack, thresholds: &ThresholdVector) -> Result<FusedStack, FusionError> {
    check_len(stack.models(), thresholds.len())?;
    let (k, m, w) = (stack.models(), stack.classes(), stack.width());
    let mut labels = vec![0u8; stack.pixel_count()];
    let mut combined = vec![0.0; stack.pixel_count() * m];
    let fallback_pixels = labels
        .par_chunks_mut(w)
        .zip(combined.par_chunks_mut(w * m))
        .enumerate()
        .map(|(i, (label_row, combined_row))| {
            let mut rows = vec![0.0; k * m];
            let mut entropies = vec![0.0; k];
            let mut fallback = 0;
            for j in 0..w {
                stack.pixel_rows(i * w + j, &mut rows);
                for (e, row) in entropies.iter_mut().zip(rows.chunks_exact(m)) {
                    *e = entropy(row);
                }
                let out = &mut combined_row[j * m..(j + 1) * m];
                if combine(&rows, &entropies, thresholds.values(), m, out) == 0 {
                    fallback += 1;
                }
                label_row[j] = argmax(out) as u8;
            }
            fallback
        })
        .sum();
    let mask = LabelMask::new(stack.height(), w, labels).expect("dimensions match the stack");
    Ok(FusedStack {
        mask,
        combined,
        fallback_pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn tv(v: &[f64]) -> ThresholdVector {
        ThresholdVector(v.to_vec())
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.9, 0.05, 0.05]) - 0.394).abs() < 5e-4);
        assert!((entropy(&[0.35, 0.35, 0.3]) - 1.096).abs() < 5e-4);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.5, 0.5]) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn select_strict() {
        // hand-evaluated: H(0.9, 0.1) = 0.32508, H(0.6, 0.4) = 0.67301
        let e = [entropy(&[0.9, 0.1]), entropy(&[0.6, 0.4])];
        assert!((e[0] - 0.325083).abs() < 1e-6 && (e[1] - 0.673012).abs() < 1e-6);
        assert_eq!(select(&e, &tv(&[0.5, 0.5])).unwrap(), vec![true, false]);
        assert_eq!(select(&e, &tv(&[0.0, 0.0])).unwrap(), vec![false, false]);
        assert_eq!(select(&e, &tv(&[e[0], e[1]])).unwrap(), vec![false, false]);
        assert!(matches!(
            select(&e, &tv(&[0.5])),
            Err(FusionError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fuse_pixel_examples() {
        let rows = [0.9, 0.1, 0.6, 0.4];
        let p = fuse_pixel(&rows, 2, &tv(&[0.5, 0.5])).unwrap();
        assert_eq!((p.combined.clone(), p.label, p.selected_count), (vec![0.9, 0.1], 0, 1));

        let p = fuse_pixel(&rows, 2, &tv(&[LN_2, LN_2])).unwrap();
        assert!((p.combined[0] - 0.75).abs() < 1e-15 && (p.combined[1] - 0.25).abs() < 1e-15);
        assert_eq!((p.label, p.selected_count), (0, 2));

        let p = fuse_pixel(&rows, 2, &tv(&[0.0, 0.0])).unwrap();
        assert!((p.combined[0] - 0.75).abs() < 1e-15);
        assert_eq!((p.label, p.selected_count), (0, 0));

        let p = fuse_pixel(&[0.5, 0.5], 2, &tv(&[LN_2])).unwrap();
        assert_eq!(p.label, 0);
    }

    #[test]
    fn fuse_pixel_length_errors() {
        assert!(fuse_pixel(&[0.5, 0.5, 1.0], 2, &tv(&[0.1])).is_err());
        assert!(fuse_pixel(&[0.5, 0.5], 2, &tv(&[0.1, 0.1])).is_err());
    }

    #[test]
    fn threshold_vector_bounds() {
        assert!(ThresholdVector::new(vec![0.0, LN_2], 2).is_ok());
        assert!(matches!(
            ThresholdVector::new(vec![0.7], 2),
            Err(FusionError::ThresholdOutOfRange { index: 0, .. })
        ));
        assert!(ThresholdVector::new(vec![-1e-9], 2).is_err());
    }

    #[test]
    fn single_pixel_stack_matches_fuse_pixel() {
        let stack = ProbabilityStack::new(2, 2, 1, 1, vec![0.9, 0.1, 0.6, 0.4]).unwrap();
        let t = tv(&[0.5, 0.5]);
        let fused = fuse_stack(&stack, &t).unwrap();
        let px = fuse_pixel(&[0.9f32 as f64, 0.1f32 as f64, 0.6f32 as f64, 0.4f32 as f64], 2, &t).unwrap();
        assert_eq!(fused.mask.labels(), &[px.label as u8]);
        assert_eq!(fused.fallback_pixels, 0);
    }

    #[test]
    fn single_model_stack_is_its_argmax() {
        // 1 model, 3 classes, 1x3 image; one class plane after another
        let data = vec![0.7, 0.2, 0.1, 0.1, 0.6, 0.3, 0.2, 0.2, 0.6];
        let stack = ProbabilityStack::new(1, 3, 1, 3, data).unwrap();
        let fused = fuse_stack(&stack, &tv(&[3f64.ln()])).unwrap();
        assert_eq!(fused.mask.labels(), &[0, 1, 2]);
    }
}
