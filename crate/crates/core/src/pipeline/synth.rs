//! Synthetic segmentation models.
//!
//! A synthetic predictor corrupts the ground truth pixel by pixel:
//!
//! 1. `bias` dilates (positive) or erodes (negative) every non-background
//!    region by that many pixels, Chebyshev distance.
//! 2. With probability `base_accuracy` the (shifted) true class becomes the
//!    emitted argmax, otherwise a uniformly chosen wrong class does.
//! 3. The argmax class receives mass `1/M + (1 - 1/M) (1 - u^s)` with
//!    `u ~ U[0, 1)`; the rest is spread evenly over the other classes. `s`
//!    is `sharpness` for correct pixels and `sharpness / 2` for wrong ones,
//!    so mistakes are on average less confident.
//!
//! Randomness is a ChaCha8 stream keyed by the predictor seed; the stream
//! id is `(fold << 32) | image_index`, where training images use their fold
//! and test images use `fold = folds` (the model trained on all folds).
//! Two predictors with equal seeds and parameters emit identical planes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MatrixImage, PipelineError, PredictionMatrix};
use crate::io::{
    write_mask, write_stack, DatasetManifest, FormatError, LabelMask, PredictionRef, ProbabilityStack, TestEntry,
    TrainEntry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPredictorSpec {
    pub name: String,
    /// Probability that a pixel's emitted argmax is its (shifted) true class.
    pub base_accuracy: f64,
    /// Concentration of the emitted distribution; larger is more confident.
    pub sharpness: f64,
    /// Boundary shift in pixels: positive dilates, negative erodes.
    #[serde(default)]
    pub bias: i32,
    pub seed: u64,
}

impl SyntheticPredictorSpec {
    pub fn new(name: impl Into<String>, base_accuracy: f64, sharpness: f64, bias: i32, seed: u64) -> Self {
        Self {
            name: name.into(),
            base_accuracy,
            sharpness,
            bias,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.base_accuracy > 0.0 && self.base_accuracy <= 1.0) {
            return Err(PipelineError::InvalidSpec(format!(
                "{}: base_accuracy {} outside (0, 1]",
                self.name, self.base_accuracy
            )));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(PipelineError::InvalidSpec(format!(
                "{}: sharpness must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Dilates (`bias > 0`) or erodes (`bias < 0`) all non-zero labels.
///
/// Dilation gives a background pixel the largest label within the window;
/// erosion clears a labelled pixel whose window touches background.
pub fn shift_mask(mask: &LabelMask, bias: i32) -> LabelMask {
    if bias == 0 {
        return mask.clone();
    }
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    let r = bias.unsigned_abs() as i64;
    let mut out = mask.clone();
    for i in 0..h {
        for j in 0..w {
            let here = mask.get(i as usize, j as usize);
            let window = (i - r).max(0)..=(i + r).min(h - 1);
            let cols = (j - r).max(0)..=(j + r).min(w - 1);
            let mut labels = window.flat_map(|a| cols.clone().map(move |b| (a, b)));
            let new = if bias > 0 {
                if here == 0 {
                    labels.map(|(a, b)| mask.get(a as usize, b as usize)).max().unwrap_or(0)
                } else {
                    here
                }
            } else if here != 0 && labels.any(|(a, b)| mask.get(a as usize, b as usize) == 0) {
                0
            } else {
                here
            };
            out.labels_mut()[(i * w + j) as usize] = new;
        }
    }
    out
}

fn stream_id(fold: usize, image_index: usize) -> u64 {
    ((fold as u64) << 32) | image_index as u64
}

/// Class planes (`M x H x W`) emitted by one synthetic model for `mask`.
fn emit_planes(mask: &LabelMask, spec: &SyntheticPredictorSpec, classes: usize, stream: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let target = shift_mask(mask, spec.bias);
    let n = target.labels().len();
    let m = classes as f64;
    let mut planes = vec![0f32; classes * n];
    for (p, &truth) in target.labels().iter().enumerate() {
        let truth = (truth as usize).min(classes - 1);
        let correct = rng.gen::<f64>() < spec.base_accuracy;
        let class = if correct {
            truth
        } else {
            let c = rng.gen_range(0..classes - 1);
            if c >= truth {
                c + 1
            } else {
                c
            }
        };
        let s = if correct { spec.sharpness } else { spec.sharpness / 2.0 };
        let peak = 1.0 / m + (1.0 - 1.0 / m) * (1.0 - rng.gen::<f64>().powf(s));
        let rest = ((1.0 - peak) / (m - 1.0)) as f32;
        for c in 0..classes {
            planes[c * n + p] = if c == class { peak as f32 } else { rest };
        }
    }
    planes
}

/// Stack of all `specs` for one image.
pub fn emit_stack(
    mask: &LabelMask,
    specs: &[SyntheticPredictorSpec],
    classes: usize,
    stream: u64,
) -> Result<ProbabilityStack, PipelineError> {
    let mut data = Vec::with_capacity(specs.len() * classes * mask.labels().len());
    for spec in specs {
        spec.validate()?;
        data.extend(emit_planes(mask, spec, classes, stream));
    }
    let stack = ProbabilityStack::new(specs.len(), classes, mask.height(), mask.width(), data)?;
    Ok(stack.with_model_names(specs.iter().map(|s| s.name.clone()).collect())?)
}

/// Random ground truths: background with one or two filled ellipses per
/// foreground class, later classes painted over earlier ones.
pub fn random_masks(count: usize, height: usize, width: usize, classes: usize, seed: u64) -> Vec<LabelMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut mask = LabelMask::filled(height, width, 0);
            for class in 1..classes {
                for _ in 0..rng.gen_range(1..=2) {
                    let ci = rng.gen::<f64>() * height as f64;
                    let cj = rng.gen::<f64>() * width as f64;
                    let ri = (height as f64 / 8.0).max(1.0) + rng.gen::<f64>() * height as f64 / 4.0;
                    let rj = (width as f64 / 8.0).max(1.0) + rng.gen::<f64>() * width as f64 / 4.0;
                    for i in 0..height {
                        for j in 0..width {
                            let di = (i as f64 + 0.5 - ci) / ri;
                            let dj = (j as f64 + 0.5 - cj) / rj;
                            if di * di + dj * dj <= 1.0 {
                                mask.labels_mut()[i * width + j] = class as u8;
                            }
                        }
                    }
                }
            }
            mask
        })
        .collect()
}

fn image_ids(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|n| format!("{prefix}{n:04}")).collect()
}

/// Round-robin fold of each position in `ids` after sorting by id.
fn folds_for(ids: &[String], folds: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut out = vec![0; ids.len()];
    for (slot, idx) in order.into_iter().enumerate() {
        out[idx] = slot % folds;
    }
    out
}

/// In-memory out-of-fold matrix for `masks` (ids `img0000`, ...).
pub fn synthesize_matrix(
    masks: &[LabelMask],
    specs: &[SyntheticPredictorSpec],
    classes: usize,
    folds: usize,
) -> Result<PredictionMatrix, PipelineError> {
    check_inputs(specs, classes, folds)?;
    let ids = image_ids("img", masks.len());
    let fold_of = folds_for(&ids, folds);
    let images = masks
        .iter()
        .enumerate()
        .map(|(n, mask)| {
            Ok(MatrixImage {
                id: ids[n].clone(),
                fold: Some(fold_of[n]),
                stack: emit_stack(mask, specs, classes, stream_id(fold_of[n], n))?,
                mask: mask.clone(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    PredictionMatrix::new(specs.iter().map(|s| s.name.clone()).collect(), classes, images)
}

fn check_inputs(specs: &[SyntheticPredictorSpec], classes: usize, folds: usize) -> Result<(), PipelineError> {
    if specs.is_empty() {
        return Err(PipelineError::InvalidSpec("no predictor specs".into()));
    }
    if !(2..=256).contains(&classes) {
        return Err(PipelineError::InvalidSpec(format!("class count {classes} outside 2..=256")));
    }
    if folds == 0 {
        return Err(PipelineError::InvalidSpec("folds must be at least 1".into()));
    }
    specs.iter().try_for_each(SyntheticPredictorSpec::validate)
}

/// Writes a complete synthetic dataset under `out_dir` and returns its
/// manifest (also saved as `out_dir/manifest.json`).
///
/// Layout: `masks/` training ground truth, `oof/` out-of-fold stacks,
/// `test/` test stacks and ground truth.
pub fn synthesize_predictions(
    train_masks: &[LabelMask],
    test_masks: &[LabelMask],
    specs: &[SyntheticPredictorSpec],
    classes: usize,
    folds: usize,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, PipelineError> {
    check_inputs(specs, classes, folds)?;
    let out = out_dir.as_ref();
    for sub in ["masks", "oof", "test"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|source| FormatError::Io { path: dir, source })?;
    }
    let mut manifest = DatasetManifest::new(specs.iter().map(|s| s.name.clone()).collect(), classes, folds);
    manifest.set_base_dir(out);

    let ids = image_ids("img", train_masks.len());
    let fold_of = folds_for(&ids, folds);
    for (n, mask) in train_masks.iter().enumerate() {
        let id = &ids[n];
        let stack = emit_stack(mask, specs, classes, stream_id(fold_of[n], n))?;
        let mask_rel = format!("masks/{id}.pgm");
        let stack_rel = format!("oof/{id}.pten");
        write_mask(mask, out.join(&mask_rel))?;
        write_stack(&stack, out.join(&stack_rel))?;
        manifest.entries.push(TrainEntry {
            id: id.clone(),
            fold: Some(fold_of[n]),
            mask: mask_rel.into(),
            predictions: vec![PredictionRef {
                path: stack_rel.into(),
                model: None,
                held_out_fold: fold_of[n],
            }],
        });
    }
    for (n, (mask, id)) in test_masks.iter().zip(image_ids("tst", test_masks.len())).enumerate() {
        let stack = emit_stack(mask, specs, classes, stream_id(folds, n))?;
        let mask_rel = format!("test/{id}.pgm");
        let stack_rel = format!("test/{id}.pten");
        write_mask(mask, out.join(&mask_rel))?;
        write_stack(&stack, out.join(&stack_rel))?;
        manifest.test.push(TestEntry {
            id,
            stack: stack_rel.into(),
            mask: Some(mask_rel.into()),
        });
    }
    manifest.save(out.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::argmax;
    use crate::metrics::dice_average;

    fn argmax_mask(stack: &ProbabilityStack, k: usize) -> LabelMask {
        let mut rows = vec![0.0; stack.models() * stack.classes()];
        let m = stack.classes();
        let labels = (0..stack.pixel_count())
            .map(|p| {
                stack.pixel_rows(p, &mut rows);
                argmax(&rows[k * m..(k + 1) * m]) as u8
            })
            .collect();
        LabelMask::new(stack.height(), stack.width(), labels).unwrap()
    }

    #[test]
    fn shift_dilates_and_erodes() {
        let mut m = LabelMask::filled(5, 5, 0);
        m.labels_mut()[12] = 1;
        let d = shift_mask(&m, 1);
        assert_eq!(d.labels().iter().filter(|&&l| l == 1).count(), 9);
        assert_eq!(shift_mask(&d, -1), m);
        assert_eq!(shift_mask(&m, -1), LabelMask::filled(5, 5, 0));
    }

    #[test]
    fn perfect_sharp_predictor_reproduces_truth() {
        let masks = random_masks(3, 16, 16, 3, 4);
        let spec = SyntheticPredictorSpec::new("p", 1.0, 50.0, 0, 8);
        for (n, mask) in masks.iter().enumerate() {
            let s = emit_stack(mask, &[spec.clone()], 3, n as u64).unwrap();
            assert_eq!(&argmax_mask(&s, 0), mask);
        }
    }

    #[test]
    fn identical_specs_emit_identical_planes() {
        let mask = &random_masks(1, 8, 8, 2, 1)[0];
        let a = SyntheticPredictorSpec::new("a", 0.7, 2.0, 0, 42);
        let b = SyntheticPredictorSpec { name: "b".into(), ..a.clone() };
        let s = emit_stack(mask, &[a, b], 2, 5).unwrap();
        assert_eq!(s.model(0).data(), s.model(1).data());
    }

    #[test]
    fn chance_accuracy_matches_bernoulli_simulation() {
        // independent oracle: flip each label with probability 1/2 and score
        let masks = random_masks(10, 32, 32, 2, 77);
        let spec = SyntheticPredictorSpec::new("coin", 0.5, 2.0, 0, 3);
        let pm = synthesize_matrix(&masks, &[spec], 2, 5).unwrap();
        let preds: Vec<LabelMask> = pm.images().iter().map(|i| argmax_mask(&i.stack, 0)).collect();
        let measured = dice_average(&preds, &pm.ground_truth(), 2).unwrap().average;

        let mut rng = ChaCha8Rng::seed_from_u64(999);
        let reps = 20;
        let mut expected = 0.0;
        for _ in 0..reps {
            let sim: Vec<LabelMask> = masks
                .iter()
                .map(|m| {
                    let labels = m.labels().iter().map(|&l| if rng.gen::<bool>() { l } else { 1 - l }).collect();
                    LabelMask::new(m.height(), m.width(), labels).unwrap()
                })
                .collect();
            expected += dice_average(&sim, &masks, 2).unwrap().average / reps as f64;
        }
        assert!((measured - expected).abs() <= 0.05, "measured {measured}, simulated {expected}");
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticPredictorSpec::new("x", 0.0, 1.0, 0, 0).validate().is_err());
        assert!(SyntheticPredictorSpec::new("x", 1.2, 1.0, 0, 0).validate().is_err());
        assert!(SyntheticPredictorSpec::new("x", 0.5, 0.0, 0, 0).validate().is_err());
    }

    #[test]
    fn dataset_on_disk_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let train = random_masks(10, 8, 8, 2, 1);
        let test = random_masks(2, 8, 8, 2, 2);
        let specs = [
            SyntheticPredictorSpec::new("a", 0.9, 3.0, 0, 1),
            SyntheticPredictorSpec::new("b", 0.6, 3.0, 0, 2),
        ];
        synthesize_predictions(&train, &test, &specs, 2, 5, dir.path()).unwrap();
        let m = DatasetManifest::load(dir.path().join("manifest.json")).unwrap();
        let pm = crate::pipeline::build_prediction_matrix(&m).unwrap();
        assert_eq!(pm, synthesize_matrix(&train, &specs, 2, 5).unwrap());
        assert_eq!(crate::pipeline::test_matrix(&m).unwrap().images().len(), 2);
    }
}
