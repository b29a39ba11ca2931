use ensel::fusion::{entropy, fuse_pixel, fuse_stack, select, ThresholdVector};
use ensel::ProbabilityStack;
use proptest::prelude::*;

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_map(|mut v| {
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

fn pixel() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..6, 2usize..6).prop_flat_map(|(k, m)| (Just(m), prop::collection::vec(simplex(m), k)))
}

proptest! {
    #[test]
    fn entropy_is_bounded((m, rows) in pixel()) {
        for r in &rows {
            let h = entropy(r);
            prop_assert!(h >= 0.0 && h <= (m as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn mixing_with_uniform_raises_entropy(p in simplex(4), t in 0.0f64..1.0) {
        let u = 0.25;
        let q: Vec<f64> = p.iter().map(|x| (1.0 - t) * x + t * u).collect();
        prop_assert!(entropy(&q) >= entropy(&p) - 1e-12);
    }

    #[test]
    fn combined_row_is_a_distribution((m, rows) in pixel(), t in 0.0f64..1.0) {
        let k = rows.len();
        let th = ThresholdVector::new(vec![t * (m as f64).ln(); k], m).unwrap();
        let f = fuse_pixel(&rows.concat(), m, &th).unwrap();
        prop_assert!((f.combined.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(f.label < m);
        prop_assert!(f.combined[f.label] >= f.combined.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn selection_grows_with_thresholds((m, rows) in pixel(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let top = (m as f64).ln();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ent: Vec<f64> = rows.iter().map(|r| entropy(r)).collect();
        let k = rows.len();
        let s_lo = select(&ent, &ThresholdVector::new(vec![lo * top; k], m).unwrap()).unwrap();
        let s_hi = select(&ent, &ThresholdVector::new(vec![hi * top; k], m).unwrap()).unwrap();
        prop_assert!(s_lo.iter().zip(&s_hi).all(|(l, h)| !l || *h));
    }

    #[test]
    fn identical_models_agree_with_a_single_one(row in simplex(3), copies in 1usize..6, t in 0.0f64..1.0) {
        let th = t * 3f64.ln();
        let one = fuse_pixel(&row, 3, &ThresholdVector::new(vec![th], 3).unwrap()).unwrap();
        let many = fuse_pixel(&row.repeat(copies), 3, &ThresholdVector::new(vec![th; copies], 3).unwrap()).unwrap();
        prop_assert_eq!(one.label, many.label);
        for (a, b) in one.combined.iter().zip(&many.combined) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn stack_fusion_matches_pixel_fusion() {
    // K=2, M=2, 1x3: confident, uncertain and mixed pixels
    let data = vec![
        0.95, 0.5, 0.2, //
        0.05, 0.5, 0.8, //
        0.6, 0.1, 0.5, //
        0.4, 0.9, 0.5,
    ];
    let stack = ProbabilityStack::new(2, 2, 1, 3, data).unwrap();
    let th = ThresholdVector::new(vec![0.3, 0.5], 2).unwrap();
    let fused = fuse_stack(&stack, &th).unwrap();
    let mut rows = vec![0.0; 4];
    let mut fallback = 0;
    for p in 0..3 {
        stack.pixel_rows(p, &mut rows);
        let f = fuse_pixel(&rows, 2, &th).unwrap();
        assert_eq!(fused.mask.labels()[p], f.label as u8);
        assert_eq!(&fused.combined[p * 2..p * 2 + 2], &f.combined[..]);
        fallback += (f.selected_count == 0) as usize;
    }
    assert_eq!(fused.fallback_pixels, fallback);
    assert_eq!(fused.mask.labels(), &[0, 1, 1]);
}
