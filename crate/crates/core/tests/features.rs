mod common;

use cfa_core::features::{gabor_feature, intensity_feature, GaborSpec};
use common::*;
use proptest::prelude::*;

fn dc_removed(seed: u64, side: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let img = gauss_vec(&mut r, side * side, 1.0);
    let mean = img.iter().sum::<f64>() / img.len() as f64;
    img.iter().map(|v| v - mean).collect()
}

#[test]
fn gabor_ignores_global_sign() {
    let spec = GaborSpec::default();
    let img = dc_removed(1, 16);
    let neg: Vec<f64> = img.iter().map(|v| -v).collect();
    let a = gabor_feature(&img, &spec).unwrap();
    let b = gabor_feature(&neg, &spec).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn gabor_is_positively_homogeneous() {
    let spec = GaborSpec::default();
    let img = dc_removed(2, 16);
    let a = gabor_feature(&img, &spec).unwrap();
    for c in [0.0, 0.5, 3.0] {
        let scaled: Vec<f64> = img.iter().map(|v| c * v).collect();
        let b = gabor_feature(&scaled, &spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((c * x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn zero_image_gives_zero_features() {
    let zeros = vec![0.0; 64 * 64];
    assert!(gabor_feature(&zeros, &GaborSpec::default()).unwrap().iter().all(|&v| v == 0.0));
    assert_eq!(intensity_feature(&zeros).unwrap(), zeros);
    assert_eq!(intensity_feature(&vec![0.5; 64]).unwrap().len(), 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_length_formula(scales in 1usize..3, orientations in 1usize..4, downsample in 1usize..5, blocks in 1usize..5) {
        let side = downsample * blocks;
        let spec = GaborSpec { scales, orientations, downsample, ..GaborSpec::default() };
        let img = vec![0.25; side * side];
        let f = gabor_feature(&img, &spec).unwrap();
        prop_assert_eq!(f.len(), scales * orientations * blocks * blocks);
        prop_assert_eq!(spec.output_len(side), f.len());
    }
}
