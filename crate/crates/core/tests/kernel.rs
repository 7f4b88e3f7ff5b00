mod common;

use cfa_core::filterbank::{class_stats, design_uootf, FilterKind, TradeoffParams};
use cfa_core::kernelcfa::{
    build_kernel_bank, gram_matrix, kernel_feature, kernel_objective, kernel_system, kuootf_design, KernelSpec,
    NoiseMode,
};
use common::*;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use proptest::prelude::*;

fn kernels() -> [KernelSpec; 3] {
    [
        KernelSpec::Rbf { delta: 2.0 },
        KernelSpec::Linear,
        KernelSpec::Polynomial { degree: 2, offset: 1.0 },
    ]
}

#[test]
fn gram_matrices_are_hermitian_and_rbf_is_psd() {
    let mut r = rng(1);
    let train = random_spectra(&mut r, 6, &[3, 3, 3], 0.5);
    for kernel in kernels() {
        let g = gram_matrix(&kernel, &train);
        assert!((&g - g.adjoint()).norm() <= 1e-12 * g.norm());
    }
    let g = gram_matrix(&KernelSpec::Rbf { delta: 2.0 }, &train);
    for i in 0..train.len() {
        for j in 0..train.len() {
            let want = rbf(&train[i].values, &train[j].values, 2.0);
            assert!((g[(i, j)] - Complex64::from(want)).norm() <= 1e-12);
        }
    }
    let min = SymmetricEigen::new(g).eigenvalues.min();
    assert!(min >= -1e-8, "min eigenvalue {min}");
}

#[test]
fn rbf_weights_maximize_the_kernel_objective() {
    let mut r = rng(2);
    let train = random_spectra(&mut r, 6, &[3, 3, 3], 0.5);
    let kernel = KernelSpec::Rbf { delta: 3.0 };
    let params = TradeoffParams::preset(FilterKind::Uootf);
    let g = gram_matrix(&kernel, &train);
    for class in 0..3 {
        let f = kuootf_design(&train, class, kernel, NoiseMode::default(), params).unwrap();
        let (k, u) = kernel_system(&g, &train, class, &kernel, NoiseMode::default(), params).unwrap();
        let best = kernel_objective(&f.alpha, &k, &u);
        let oracle = dominant_rank_one_direction(&k, &u);
        assert!(cosine(&oracle, &cvec(&f.alpha)) >= 1.0 - 1e-8);
        let an = cvec(&f.alpha).norm();
        for _ in 0..200 {
            let d = cvec(&complex_vec(&mut r, train.len()));
            let a2: Vec<Complex64> = f.alpha.iter().zip(d.iter()).map(|(a, e)| a + e * (1e-3 * an / d.norm())).collect();
            assert!(kernel_objective(&a2, &k, &u) <= best * (1.0 + 1e-12));
        }
    }
}

#[test]
fn linear_kernel_filter_is_a_combination_of_training_spectra() {
    let mut r = rng(3);
    let train = random_spectra(&mut r, 5, &[2, 3], 1.0);
    let bank = build_kernel_bank(train.clone(), KernelSpec::Linear, NoiseMode::default(), TradeoffParams::preset(FilterKind::Uootf)).unwrap();
    let y = complex_vec(&mut r, 5);
    let feat = kernel_feature(&bank, &y).unwrap();
    for (f, val) in bank.filters.iter().zip(&feat) {
        let mut h = CVec::zeros(5);
        for (a, s) in f.alpha.iter().zip(&train) {
            h += cvec(&s.values) * *a;
        }
        let want = cvec(&y).dotc(&h).re;
        assert!((val - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }
}

#[test]
fn linear_ridge_matches_uootf_with_matched_noise() {
    // With a linear kernel and p ≥ N the ridge system is the UOOTF restricted
    // to the span of the training spectra, where ridge λI on the weights is
    // the noise covariance λ(SS⁺)⁻¹. Both sides are compared in an
    // orthonormal basis Q of that span.
    let mut r = rng(4);
    let p = 8;
    let train = random_spectra(&mut r, p, &[2, 2, 2], 1.0);
    let n = train.len();
    let lambda = 0.3;
    let params = TradeoffParams::preset(FilterKind::Uootf);
    let s = CMat::from_fn(p, n, |k, i| train[i].values[k]);
    let q = s.clone().qr().q();
    let sq = q.adjoint() * &s;
    let gram = &sq * sq.adjoint();
    let c = gram.try_inverse().unwrap() * Complex64::from(lambda);
    for class in 0..3 {
        let kf = kuootf_design(&train, class, KernelSpec::Linear, NoiseMode::Ridge { lambda }, params).unwrap();
        let h_kernel = q.adjoint() * (&s * cvec(&kf.alpha));
        let mut st = class_stats(&train, class).unwrap();
        st.mean = (q.adjoint() * cvec(&st.mean)).iter().copied().collect();
        st.extra_corr = q.adjoint() * &st.extra_corr * &q;
        let lin = design_uootf(&st, &c, params).unwrap();
        let cos = cosine(&h_kernel, &cvec(&lin.h));
        assert!(cos >= 1.0 - 1e-10, "class {class}: cosine {cos}");
    }
}

#[test]
fn overflowing_kernel_system_fails_after_escalation() {
    let mut r = rng(7);
    let mut train = random_spectra(&mut r, 4, &[2, 2], 1.0);
    for v in train[3].values.iter_mut() {
        *v *= 1e160;
    }
    let params = TradeoffParams::preset(FilterKind::Uootf);
    let err = build_kernel_bank(train, KernelSpec::Linear, NoiseMode::default(), params).unwrap_err();
    assert!(err.is_numerical(), "{err}");
}

#[test]
fn explicit_noise_is_deterministic() {
    let mut r = rng(5);
    let train = random_spectra(&mut r, 6, &[4, 4], 0.5);
    let mode = NoiseMode::Explicit { seed: 77 };
    let params = TradeoffParams::preset(FilterKind::Uootf);
    let a = build_kernel_bank(train.clone(), KernelSpec::Rbf { delta: 2.0 }, mode, params).unwrap();
    let b = build_kernel_bank(train, KernelSpec::Rbf { delta: 2.0 }, mode, params).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_kernel_parameters_are_rejected() {
    let mut r = rng(6);
    let train = random_spectra(&mut r, 4, &[2, 2], 1.0);
    let params = TradeoffParams::preset(FilterKind::Uootf);
    for kernel in [KernelSpec::Rbf { delta: 0.0 }, KernelSpec::Rbf { delta: f64::NAN }, KernelSpec::Polynomial { degree: 0, offset: 1.0 }] {
        assert!(build_kernel_bank(train.clone(), kernel, NoiseMode::default(), params).is_err(), "{kernel:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_hermitian_for_random_sets(seed in any::<u64>(), n in 2usize..8, p in 1usize..8, delta in 0.5f64..5.0) {
        let mut r = rng(seed);
        let counts = random_counts(&mut r, 2, n.max(2));
        let train = random_spectra(&mut r, p, &counts, 1.0);
        for kernel in [KernelSpec::Rbf { delta }, KernelSpec::Linear, KernelSpec::Polynomial { degree: 3, offset: 0.5 }] {
            let g = gram_matrix(&kernel, &train);
            prop_assert!((&g - g.adjoint()).norm() <= 1e-12 * (1.0 + g.norm()));
        }
    }
}
