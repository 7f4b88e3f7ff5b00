mod common;

use cfa_core::data::{generate_synthetic, split_labels, SplitSpec, SyntheticSpec};
use cfa_core::features::LabeledSample;
use cfa_core::filterbank::FilterKind;
use cfa_core::pipeline::{
    classify, decode_bundle, encode_bundle, evaluate, load_model, oco_dump, save_model, sweep, train, Bank, Config,
    Metric, SweepParam, FORMAT_VERSION,
};
use cfa_core::Error;
use std::sync::OnceLock;

fn benchmark() -> &'static [LabeledSample] {
    static DATA: OnceLock<Vec<LabeledSample>> = OnceLock::new();
    DATA.get_or_init(|| generate_synthetic(&SyntheticSpec::canonical()).unwrap())
}

fn training_set(seed: u64) -> Vec<LabeledSample> {
    let samples = benchmark();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let split = split_labels(&labels, &SplitSpec::new(3, 1, seed).unwrap(), 0).unwrap();
    split.train.iter().map(|&i| samples[i].clone()).collect()
}

fn config(filter: &str) -> Config {
    Config::with_filter(filter.parse().unwrap())
}

#[test]
fn training_shapes_and_determinism() {
    let train_set = training_set(7);
    assert_eq!(train_set.len(), 60);
    let bundle = train(&train_set, &config("uootf")).unwrap();
    assert_eq!(bundle.pca.p(), 59);
    assert_eq!(bundle.classes(), 20);
    assert_eq!(bundle.gallery.len(), 60);
    assert_eq!(bundle.format_version, FORMAT_VERSION);
    let again = train(&train_set, &config("uootf")).unwrap();
    assert_eq!(encode_bundle(&bundle), encode_bundle(&again));

    let kernel = train(&train_set, &config("kuootf")).unwrap();
    match &kernel.bank {
        Bank::Kernel(k) => assert_eq!(k.train.len(), 60),
        Bank::Linear(_) => panic!("expected a kernel bank"),
    }
}

#[test]
fn training_probes_match_themselves() {
    let train_set = training_set(7);
    for filter in ["uootf", "uotf", "otf", "kuootf"] {
        let bundle = train(&train_set, &config(filter)).unwrap();
        for s in &train_set {
            let c = classify(&bundle, &s.vector).unwrap();
            assert_eq!(c.predicted, s.label, "{filter} {}", s.source_id);
            assert_eq!(c.distances[c.nearest], 0.0, "{filter}");
        }
    }
}

#[test]
fn zero_probe_is_flagged() {
    let bundle = train(&training_set(7), &config("uootf")).unwrap();
    // The PCA mean projects to the origin, so every output is zero.
    let probe = bundle.pca.mean.clone();
    let c = classify(&bundle, &probe).unwrap();
    assert!(c.degenerate);
    assert!(c.predicted < 20);
    let (rows, flagged) = oco_dump(&bundle, &probe).unwrap();
    assert!(flagged);
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.value == 0.0));
}

#[test]
fn wrong_probe_length_is_rejected() {
    let bundle = train(&training_set(7), &config("uootf")).unwrap();
    assert!(matches!(classify(&bundle, &[0.0; 10]), Err(Error::DimensionMismatch { .. })));
    assert!(oco_dump(&bundle, &[0.0; 65]).is_err());
}

#[test]
fn separable_benchmark_is_recognized() {
    let report = evaluate(benchmark(), &SplitSpec::new(3, 4, 42).unwrap(), &config("uootf")).unwrap();
    assert!(report.mean_accuracy >= 0.95, "accuracy {}", report.mean_accuracy);
}

#[test]
fn report_invariants() {
    let spec = SplitSpec::new(3, 3, 5).unwrap();
    let report = evaluate(benchmark(), &spec, &config("otf")).unwrap();
    let n = report.per_rep_accuracy.len() as f64;
    let mean = report.per_rep_accuracy.iter().sum::<f64>() / n;
    assert!((report.mean_accuracy - mean).abs() <= 1e-12);
    for row in &report.confusion {
        assert_eq!(row.iter().sum::<usize>(), 3 * 3);
    }
    let correct: usize = (0..20).map(|i| report.confusion[i][i]).sum();
    assert!((correct as f64 / (3.0 * 60.0) - report.mean_accuracy).abs() <= 1e-12);

    let single = evaluate(benchmark(), &SplitSpec::new(3, 1, 5).unwrap(), &config("otf")).unwrap();
    assert_eq!(single.mean_accuracy, single.per_rep_accuracy[0]);
    assert_eq!(single.std_accuracy, 0.0);
}

#[test]
fn repetitions_follow_the_seeded_split() {
    // Recompute every repetition by hand. The split depends only on the
    // split seed, so the same splits serve every filter kind.
    let spec = SplitSpec::new(3, 2, 11).unwrap();
    let samples = benchmark();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    for filter in ["uootf", "uotf"] {
        let report = evaluate(samples, &spec, &config(filter)).unwrap();
        for rep in 0..2 {
            let split = split_labels(&labels, &spec, rep).unwrap();
            let train_set: Vec<LabeledSample> = split.train.iter().map(|&i| samples[i].clone()).collect();
            let bundle = train(&train_set, &config(filter)).unwrap();
            let correct = split
                .test
                .iter()
                .filter(|&&i| classify(&bundle, &samples[i].vector).unwrap().predicted == labels[i])
                .count();
            assert_eq!(report.per_rep_accuracy[rep], correct as f64 / split.test.len() as f64, "{filter} rep {rep}");
        }
    }
}

#[test]
fn sweeps_cover_their_grids() {
    let spec = SplitSpec::new(3, 2, 42).unwrap();
    let base = config("uootf");
    let single = sweep(benchmark(), &spec, &base, SweepParam::OmegaS, &[0.4]).unwrap();
    let mut at = base.clone();
    at.omega_s = Some(0.4);
    let plain = evaluate(benchmark(), &spec, &at).unwrap();
    assert_eq!(single.per_rep_accuracy, plain.per_rep_accuracy);
    assert_eq!(single.confusion, plain.confusion);
    assert_eq!(single.mean_accuracy, plain.mean_accuracy);
    assert_eq!(single.best.unwrap().mean_accuracy, plain.mean_accuracy);

    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let report = sweep(benchmark(), &spec, &base, SweepParam::OmegaS, &grid).unwrap();
    let csv = report.sweep_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    let best = report.best.unwrap();
    assert!(report.sweep_grid.unwrap().iter().all(|p| p.mean_accuracy <= best.mean_accuracy));

    let deltas: Vec<f64> = (1..=10).map(f64::from).collect();
    let report = sweep(benchmark(), &spec, &config("kuootf"), SweepParam::RbfDelta, &deltas).unwrap();
    assert_eq!(report.sweep_csv().unwrap().lines().count(), 1 + 10);
    assert!(sweep(benchmark(), &spec, &base, SweepParam::RbfDelta, &deltas).is_err());
    assert!(sweep(benchmark(), &spec, &base, SweepParam::OmegaS, &[]).is_err());
}

#[test]
fn origin_outputs_peak_once_for_uootf() {
    let train_set = training_set(42);
    let uootf = train(&train_set, &config("uootf")).unwrap();
    let uotf = train(&train_set, &config("uotf")).unwrap();
    let peaks = |rows: &[cfa_core::pipeline::OcoRow]| rows.iter().filter(|r| r.value >= 0.9).count();
    let mut multi = (0, 0);
    for s in &train_set {
        let (a, _) = oco_dump(&uootf, &s.vector).unwrap();
        let (b, _) = oco_dump(&uotf, &s.vector).unwrap();
        assert_eq!(a[s.label].value, 1.0, "{}", s.source_id);
        multi.0 += (peaks(&a) >= 2) as usize;
        multi.1 += (peaks(&b) >= 2) as usize;
    }
    assert!(multi.1 > multi.0, "multi-peak probes: UOOTF {} vs UOTF {}", multi.0, multi.1);
}

#[test]
fn bundle_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    for filter in ["uootf", "kuootf"] {
        let bundle = train(&training_set(3), &config(filter)).unwrap();
        let path = dir.path().join(format!("{filter}.model"));
        save_model(&bundle, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, bundle);
        assert_eq!(encode_bundle(&loaded), std::fs::read(&path).unwrap());
    }

    let bytes = encode_bundle(&train(&training_set(3), &config("uootf")).unwrap());
    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 1;
    assert!(matches!(decode_bundle(&flipped), Err(Error::Format(_))));
    assert!(decode_bundle(&bytes[..bytes.len() / 2]).is_err());
    assert!(decode_bundle(&bytes[..10]).is_err());
    let mut version = bytes.clone();
    version[8] = version[8].wrapping_add(1);
    assert!(decode_bundle(&version).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_bundle(&magic).is_err());
}

#[test]
fn prediction_ignores_probe_scale_and_metric_choice_is_honoured() {
    let train_set = training_set(9);
    let bundle = train(&train_set, &config("uootf")).unwrap();
    let mut cosine_cfg = config("uootf");
    cosine_cfg.metric = Metric::Cosine;
    let cosine = train(&train_set, &cosine_cfg).unwrap();
    let samples = benchmark();
    for s in samples.iter().step_by(7) {
        // Scale about the PCA mean so the projected spectrum scales exactly.
        let scaled: Vec<f64> = s.vector.iter().zip(&bundle.pca.mean).map(|(v, m)| m + 2.5 * (v - m)).collect();
        let a = classify(&bundle, &s.vector).unwrap();
        let b = classify(&bundle, &scaled).unwrap();
        assert_eq!(a.nearest, b.nearest);
        let c = classify(&cosine, &s.vector).unwrap();
        assert!(c.distances.iter().all(|d| (-1e-12..=2.0 + 1e-12).contains(d)));
    }
}

#[test]
fn evaluation_is_deterministic() {
    let spec = SplitSpec::new(3, 3, 1).unwrap();
    for filter in ["uootf", "kuootf"] {
        let a = evaluate(benchmark(), &spec, &config(filter)).unwrap();
        let b = evaluate(benchmark(), &spec, &config(filter)).unwrap();
        assert!(a.same_results(&b));
        assert_eq!(a.to_csv().lines().next(), Some("rep,accuracy"));
    }
}

#[test]
fn explicit_noise_and_fixed_pca_dimension() {
    let train_set = training_set(2);
    let mut cfg = config("uotf");
    cfg.set("noise", "explicit").unwrap();
    cfg.set("pca-dim", "30").unwrap();
    let bundle = train(&train_set, &cfg).unwrap();
    assert_eq!(bundle.pca.p(), 30);
    assert!(matches!(bundle.bank, Bank::Linear(ref b) if b.kind == FilterKind::Uotf));
    assert_eq!(train(&train_set, &cfg).unwrap(), bundle);
}
