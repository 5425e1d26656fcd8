use proptest::prelude::*;

use qipf_core::hermite::{hermite, hermite_normalized};
use qipf_core::network::{ensemble_scores, mc_dropout_scores, population_std};
use qipf_core::{
    calibrate_energies, corrupt, decompose, make_blobs, roc_auc, train, CorruptionKind,
    CorruptionSpec, KernelField, QipfScorer, RowMatrix, Split, TrainConfig,
};

fn field_strategy() -> impl Strategy<Value = (usize, Vec<f64>, f64)> {
    (1usize..4).prop_flat_map(|d| {
        (
            Just(d),
            proptest::collection::vec(-2.0f64..2.0, d * 3..d * 25),
            0.2f64..1.5,
        )
    })
}

fn build(d: usize, flat: &[f64], sigma: f64) -> KernelField {
    let n = flat.len() / d;
    KernelField::new(RowMatrix::from_flat(flat[..n * d].to_vec(), d).unwrap(), sigma).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn calibration_minimum_is_zero((d, flat, sigma) in field_strategy(), m in 1usize..6) {
        let field = build(d, &flat, sigma);
        let e = calibrate_energies(&field, field.points(), m).unwrap();
        let spec = decompose(field.points(), &field, &e).unwrap();
        prop_assert_eq!(spec.base_qipf.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        for p in 0..m {
            prop_assert_eq!(spec.mode(p).into_iter().fold(f64::INFINITY, f64::min), 0.0);
        }
    }

    #[test]
    fn first_mode_is_the_base_field(
        (d, flat, sigma) in field_strategy(),
        q in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let field = build(d, &flat, sigma);
        let e = calibrate_energies(&field, field.points(), 3).unwrap();
        let spec = decompose(&RowMatrix::from_flat(q[..d].to_vec(), d).unwrap(), &field, &e).unwrap();
        prop_assert!((spec.base_qipf[0] - spec.mode(0)[0]).abs() <= 1e-9 * spec.base_qipf[0].abs().max(1.0));
    }

    #[test]
    fn score_is_the_mode_mean(
        (d, flat, sigma) in field_strategy(),
        q in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let field = build(d, &flat, sigma);
        let scorer = QipfScorer::fit(field.points().clone(), sigma, &[1, 2, 3, 4]).unwrap();
        let spec = scorer.decompose(&RowMatrix::from_flat(q[..d].to_vec(), d).unwrap()).unwrap();
        let row = spec.modes.row(0);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        prop_assert_eq!(spec.score[0], mean);
    }

    #[test]
    fn hermite_normalization_is_a_constant_factor(p in 0usize..9, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let (hx, hy) = (hermite(p, x), hermite(p, y));
        prop_assume!(hx.abs() > 1e-6 && hy.abs() > 1e-6);
        let (rx, ry) = (hermite_normalized(p, x) / hx, hermite_normalized(p, y) / hy);
        prop_assert!((rx - ry).abs() <= 1e-12 * rx.abs());
    }

    #[test]
    fn reversing_scores_complements_auc(
        scores in proptest::collection::vec(-5.0f64..5.0, 4..60),
        seed in any::<u64>(),
    ) {
        let errors: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1 || i == 0).collect();
        prop_assume!(errors.iter().any(|e| !e));
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc_auc(&scores, &errors).unwrap();
        let b = roc_auc(&negated, &errors).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn population_std_is_shift_invariant(
        values in proptest::collection::vec(-1.0f64..1.0, 2..30),
        shift in -10.0f64..10.0,
    ) {
        let moved: Vec<f64> = values.iter().map(|v| v + shift).collect();
        prop_assert!((population_std(&values) - population_std(&moved)).abs() < 1e-12);
    }

    #[test]
    fn severity_zero_is_identity(
        flat in proptest::collection::vec(-3.0f64..3.0, 2..40),
        kind in proptest::sample::select(CorruptionKind::ALL.to_vec()),
    ) {
        let n = flat.len() / 2;
        let x = RowMatrix::from_flat(flat[..2 * n].to_vec(), 2).unwrap();
        let out = corrupt(&x, CorruptionSpec::new(kind, 0).unwrap()).unwrap();
        prop_assert_eq!(out, x);
    }
}

#[test]
fn trained_pipeline_scores_are_finite_and_baselines_degenerate_cleanly() {
    let data = make_blobs(200, 2, 0.3, 11).unwrap().with_test_split(0.5, 11).unwrap();
    let config = TrainConfig {
        epochs: 40,
        seed: 11,
        ..TrainConfig::default()
    };
    let model = train(&data, &config).unwrap();
    let (train_x, train_y) = data.part(Split::Train);
    let preds = model.predict_raw(&train_x, &train_y).unwrap();
    let sigma = qipf_core::silverman(preds.logits()).unwrap();
    let scorer = QipfScorer::fit(preds.logits().clone(), sigma, &[1, 2, 3, 4]).unwrap();

    let (test_x, _) = data.part(Split::Test);
    let shifted = corrupt(&test_x, CorruptionSpec::new(CorruptionKind::Rotation, 5).unwrap()).unwrap();
    let logits = model.logits(&shifted).unwrap();
    let scores = scorer.scores(&logits).unwrap();
    assert_eq!(scores.len(), test_x.rows());
    assert!(scores.iter().all(|s| s.is_finite()));

    assert!(mc_dropout_scores(&model, &shifted, 0.0, 10, 3).unwrap().iter().all(|s| *s == 0.0));
    let clones = vec![model.clone(), model.clone()];
    assert!(ensemble_scores(&clones, &shifted).unwrap().iter().all(|s| *s == 0.0));
}
