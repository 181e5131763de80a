use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::normalize::{zscore_apply, zscore_fit};
use crate::series::{TimeSeries, Timestamp};
use crate::synth::{inject_level_shift, inject_spikes, sinusoid_panel, SynthConfig};

use super::*;

fn constant_series(n: usize, m: usize, value: f64) -> TimeSeries {
    let stamps = (0..n as i64).map(|i| Timestamp::from_millis(i * 1000)).collect();
    let channels = (0..m).map(|j| format!("c{j}")).collect();
    TimeSeries::new(stamps, channels, Array2::from_elem((n, m), value)).unwrap()
}

fn small_sinusoid(rows: usize, seed: u64) -> TimeSeries {
    let cfg = SynthConfig {
        rows,
        channels: 3,
        period: 64,
        noise_std: 0.02,
        seed,
        ..SynthConfig::default()
    };
    let raw = sinusoid_panel(&cfg);
    let stats = zscore_fit(&raw).unwrap();
    zscore_apply(&raw, &stats).unwrap()
}

fn gaussian_scores(n: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mean + z
        })
        .collect()
}

#[test]
fn pca_reconstructs_constant_series_exactly() {
    let train = constant_series(64, 2, 5.0);
    let mut spec = DetectorSpec::new(DetectorKind::PcaReconstructor);
    spec.hp.latent = 1;
    let fitted = fit(&spec, &train).unwrap();
    let scored = score(&fitted, &train).unwrap();
    assert!(scored.scores.iter().all(|&s| s == 0.0), "{scored:?}");
    assert_eq!(fitted.train_error_stats.mean, 0.0);
}

#[test]
fn fixed_seed_fits_are_bitwise_identical() {
    let train = small_sinusoid(256, 3);
    for kind in DetectorKind::ALL {
        let mut spec = DetectorSpec::new(kind).with_seed(42);
        spec.hp.season_period = 64;
        spec.hp.max_epochs = 60;
        let a = fit(&spec, &train).unwrap();
        let b = fit(&spec, &train).unwrap();
        assert_eq!(a, b, "fit of {} is not reproducible", kind.slug());
    }
}

// Closed-form optimal linear reconstruction of the same windows (via SVD of
// the centered window matrix) that the trained model must approach.
fn optimal_linear_mae(series: &TimeSeries, window: usize, rank: usize) -> f64 {
    let windows = super::window::sliding_windows(series, window).unwrap();
    let n = windows.nrows();
    let d = windows.ncols();
    let m = series.width();
    let mean = windows.sum_axis(ndarray::Axis(0)) / n as f64;
    let centered = &windows - &mean;

    let mat = nalgebra::DMatrix::from_fn(n, d, |i, j| centered[(i, j)]);
    let svd = nalgebra::SVD::new(mat.clone(), false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let basis = v_t.rows(0, rank).into_owned(); // rank x d

    let recon = &mat * basis.transpose() * &basis;
    let mut acc = 0.0;
    for i in 0..n {
        let mut row_err = 0.0;
        for j in (d - m)..d {
            row_err += (recon[(i, j)] - mat[(i, j)]).abs();
        }
        acc += row_err / m as f64;
    }
    acc / n as f64
}

#[test]
fn linear_autoencoder_learns_sinusoid_within_budget() {
    let train = small_sinusoid(512, 9);
    let mut spec = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder).with_seed(7);
    spec.hp.window = 16;
    spec.hp.latent = 4;
    spec.hp.max_epochs = 200;

    // The task must be solvable by *some* linear code of this rank.
    let oracle = optimal_linear_mae(&train, 16, 4);
    assert!(oracle < 0.05, "oracle says the task is too hard: {oracle}");

    let fitted = fit(&spec, &train).unwrap();
    assert!(
        fitted.train_error_stats.mean < 0.1,
        "training MAE {} (oracle {})",
        fitted.train_error_stats.mean,
        oracle
    );
}

#[test]
fn early_stop_checkpoint_is_the_validation_minimum() {
    let train = small_sinusoid(400, 21);
    let mut spec = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder).with_seed(5);
    spec.hp.max_epochs = 120;
    let fitted = fit(&spec, &train).unwrap();
    let hist = &fitted.loss_history;
    assert!(!hist.validation.is_empty());
    let min = hist
        .validation
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert_eq!(hist.validation[hist.best_epoch], min);
}

#[test]
fn scoring_is_pure() {
    let train = small_sinusoid(256, 2);
    let spec = DetectorSpec::new(DetectorKind::KnnDistance).with_seed(1);
    let fitted = fit(&spec, &train).unwrap();
    let a = score(&fitted, &train).unwrap();
    let b = score(&fitted, &train).unwrap();
    assert_eq!(a, b);
}

#[test]
fn spike_dominates_scores_and_is_the_only_label() {
    let train = small_sinusoid(512, 31);
    let mut spec = DetectorSpec::new(DetectorKind::PcaReconstructor).with_seed(2);
    spec.hp.latent = 2;
    let fitted = fit(&spec, &train).unwrap();

    // Same generator, later seed-controlled noise; one +10 sigma spike.
    let mut target = small_sinusoid(512, 7).slice_rows(256, 320).unwrap();
    let spikes = inject_spikes(&mut target, 1, 30..34, 10.0, 1, 5);
    let scored = score(&fitted, &target).unwrap();

    let (argmax, _) = scored
        .scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(scored.timestamps[argmax], spikes[0]);

    let labels = predict_labels(&scored, &ThresholdRule::default(), &fitted.train_error_stats);
    let flagged: Vec<Timestamp> = labels
        .timestamps
        .iter()
        .zip(&labels.labels)
        .filter(|(_, &l)| l == 1)
        .map(|(t, _)| *t)
        .collect();
    assert_eq!(flagged, spikes);
}

#[test]
fn scores_at_training_mean_are_not_flagged() {
    let stats = TrainErrorStats::from_scores(&[1.0, 2.0, 3.0]);
    let scores = ScoreSeries {
        timestamps: vec![Timestamp::from_millis(0)],
        scores: vec![stats.mean],
        warmup: 0,
    };
    let labels = predict_labels(&scores, &ThresholdRule::default(), &stats);
    assert_eq!(labels.labels, vec![0]);
}

#[test]
fn three_sigma_rule_matches_gaussian_tail() {
    // Monte-Carlo oracle: the analytic one-sided tail P(Z > 3) is 0.00135;
    // a 10k sample self-thresholded at mean + 3 std must flag a fraction
    // within 0.13% +/- 0.1%.
    let sample = gaussian_scores(10_000, 10.0, 99);
    let stats = TrainErrorStats::from_scores(&sample);
    let scores = ScoreSeries {
        timestamps: (0..sample.len() as i64)
            .map(|i| Timestamp::from_millis(i * 1000))
            .collect(),
        scores: sample,
        warmup: 0,
    };
    let labels = predict_labels(&scores, &ThresholdRule::default(), &stats);
    let frac = labels.labels.iter().map(|&l| l as usize).sum::<usize>() as f64
        / labels.labels.len() as f64;
    assert!(
        (0.0003..=0.0023).contains(&frac),
        "flagged fraction {frac}"
    );
}

#[test]
fn threshold_monotone_in_k_and_quantile() {
    let sample = gaussian_scores(5_000, 5.0, 17);
    let stats = TrainErrorStats::from_scores(&sample);
    let scores = ScoreSeries {
        timestamps: (0..sample.len() as i64)
            .map(|i| Timestamp::from_millis(i * 1000))
            .collect(),
        scores: sample,
        warmup: 0,
    };
    let count = |rule: &ThresholdRule| -> usize {
        predict_labels(&scores, rule, &stats)
            .labels
            .iter()
            .map(|&l| l as usize)
            .sum()
    };
    let mut prev = usize::MAX;
    for k in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let c = count(&ThresholdRule::MeanPlusKSigma { k });
        assert!(c <= prev, "k={k}: {c} > {prev}");
        prev = c;
    }
    let mut prev = usize::MAX;
    for q in [0.5, 0.9, 0.99, 0.999] {
        let c = count(&ThresholdRule::Quantile { q });
        assert!(c <= prev, "q={q}: {c} > {prev}");
        prev = c;
    }
}

#[test]
fn perfect_reconstructor_has_zero_mae() {
    let train = constant_series(64, 2, 5.0);
    let mut spec = DetectorSpec::new(DetectorKind::PcaReconstructor);
    spec.hp.latent = 1;
    let mut fitted = fit(&spec, &train).unwrap();
    let mae = evaluate_mae(&mut fitted, &constant_series(32, 2, 5.0)).unwrap();
    assert_eq!(mae, 0.0);
    assert_eq!(fitted.mae, Some(0.0));
}

#[test]
fn mean_predictor_mae_on_standardized_noise_matches_monte_carlo() {
    // seasonal residual with period 1 predicts the training mean everywhere.
    let n = 20_000;
    let noise = gaussian_scores(n, 0.0, 3);
    let stamps = (0..n as i64).map(|i| Timestamp::from_millis(i * 1000)).collect();
    let values = Array2::from_shape_vec((n, 1), noise).unwrap();
    let series = TimeSeries::new(stamps, vec!["c0".into()], values).unwrap();
    let stats = zscore_fit(&series).unwrap();
    let standardized = zscore_apply(&series, &stats).unwrap();

    let mut spec = DetectorSpec::new(DetectorKind::SeasonalResidual);
    spec.hp.season_period = 1;
    let mut fitted = fit(&spec, &standardized).unwrap();
    let mae = evaluate_mae(&mut fitted, &standardized).unwrap();

    // Independent Monte-Carlo estimate of E|Z| from a different draw, plus
    // the analytic sqrt(2/pi) as a sanity anchor.
    let oracle: f64 = gaussian_scores(100_000, 0.0, 1234)
        .iter()
        .map(|z| z.abs())
        .sum::<f64>()
        / 100_000.0;
    assert!((oracle - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
    assert!((mae - oracle).abs() < 0.02, "mae {mae} vs oracle {oracle}");
}

#[test]
fn sweep_returns_singleton_grid_entry() {
    let train = small_sinusoid(300, 8);
    let spec = DetectorSpec::new(DetectorKind::MovingAverageResidual).with_seed(3);
    let best = hyperparameter_sweep(&[spec.clone()], &train, 2).unwrap();
    assert_eq!(best, spec);
}

#[test]
fn sweep_prefers_latent_size_that_can_represent_two_frequencies() {
    // Two incommensurate-period components make the window manifold rank 4;
    // a rank-1 code cannot reconstruct it. The closed-form oracle certifies
    // the gap before the sweep is trusted to find it.
    let n = 480;
    let values = Array2::from_shape_fn((n, 1), |(i, _)| {
        let t = i as f64;
        (2.0 * std::f64::consts::PI * t / 32.0).sin()
            + 0.5 * (2.0 * std::f64::consts::PI * t / 8.0).sin()
    });
    let stamps = (0..n as i64).map(|i| Timestamp::from_millis(i * 1000)).collect();
    let series = TimeSeries::new(stamps, vec!["c0".into()], values).unwrap();
    let stats = zscore_fit(&series).unwrap();
    let series = zscore_apply(&series, &stats).unwrap();

    let oracle_small = optimal_linear_mae(&series, 16, 1);
    let oracle_large = optimal_linear_mae(&series, 16, 4);
    assert!(
        oracle_large < 0.02 && oracle_small > 5.0 * oracle_large,
        "oracle gap too small: rank1 {oracle_small}, rank4 {oracle_large}"
    );

    let mut small = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder).with_seed(11);
    small.hp.window = 16;
    small.hp.latent = 1;
    small.hp.max_epochs = 120;
    let mut large = small.clone();
    large.hp.latent = 4;

    let best = hyperparameter_sweep(&[small.clone(), large.clone()], &series, 2).unwrap();
    assert_eq!(best, large);
}

#[test]
fn sweep_breaks_ties_by_grid_order() {
    let train = small_sinusoid(300, 8);
    let a = DetectorSpec::new(DetectorKind::MovingAverageResidual)
        .with_seed(3)
        .with_name("first");
    let b = a.clone().with_name("second");
    let best = hyperparameter_sweep(&[a.clone(), b], &train, 2).unwrap();
    assert_eq!(best.name, "first");
}

#[test]
fn sweep_rejects_out_of_range_entries() {
    let train = small_sinusoid(300, 8);
    let mut spec = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder);
    spec.hp.batch_size = 8; // below the configured minimum of 16
    match hyperparameter_sweep(&[spec], &train, 2) {
        Err(DetectorError::OutsideSweepRange { name, .. }) => assert_eq!(name, "batch_size"),
        other => panic!("expected range error, got {other:?}"),
    }
}

#[test]
fn fit_rejects_too_few_rows() {
    let train = small_sinusoid(300, 8).slice_rows(0, 8).unwrap();
    let mut spec = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder);
    spec.hp.window = 16;
    assert!(matches!(
        fit(&spec, &train),
        Err(DetectorError::TooFewRows { required: 16, .. })
    ));
}

#[test]
fn divergent_training_reports_non_finite_loss_with_epoch() {
    // Adam's update magnitude is bounded by the learning rate, so the rate
    // itself has to push the parameters past the f64 range to overflow.
    let train = small_sinusoid(256, 4);
    let mut spec = DetectorSpec::new(DetectorKind::WindowLinearAutoencoder).with_seed(1);
    spec.hp.learning_rate = 1e200;
    match fit(&spec, &train) {
        Err(DetectorError::NonFiniteLoss { epoch }) => assert!(epoch < 5),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn score_rejects_channel_mismatch() {
    let train = small_sinusoid(256, 2);
    let spec = DetectorSpec::new(DetectorKind::MovingAverageResidual);
    let fitted = fit(&spec, &train).unwrap();
    let other = constant_series(64, 2, 1.0);
    assert!(score(&fitted, &other).is_err());
}

#[test]
fn panel_labels_are_heterogeneous_on_mixed_faults() {
    let train = small_sinusoid(768, 13);
    let mut target = small_sinusoid(768, 14).slice_rows(256, 512).unwrap();
    inject_spikes(&mut target, 1, 60..64, 10.0, 1, 6);
    inject_level_shift(&mut target, 150, 50, 4.0);

    let mut verdicts: Vec<Vec<u8>> = Vec::new();
    for kind in DetectorKind::ALL {
        let mut spec = DetectorSpec::new(kind).with_seed(4);
        spec.hp.season_period = 64;
        spec.hp.max_epochs = 60;
        let fitted = fit(&spec, &train).unwrap();
        let scored = score(&fitted, &target).unwrap();
        let labels = predict_labels(&scored, &ThresholdRule::default(), &fitted.train_error_stats);
        // Compare on the common suffix so warmup differences do not matter.
        let tail = 180;
        verdicts.push(labels.labels[labels.labels.len() - tail..].to_vec());
    }
    let all_same = verdicts.windows(2).all(|w| w[0] == w[1]);
    assert!(!all_same, "all five detectors produced identical labels");
}

#[test]
fn derive_seed_is_stable_and_name_sensitive() {
    let a = derive_seed(42, "alpha");
    assert_eq!(a, derive_seed(42, "alpha"));
    assert_ne!(a, derive_seed(42, "beta"));
    assert_ne!(a, derive_seed(43, "alpha"));
}

#[test]
fn quantile_uses_empirical_distribution() {
    let stats = TrainErrorStats::from_scores(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    assert_eq!(stats.quantile(0.5), 5.0);
    assert_eq!(stats.quantile(0.9), 9.0);
    assert_eq!(stats.quantile(0.999), 10.0);
}

