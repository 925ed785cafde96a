//! Behavioral tests for the training harness: loop bookkeeping,
//! determinism, the plain-SGD reduction, early stopping, and the
//! memorization metrics.

use apd_core::data::{gather, gather_rows, make_blobs, split_train_val, Dataset, SplitIndices};
use apd_core::decomp::{AblationMode, GammaInit, OptimizerConfig, ScheduleSpec};
use apd_core::mlp::{init_params, loss_and_grad, MlpArchitecture, ParamSet};
use apd_core::noise::apply_symmetric;
use apd_core::train::{
    evaluate, memorization_curves, metrics_csv, train, EvalParams, LabelSource, TrainConfig,
};
use apd_core::SeededRng;

fn blob_setup(
    n: usize,
    d: usize,
    k: usize,
    noise_rate: f64,
    seed: u64,
) -> (Dataset, SplitIndices, Dataset) {
    let root = SeededRng::new(seed);
    let clean = make_blobs(n, d, k, 0.14, &mut root.substream("data")).unwrap();
    let test = make_blobs(n / 2, d, k, 0.14, &mut root.substream("data-test")).unwrap();
    let train_ds = if noise_rate > 0.0 {
        let outcome =
            apply_symmetric(&clean.noisy_labels, noise_rate, k, &mut root.substream("noise"))
                .unwrap();
        clean.with_noise(&outcome, "sym").unwrap()
    } else {
        clean
    };
    let split = split_train_val(&train_ds, 0.1, &mut root.substream("split")).unwrap();
    (train_ds, split, test)
}

fn base_config(d: usize, k: usize, mode: AblationMode, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        arch: MlpArchitecture::new(d, vec![32], k),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.001,
            lr_decay_epochs: vec![],
            lr_decay_factor: 0.1,
            norm_epsilon: 1e-12,
        },
        schedule: ScheduleSpec::power(1e-4, 0.6),
        mode,
        gamma_init: GammaInit::Zeros,
        max_epochs: epochs,
        batch_size: 32,
        seed,
        eval_params: None,
    }
}

#[test]
fn per_epoch_has_exactly_max_epochs_rows() {
    let (data, split, test) = blob_setup(400, 6, 4, 0.2, 3);
    let cfg = base_config(6, 4, AblationMode::Full, 3, 11);
    let result = train(&data, &split, &test, &cfg).unwrap();
    assert_eq!(result.per_epoch.len(), 3);
    assert_eq!(result.per_epoch[0].epoch, 1);
    assert_eq!(result.per_epoch[2].epoch, 3);
}

#[test]
fn same_seed_gives_byte_identical_metrics_csv() {
    let (data, split, test) = blob_setup(500, 5, 5, 0.3, 4);
    let cfg = base_config(5, 5, AblationMode::Standard, 4, 21);
    let a = train(&data, &split, &test, &cfg).unwrap();
    let b = train(&data, &split, &test, &cfg).unwrap();
    assert_eq!(metrics_csv(&a.per_epoch), metrics_csv(&b.per_epoch));
}

/// Plain SGD-with-momentum over flat parameter vectors, replicating the
/// shuffle/init streams but owning its update arithmetic. This is the
/// reduction oracle for Standard mode.
#[allow(clippy::needless_range_loop)] // oracle stays in primitive indexed form
fn plain_sgd_epoch_trajectory(
    data: &Dataset,
    split: &SplitIndices,
    cfg: &TrainConfig,
    epochs: usize,
) -> Vec<Vec<u64>> {
    let root = SeededRng::new(cfg.seed);
    let mut init_rng = root.substream("init");
    let mut params = init_params(&cfg.arch, &mut init_rng);
    let n_params = params.num_params();
    let mut vel = vec![0.0f64; n_params];
    let shuffle_root = root.substream("shuffle");

    let x_train = gather_rows(&data.features, &split.train);
    let y_train = gather(&data.noisy_labels, &split.train);

    let mut trajectory = Vec::new();
    for t in 1..=epochs {
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        shuffle_root
            .substream(&format!("epoch-{t}"))
            .shuffle(&mut order);
        let lr = cfg.optimizer.lr_at(t);
        for batch in order.chunks(cfg.batch_size) {
            let xb = gather_rows(&x_train, batch);
            let yb = gather(&y_train, batch);
            let bg = loss_and_grad(&params, &xb, &yb, cfg.arch.activation).unwrap();
            for i in 0..n_params {
                let g = bg.grads.get_flat(i) + cfg.optimizer.weight_decay * params.get_flat(i);
                vel[i] = cfg.optimizer.momentum * vel[i] + g;
                params.add_flat(i, -(lr * vel[i]));
            }
        }
        trajectory.push(params.iter_flat().map(f64::to_bits).collect());
    }
    trajectory
}

#[test]
fn standard_mode_is_bitwise_plain_sgd_with_momentum() {
    let (data, split, test) = blob_setup(600, 6, 4, 0.4, 9);
    let mut cfg = base_config(6, 4, AblationMode::Standard, 3, 33);
    cfg.optimizer.lr_decay_epochs = vec![2];
    let oracle = plain_sgd_epoch_trajectory(&data, &split, &cfg, 3);
    for epochs in 1..=3usize {
        let mut c = cfg.clone();
        c.max_epochs = epochs;
        let result = train(&data, &split, &test, &c).unwrap();
        let got: Vec<u64> = result.final_state.sigma.iter_flat().map(f64::to_bits).collect();
        assert_eq!(got, oracle[epochs - 1], "diverged at epoch {epochs}");
        assert!(result.final_state.gamma.iter_flat().all(|g| g == 0.0));
    }
}

#[test]
fn early_stopping_picks_earliest_maximum_and_checkpoint_reproduces() {
    let (data, split, test) = blob_setup(800, 6, 4, 0.4, 17);
    let cfg = base_config(6, 4, AblationMode::Full, 12, 5);
    let result = train(&data, &split, &test, &cfg).unwrap();

    let eval_accs: Vec<f64> = result.per_epoch.iter().map(|m| m.val_acc_sigma).collect();
    let best = eval_accs
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let earliest = eval_accs.iter().position(|&a| a == best).unwrap() + 1;
    assert_eq!(result.best_epoch, earliest);
    assert_eq!(result.best_val_acc, best);

    // Re-evaluating the checkpoint reproduces the logged accuracy exactly.
    let val_features = gather_rows(&data.features, &split.val);
    let val_labels = gather(&data.noisy_labels, &split.val);
    let val_ds = Dataset {
        features: val_features,
        clean_labels: None,
        noisy_labels: val_labels,
        num_classes: data.num_classes,
        provenance: String::new(),
    };
    let acc = evaluate(&result.best_sigma, &val_ds, LabelSource::Noisy, &cfg.arch).unwrap();
    assert_eq!(acc, best);
}

#[test]
fn clean_blobs_reach_95_percent_within_30_epochs() {
    let (data, split, test) = blob_setup(2000, 8, 5, 0.0, 29);
    let cfg = base_config(8, 5, AblationMode::Standard, 30, 7);
    let result = train(&data, &split, &test, &cfg).unwrap();
    let best = result
        .per_epoch
        .iter()
        .map(|m| m.test_acc_full)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best >= 0.95, "clean blob accuracy {best}");
}

#[test]
fn memorization_metrics_split_clean_and_flipped() {
    let (data, split, test) = blob_setup(2000, 8, 5, 0.4, 41);
    let cfg = base_config(8, 5, AblationMode::Standard, 6, 13);
    let result = train(&data, &split, &test, &cfg).unwrap();
    let curves = memorization_curves(&result).unwrap();
    assert_eq!(curves.clean_fit.len(), 6);
    let mislabeled = curves.mislabeled_fit.expect("flips exist");
    assert_eq!(mislabeled.len(), 6);
    // The first epoch already fits far more clean than mislabeled data.
    assert!(curves.clean_fit[0] > mislabeled[0]);
}

#[test]
fn zero_noise_run_reports_mislabeled_fit_as_absent() {
    let (data, split, test) = blob_setup(400, 5, 4, 0.0, 43);
    let cfg = base_config(5, 4, AblationMode::Standard, 2, 15);
    let result = train(&data, &split, &test, &cfg).unwrap();
    assert!(result.per_epoch.iter().all(|m| m.fit_frac_mislabeled.is_none()));
    assert!(result.per_epoch.iter().all(|m| m.fit_frac_clean.is_some()));
    let curves = memorization_curves(&result).unwrap();
    assert!(curves.mislabeled_fit.is_none());
    // And the CSV renders the absent column as NaN.
    let csv = metrics_csv(&result.per_epoch);
    assert!(csv.lines().nth(1).unwrap().contains("NaN"));
}

#[test]
fn logged_schedules_are_monotone() {
    let (data, split, test) = blob_setup(500, 5, 4, 0.3, 47);
    let mut cfg = base_config(5, 4, AblationMode::Full, 8, 19);
    cfg.optimizer.lr_decay_epochs = vec![4, 6];
    let result = train(&data, &split, &test, &cfg).unwrap();
    for w in result.per_epoch.windows(2) {
        assert!(w[1].beta1 > w[0].beta1);
        assert!(w[1].beta2 <= w[0].beta2);
        assert!(w[1].lr <= w[0].lr);
    }
}

#[test]
fn evaluate_zero_params_predicts_class_zero_share() {
    let mut rng = SeededRng::new(51);
    let data = make_blobs(1000, 4, 10, 0.1, &mut rng).unwrap();
    let arch = MlpArchitecture::new(4, vec![8], 10);
    let zero = ParamSet::zeros(&arch);
    let acc = evaluate(&zero, &data, LabelSource::Noisy, &arch).unwrap();
    assert!((acc - 0.1).abs() < 1e-12);
}

#[test]
fn evaluate_is_order_invariant() {
    let mut rng = SeededRng::new(53);
    let data = make_blobs(300, 4, 3, 0.1, &mut rng).unwrap();
    let arch = MlpArchitecture::new(4, vec![8], 3);
    let params = init_params(&arch, &mut rng.substream("init"));
    let acc = evaluate(&params, &data, LabelSource::Clean, &arch).unwrap();

    let perm: Vec<usize> = (0..data.len()).rev().collect();
    let permuted = Dataset {
        features: gather_rows(&data.features, &perm),
        clean_labels: data
            .clean_labels
            .as_ref()
            .map(|c| gather(c, &perm)),
        noisy_labels: gather(&data.noisy_labels, &perm),
        num_classes: data.num_classes,
        provenance: String::new(),
    };
    let acc_perm = evaluate(&params, &permuted, LabelSource::Clean, &arch).unwrap();
    assert_eq!(acc, acc_perm);
}

#[test]
fn memorizing_net_fits_noisy_train_labels() {
    // Small sample, large capacity, no lr decay: accuracy on the noisy
    // train labels should approach 1.
    let (data, split, _test) = blob_setup(150, 6, 3, 0.3, 59);
    let mut cfg = base_config(6, 3, AblationMode::Standard, 250, 23);
    cfg.arch = MlpArchitecture::new(6, vec![64, 64], 3);
    cfg.batch_size = 16;
    cfg.optimizer.weight_decay = 0.0;
    let test_stub = {
        let mut rng = SeededRng::new(60);
        make_blobs(60, 6, 3, 0.14, &mut rng).unwrap()
    };
    let result = train(&data, &split, &test_stub, &cfg).unwrap();
    let train_features = gather_rows(&data.features, &split.train);
    let train_labels = gather(&data.noisy_labels, &split.train);
    let train_ds = Dataset {
        features: train_features,
        clean_labels: None,
        noisy_labels: train_labels,
        num_classes: data.num_classes,
        provenance: String::new(),
    };
    let acc = evaluate(
        &result.final_state.sigma,
        &train_ds,
        LabelSource::Noisy,
        &cfg.arch,
    )
    .unwrap();
    assert!(acc > 0.9, "noisy train fit {acc}");
}

#[test]
fn requesting_clean_labels_without_them_is_an_error() {
    let mut rng = SeededRng::new(61);
    let mut data = make_blobs(100, 4, 3, 0.1, &mut rng).unwrap();
    data.clean_labels = None;
    let arch = MlpArchitecture::new(4, vec![4], 3);
    let zero = ParamSet::zeros(&arch);
    assert!(evaluate(&zero, &data, LabelSource::Clean, &arch).is_err());
}

#[test]
fn dimension_mismatch_is_rejected_before_compute() {
    let (data, split, test) = blob_setup(200, 5, 4, 0.2, 67);
    let cfg = base_config(7, 4, AblationMode::Full, 2, 1);
    assert!(train(&data, &split, &test, &cfg).is_err());
}

#[test]
fn eval_override_controls_best_checkpoint_side() {
    let (data, split, test) = blob_setup(400, 5, 4, 0.3, 71);
    let mut cfg = base_config(5, 4, AblationMode::Full, 3, 2);
    cfg.eval_params = Some(EvalParams::Full);
    let result = train(&data, &split, &test, &cfg).unwrap();
    let evals: Vec<f64> = result.per_epoch.iter().map(|m| m.val_acc_full).collect();
    let best = evals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.best_val_acc, best);
}
