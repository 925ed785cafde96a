//! Per-trial experiment assembly: datasets, noise, splits, seeds, and
//! summary statistics.
//!
//! Trial `i` runs with seed `base_seed + i`; dataset generation, noise,
//! the validation split, and the training loop each draw from named
//! substreams of that trial seed, so changing one consumer never perturbs
//! another and all modes/grid points compare against identical data
//! within a trial.

use crate::config::{DatasetKind, ExperimentConfig};
use apd_core::data::{load_idx_dataset_dir, make_blobs, split_train_val, Dataset, SplitIndices};
use apd_core::decomp::ScheduleSpec;
use apd_core::error::{Error, Result};
use apd_core::noise::{self, NoiseOutcome};
use apd_core::train::{train, TrainConfig, TrainResult};
use apd_core::{SeededRng, Tensor};
use rayon::prelude::*;
use serde::Serialize;

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Everything one trial trains on.
pub struct TrialData {
    pub train: Dataset,
    pub split: SplitIndices,
    pub test: Dataset,
    pub clean_labels: Vec<usize>,
    pub outcome: Option<NoiseOutcome>,
}

fn truncate_dataset(ds: Dataset, limit: usize) -> Dataset {
    if limit == 0 || limit >= ds.len() {
        return ds;
    }
    let d = ds.dim();
    let features = Tensor::from_vec(
        &[limit, d],
        ds.features.data()[..limit * d].to_vec(),
    )
    .expect("prefix slice keeps row count consistent");
    Dataset {
        features,
        clean_labels: ds.clean_labels.map(|c| c[..limit].to_vec()),
        noisy_labels: ds.noisy_labels[..limit].to_vec(),
        num_classes: ds.num_classes,
        provenance: format!("{}-subset{limit}", ds.provenance),
    }
}

pub fn build_trial_data(cfg: &ExperimentConfig, trial: usize) -> Result<TrialData> {
    let seed = trial_seed(cfg.seed, trial);
    let root = SeededRng::new(seed);
    let (clean_train, test) = match cfg.dataset.kind {
        DatasetKind::Blobs => {
            let ds = &cfg.dataset;
            let train = make_blobs(
                ds.n,
                ds.d,
                ds.k,
                ds.cluster_std,
                &mut root.substream("data"),
            )?;
            let test = make_blobs(
                ds.test_n,
                ds.d,
                ds.k,
                ds.cluster_std,
                &mut root.substream("data-test"),
            )?;
            (train, test)
        }
        DatasetKind::Idx => {
            if cfg.dataset.idx_dir.as_os_str().is_empty() {
                return Err(Error::Config(
                    "dataset.idx_dir must be set for idx datasets".into(),
                ));
            }
            let (train, test) = load_idx_dataset_dir(&cfg.dataset.idx_dir)?;
            (
                truncate_dataset(train, cfg.dataset.subset),
                truncate_dataset(test, cfg.dataset.subset),
            )
        }
    };
    let clean_labels = clean_train
        .clean_labels
        .clone()
        .ok_or_else(|| Error::Data("trial dataset lost its clean labels".into()))?;

    let (train_ds, outcome) = match cfg.noise_spec()? {
        None => (clean_train, None),
        Some(spec) => {
            let mut noise_rng = root.substream("noise");
            let outcome = noise::apply(
                &spec,
                Some(&clean_train.features),
                &clean_labels,
                &mut noise_rng,
            )?;
            let tag = format!("{}{}", spec.kind, (spec.rate * 100.0).round() as i64);
            let noisy = clean_train.with_noise(&outcome, &tag)?;
            (noisy, Some(outcome))
        }
    };

    // Split after noise injection: the validation labels stay noisy.
    let split = split_train_val(&train_ds, cfg.val_fraction, &mut root.substream("split"))?;
    Ok(TrialData {
        train: train_ds,
        split,
        test,
        clean_labels,
        outcome,
    })
}

/// One completed training run.
pub struct TrialRun {
    pub trial: usize,
    pub seed: u64,
    pub result: TrainResult,
}

fn annotate(e: Error, trial: usize, seed: u64) -> Error {
    let tag = format!("trial {trial} (seed {seed})");
    match e {
        Error::Config(m) => Error::Config(format!("{tag}: {m}")),
        Error::Schedule(m) => Error::Schedule(format!("{tag}: {m}")),
        Error::Data(m) => Error::Data(format!("{tag}: {m}")),
        Error::Checkpoint(m) => Error::Checkpoint(format!("{tag}: {m}")),
        Error::Diagnostic(m) => Error::Diagnostic(format!("{tag}: {m}")),
        other => other,
    }
}

/// Train one trial with the given mode/schedule overlaid on the base
/// experiment config.
pub fn run_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    mode: apd_core::decomp::AblationMode,
    schedule: &ScheduleSpec,
) -> Result<TrialRun> {
    let seed = trial_seed(cfg.seed, trial);
    let data = build_trial_data(cfg, trial).map_err(|e| annotate(e, trial, seed))?;
    let train_cfg = TrainConfig {
        arch: cfg.arch(),
        optimizer: cfg.optimizer.clone(),
        schedule: schedule.clone(),
        mode,
        gamma_init: cfg.gamma_init,
        max_epochs: cfg.max_epochs,
        batch_size: cfg.batch_size,
        seed,
        eval_params: cfg.eval_params,
    };
    let result = train(&data.train, &data.split, &data.test, &train_cfg)
        .map_err(|e| annotate(e, trial, seed))?;
    Ok(TrialRun {
        trial,
        seed,
        result,
    })
}

/// All trials for one (mode, schedule) setting; trials execute in
/// parallel, results return in trial order.
pub fn run_trials(
    cfg: &ExperimentConfig,
    mode: apd_core::decomp::AblationMode,
    schedule: &ScheduleSpec,
) -> Result<Vec<TrialRun>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i, mode, schedule))
        .collect()
}

/// Mean and sample (n-1) standard deviation; a single observation has
/// deviation zero.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Accuracy summary in the percent form used for reporting tables.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracySummary {
    pub per_trial: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub display: String,
}

impl AccuracySummary {
    pub fn from_accs(per_trial: Vec<f64>) -> AccuracySummary {
        let (mean, std) = mean_std(&per_trial);
        let display = format!("{:.2}\u{b1}{:.2}", mean * 100.0, std * 100.0);
        AccuracySummary {
            per_trial,
            mean,
            std,
            display,
        }
    }
}
