//! End-to-end training: epoch and mini-batch loops, per-epoch constraint
//! weights, dual updates, early stopping on the noisy validation split,
//! and memorization-effect metrics.

use crate::data::{gather, gather_rows, Dataset, SplitIndices};
use crate::decomp::{
    decompose, effective_betas, effective_params, snapshot_epoch, step, AblationMode,
    DecomposedParams, GammaInit, OptimizerConfig, ScheduleSpec,
};
use crate::error::{Error, Result};
use crate::mlp::{init_params, loss_and_grad, predict, MlpArchitecture, ParamSet};
use crate::rng::SeededRng;
use std::fmt::Write as _;
use std::path::Path;

/// Which parameters drive validation stopping and the fit-fraction
/// metrics; derived from the mode unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalParams {
    Sigma,
    Full,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: MlpArchitecture,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleSpec,
    pub mode: AblationMode,
    pub gamma_init: GammaInit,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_params: Option<EvalParams>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Unconstrained modes predict with `w`, constrained ones with sigma.
    pub fn resolved_eval(&self) -> EvalParams {
        self.eval_params.unwrap_or(if self.mode.eval_with_sigma() {
            EvalParams::Sigma
        } else {
            EvalParams::Full
        })
    }
}

/// Everything logged at the end of one epoch.
#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub train_loss: f64,
    /// Fraction of unflipped training examples predicted as their given
    /// label (under the eval parameters); absent without clean labels.
    pub fit_frac_clean: Option<f64>,
    /// Same over flipped examples; absent when nothing was flipped.
    pub fit_frac_mislabeled: Option<f64>,
    pub val_acc_sigma: f64,
    pub val_acc_full: f64,
    pub test_acc_sigma: f64,
    pub test_acc_full: f64,
    pub sigma_delta_norm: f64,
    pub gamma_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub per_epoch: Vec<EpochMetrics>,
    /// Epoch of the best validation accuracy under the eval parameters;
    /// ties break toward the earliest epoch.
    pub best_epoch: usize,
    /// Checkpoint of the prediction parameters at `best_epoch` (sigma in
    /// the constrained modes, `w` otherwise).
    pub best_sigma: ParamSet,
    pub final_state: DecomposedParams,
    /// The eval-side validation accuracy at `best_epoch`.
    pub best_val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    Clean,
    Noisy,
}

/// Mean accuracy of `params` on a dataset against the requested label
/// source; exact count, order-independent.
pub fn evaluate(
    params: &ParamSet,
    data: &Dataset,
    source: LabelSource,
    arch: &MlpArchitecture,
) -> Result<f64> {
    let labels: &[usize] = match source {
        LabelSource::Noisy => &data.noisy_labels,
        LabelSource::Clean => data
            .clean_labels
            .as_deref()
            .ok_or_else(|| Error::Data("clean labels requested but absent".into()))?,
    };
    let preds = predict(params, &data.features, arch.activation)?;
    Ok(accuracy(&preds, labels))
}

fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    correct as f64 / preds.len() as f64
}

/// Run the full training loop and return per-epoch metrics plus the
/// early-stopped checkpoint.
pub fn train(
    data: &Dataset,
    split: &SplitIndices,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.validate()?;
    data.validate()?;
    test.validate()?;
    if data.dim() != cfg.arch.input_dim {
        return Err(Error::dim_mismatch(
            "training features vs architecture",
            &[data.dim()],
            &[cfg.arch.input_dim],
        ));
    }
    if test.dim() != cfg.arch.input_dim {
        return Err(Error::dim_mismatch(
            "test features vs architecture",
            &[test.dim()],
            &[cfg.arch.input_dim],
        ));
    }
    if data.num_classes > cfg.arch.num_classes || test.num_classes > cfg.arch.num_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes but the architecture outputs {}",
            data.num_classes.max(test.num_classes),
            cfg.arch.num_classes
        )));
    }
    let n = data.len();
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Config("split sides must both be nonempty".into()));
    }
    if split.train.iter().chain(&split.val).any(|&i| i >= n) {
        return Err(Error::Config("split index out of range".into()));
    }
    if test.clean_labels.is_none() {
        return Err(Error::Data(
            "test dataset needs clean labels for evaluation".into(),
        ));
    }

    let x_train = gather_rows(&data.features, &split.train);
    let y_train = gather(&data.noisy_labels, &split.train);
    let train_flips: Option<Vec<bool>> = data
        .flip_mask()
        .map(|mask| split.train.iter().map(|&i| mask[i]).collect());
    let x_val = gather_rows(&data.features, &split.val);
    let y_val = gather(&data.noisy_labels, &split.val);
    let val_data = Dataset {
        features: x_val,
        clean_labels: None,
        noisy_labels: y_val,
        num_classes: data.num_classes,
        provenance: String::new(),
    };

    let root = SeededRng::new(cfg.seed);
    let mut init_rng = root.substream("init");
    let mut decomp_rng = root.substream("decomp");
    let shuffle_root = root.substream("shuffle");

    let w_init = init_params(&cfg.arch, &mut init_rng);
    let mut dp = decompose(&w_init, cfg.gamma_init, &mut decomp_rng)?;

    let act = cfg.arch.activation;
    let eval_kind = cfg.resolved_eval();
    let n_train = split.train.len();

    let mut per_epoch = Vec::with_capacity(cfg.max_epochs);
    let mut best_epoch = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_sigma = dp.sigma.clone();

    for t in 1..=cfg.max_epochs {
        snapshot_epoch(&mut dp);
        let (b1, b2) = effective_betas(t, &cfg.schedule, cfg.mode)?;
        let lr = cfg.optimizer.lr_at(t);

        let mut order: Vec<usize> = (0..n_train).collect();
        shuffle_root
            .substream(&format!("epoch-{t}"))
            .shuffle(&mut order);

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = gather_rows(&x_train, batch);
            let yb = gather(&y_train, batch);
            let bg = if cfg.mode.decomposed() {
                let w = effective_params(&dp);
                loss_and_grad(&w, &xb, &yb, act)?
            } else {
                loss_and_grad(&dp.sigma, &xb, &yb, act)?
            };
            loss_sum += bg.loss * batch.len() as f64;
            step(&mut dp, &bg.grads, t, &cfg.optimizer, &cfg.schedule, cfg.mode)?;
        }
        let train_loss = loss_sum / n_train as f64;

        let sigma_delta_norm = dp.sigma.sub(&dp.sigma_snapshot)?.l2_norm();
        let gamma_norm = dp.gamma.l2_norm();
        let w = effective_params(&dp);

        let val_acc_sigma = evaluate(&dp.sigma, &val_data, LabelSource::Noisy, &cfg.arch)?;
        let val_acc_full = evaluate(&w, &val_data, LabelSource::Noisy, &cfg.arch)?;
        let test_acc_sigma = evaluate(&dp.sigma, test, LabelSource::Clean, &cfg.arch)?;
        let test_acc_full = evaluate(&w, test, LabelSource::Clean, &cfg.arch)?;

        let eval_set = match eval_kind {
            EvalParams::Sigma => &dp.sigma,
            EvalParams::Full => &w,
        };
        let (fit_frac_clean, fit_frac_mislabeled) = match &train_flips {
            None => (None, None),
            Some(flips) => {
                let preds = predict(eval_set, &x_train, act)?;
                let mut kept = [0usize; 2];
                let mut hit = [0usize; 2];
                for i in 0..n_train {
                    let group = usize::from(flips[i]);
                    kept[group] += 1;
                    if preds[i] == y_train[i] {
                        hit[group] += 1;
                    }
                }
                let frac = |idx: usize| {
                    if kept[idx] == 0 {
                        None
                    } else {
                        Some(hit[idx] as f64 / kept[idx] as f64)
                    }
                };
                (frac(0), frac(1))
            }
        };

        let val_acc_eval = match eval_kind {
            EvalParams::Sigma => val_acc_sigma,
            EvalParams::Full => val_acc_full,
        };
        if val_acc_eval > best_val {
            best_val = val_acc_eval;
            best_epoch = t;
            best_sigma = eval_set.clone();
        }

        per_epoch.push(EpochMetrics {
            epoch: t,
            lr,
            beta1: b1,
            beta2: b2,
            train_loss,
            fit_frac_clean,
            fit_frac_mislabeled,
            val_acc_sigma,
            val_acc_full,
            test_acc_sigma,
            test_acc_full,
            sigma_delta_norm,
            gamma_norm,
        });
    }

    Ok(TrainResult {
        per_epoch,
        best_epoch,
        best_sigma,
        final_state: dp,
        best_val_acc: best_val,
    })
}

/// Test accuracy of the early-stopped checkpoint.
pub fn best_test_acc(result: &TrainResult, eval: EvalParams) -> f64 {
    let row = &result.per_epoch[result.best_epoch - 1];
    match eval {
        EvalParams::Sigma => row.test_acc_sigma,
        EvalParams::Full => row.test_acc_full,
    }
}

/// The clean-fit and mislabeled-fit series over epochs.
#[derive(Debug, Clone)]
pub struct MemorizationCurves {
    pub clean_fit: Vec<f64>,
    /// Absent when the run had no flipped examples.
    pub mislabeled_fit: Option<Vec<f64>>,
}

pub fn memorization_curves(result: &TrainResult) -> Result<MemorizationCurves> {
    let clean_fit: Option<Vec<f64>> = result
        .per_epoch
        .iter()
        .map(|m| m.fit_frac_clean)
        .collect();
    let clean_fit = clean_fit.ok_or_else(|| {
        Error::Diagnostic("memorization curves require a flip mask (clean labels)".into())
    })?;
    let mislabeled_fit: Option<Vec<f64>> = result
        .per_epoch
        .iter()
        .map(|m| m.fit_frac_mislabeled)
        .collect();
    Ok(MemorizationCurves {
        clean_fit,
        mislabeled_fit,
    })
}

pub const METRICS_CSV_HEADER: &str = "epoch,lr,beta1,beta2,train_loss,fit_frac_clean,\
fit_frac_mislabeled,val_acc_sigma,val_acc_full,test_acc_sigma,test_acc_full,\
sigma_delta_norm,gamma_norm";

/// Six significant digits, deterministic; absent values render as NaN.
fn fmt_metric(x: Option<f64>) -> String {
    match x {
        None => "NaN".to_string(),
        Some(v) if v.is_nan() => "NaN".to_string(),
        Some(v) => format!("{v:.5e}"),
    }
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::with_capacity(rows.len() * 160 + 160);
    out.push_str(METRICS_CSV_HEADER);
    out.push('\n');
    for m in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.epoch,
            fmt_metric(Some(m.lr)),
            fmt_metric(Some(m.beta1)),
            fmt_metric(Some(m.beta2)),
            fmt_metric(Some(m.train_loss)),
            fmt_metric(m.fit_frac_clean),
            fmt_metric(m.fit_frac_mislabeled),
            fmt_metric(Some(m.val_acc_sigma)),
            fmt_metric(Some(m.val_acc_full)),
            fmt_metric(Some(m.test_acc_sigma)),
            fmt_metric(Some(m.test_acc_full)),
            fmt_metric(Some(m.sigma_delta_norm)),
            fmt_metric(Some(m.gamma_norm)),
        );
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    std::fs::write(path, metrics_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_is_exact() {
        assert_eq!(
            METRICS_CSV_HEADER,
            "epoch,lr,beta1,beta2,train_loss,fit_frac_clean,fit_frac_mislabeled,\
             val_acc_sigma,val_acc_full,test_acc_sigma,test_acc_full,sigma_delta_norm,gamma_norm"
        );
    }

    #[test]
    fn csv_renders_six_significant_digits() {
        assert_eq!(fmt_metric(Some(0.01)), "1.00000e-2");
        assert_eq!(fmt_metric(Some(std::f64::consts::LN_10)), "2.30259e0");
        assert_eq!(fmt_metric(Some(0.0001)), "1.00000e-4");
        assert_eq!(fmt_metric(Some(0.0)), "0.00000e0");
        assert_eq!(fmt_metric(None), "NaN");
    }

    #[test]
    fn accuracy_counts_matches() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 0]), 2.0 / 3.0);
        assert_eq!(accuracy(&[], &[]), 0.0);
    }
}
