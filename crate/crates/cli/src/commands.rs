//! The experiment subcommands: noise generation, training, the ablation
//! grid, the c2 sweep, the beta2 family comparison, and feature dumps.

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ExperimentConfig;
use crate::experiment::{
    build_trial_data, run_trials, trial_seed, AccuracySummary, TrialRun,
};
use crate::output::{fmt_sig, write_atomic, write_json};
use apd_core::decomp::AblationMode;
use apd_core::error::{Error, Result};
use apd_core::mlp::hidden_features;
use apd_core::noise::{audit, sidecar_csv};
use apd_core::train::{best_test_acc, write_metrics_csv, EvalParams};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub trials: usize,
    pub seeds: Vec<u64>,
    /// Output files relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub artifact_versions: BTreeMap<String, String>,
}

impl RunManifest {
    fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<String>) -> RunManifest {
        let mut artifact_versions = BTreeMap::new();
        artifact_versions.insert("apd-core".to_string(), apd_core::VERSION.to_string());
        artifact_versions.insert(
            "apd-cli".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        RunManifest {
            command: command.to_string(),
            config_hash: cfg.config_hash.clone(),
            base_seed: cfg.seed,
            trials: cfg.trials,
            seeds: (0..cfg.trials).map(|i| trial_seed(cfg.seed, i)).collect(),
            outputs,
            artifact_versions,
        }
    }
}

fn resolved_eval_for(cfg: &ExperimentConfig, mode: AblationMode) -> EvalParams {
    cfg.eval_params.unwrap_or(if mode.eval_with_sigma() {
        EvalParams::Sigma
    } else {
        EvalParams::Full
    })
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub command: String,
    pub config_hash: String,
    pub dataset: String,
    pub mode: String,
    pub eval: String,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub best_epochs: Vec<usize>,
    pub best_val_acc: AccuracySummary,
    pub best_test_acc: AccuracySummary,
    pub final_test_acc_sigma: AccuracySummary,
    pub final_test_acc_full: AccuracySummary,
}

fn summarize_runs(
    cfg: &ExperimentConfig,
    mode: AblationMode,
    runs: &[TrialRun],
    dataset: String,
) -> TrainSummary {
    let eval = resolved_eval_for(cfg, mode);
    let best_test: Vec<f64> = runs
        .iter()
        .map(|r| best_test_acc(&r.result, eval))
        .collect();
    let best_val: Vec<f64> = runs.iter().map(|r| r.result.best_val_acc).collect();
    let final_sigma: Vec<f64> = runs
        .iter()
        .map(|r| r.result.per_epoch.last().unwrap().test_acc_sigma)
        .collect();
    let final_full: Vec<f64> = runs
        .iter()
        .map(|r| r.result.per_epoch.last().unwrap().test_acc_full)
        .collect();
    TrainSummary {
        command: "train".to_string(),
        config_hash: cfg.config_hash.clone(),
        dataset,
        mode: mode.to_string(),
        eval: match eval {
            EvalParams::Sigma => "sigma",
            EvalParams::Full => "full",
        }
        .to_string(),
        trials: cfg.trials,
        seeds: runs.iter().map(|r| r.seed).collect(),
        best_epochs: runs.iter().map(|r| r.result.best_epoch).collect(),
        best_val_acc: AccuracySummary::from_accs(best_val),
        best_test_acc: AccuracySummary::from_accs(best_test),
        final_test_acc_sigma: AccuracySummary::from_accs(final_sigma),
        final_test_acc_full: AccuracySummary::from_accs(final_full),
    }
}

fn write_trial_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    runs: &[TrialRun],
    outputs: &mut Vec<String>,
    prefix: &str,
) -> Result<()> {
    for run in runs {
        let trial_dir = dir.join(format!("trial{}", run.trial));
        std::fs::create_dir_all(&trial_dir)?;
        write_metrics_csv(&trial_dir.join("metrics.csv"), &run.result.per_epoch)?;
        outputs.push(format!("{prefix}trial{}/metrics.csv", run.trial));
        save_checkpoint(
            &trial_dir.join("checkpoint.json"),
            &cfg.arch(),
            &run.result.best_sigma,
        )?;
        outputs.push(format!("{prefix}trial{}/checkpoint.json", run.trial));
    }
    Ok(())
}

/// `train`: run the configured mode over all trial seeds; write per-trial
/// metrics and checkpoints plus an aggregate summary.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let schedule = cfg.schedule()?;
    let runs = run_trials(cfg, cfg.mode, &schedule)?;
    let dataset = build_trial_data(cfg, 0)?.train.provenance;
    let summary = summarize_runs(cfg, cfg.mode, &runs, dataset);

    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    write_trial_outputs(out, cfg, &runs, &mut outputs, "")?;
    write_json(&out.join("summary.json"), &summary)?;
    outputs.push("summary.json".to_string());
    let manifest = RunManifest::new("train", cfg, outputs);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct NoiseTrialAudit {
    pub trial: usize,
    pub seed: u64,
    pub kind: String,
    pub rate: f64,
    pub flip_fraction: f64,
    pub per_class_flip: Vec<f64>,
    pub realized_transition: Vec<Vec<f64>>,
    pub structural_violations: Vec<String>,
    pub passed: bool,
    pub high_rate_warning: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct GenNoiseReport {
    pub command: String,
    pub config_hash: String,
    pub trials: Vec<NoiseTrialAudit>,
    pub all_passed: bool,
}

/// `gen-noise`: write the per-trial noisy-label sidecar CSVs and audit
/// reports; the outcome says whether every structural audit passed.
pub fn cmd_gen_noise(cfg: &ExperimentConfig) -> Result<GenNoiseReport> {
    let spec = cfg.noise_spec()?.ok_or_else(|| {
        Error::Config("gen-noise requires noise.kind other than `none`".into())
    })?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut audits = Vec::new();
    for trial in 0..cfg.trials {
        let data = build_trial_data(cfg, trial)?;
        let outcome = data
            .outcome
            .as_ref()
            .expect("noise kind checked to be present");
        let report = audit(outcome, &data.clean_labels, &spec)?;
        let trial_dir = out.join(format!("trial{trial}"));
        std::fs::create_dir_all(&trial_dir)?;
        write_atomic(
            &trial_dir.join("noise.csv"),
            sidecar_csv(&data.clean_labels, outcome).as_bytes(),
        )?;
        outputs.push(format!("trial{trial}/noise.csv"));
        let k = spec.num_classes;
        let t = &report.realized_transition;
        let audit_json = NoiseTrialAudit {
            trial,
            seed: trial_seed(cfg.seed, trial),
            kind: spec.kind.to_string(),
            rate: spec.rate,
            flip_fraction: report.flip_fraction,
            per_class_flip: report.per_class_flip.clone(),
            realized_transition: (0..k).map(|i| t.row(i).to_vec()).collect(),
            structural_violations: report.structural_violations.clone(),
            passed: report.passed(),
            high_rate_warning: spec.high_rate_warning(),
        };
        write_json(&trial_dir.join("audit.json"), &audit_json)?;
        outputs.push(format!("trial{trial}/audit.json"));
        audits.push(audit_json);
    }
    let all_passed = audits.iter().all(|a| a.passed);
    let report = GenNoiseReport {
        command: "gen-noise".to_string(),
        config_hash: cfg.config_hash.clone(),
        trials: audits,
        all_passed,
    };
    write_json(&out.join("audit.json"), &report)?;
    outputs.push("audit.json".to_string());
    let manifest = RunManifest::new("gen-noise", cfg, outputs);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct AblateRow {
    pub mode: String,
    pub eval: String,
    pub best_val_acc: AccuracySummary,
    pub best_test_acc: AccuracySummary,
}

#[derive(Debug, Serialize)]
pub struct AblateSummary {
    pub command: String,
    pub config_hash: String,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblateRow>,
}

/// `ablate`: the four modes in fixed order over shared trial seeds, each
/// evaluated with its own prediction parameters.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<AblateSummary> {
    let schedule = cfg.schedule()?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for mode in AblationMode::ALL {
        let runs = run_trials(cfg, mode, &schedule)?;
        let mode_dir = out.join(mode.to_string());
        std::fs::create_dir_all(&mode_dir)?;
        write_trial_outputs(&mode_dir, cfg, &runs, &mut outputs, &format!("{mode}/"))?;
        let eval = resolved_eval_for(cfg, mode);
        let best_test: Vec<f64> = runs
            .iter()
            .map(|r| best_test_acc(&r.result, eval))
            .collect();
        let best_val: Vec<f64> = runs.iter().map(|r| r.result.best_val_acc).collect();
        rows.push(AblateRow {
            mode: mode.to_string(),
            eval: match eval {
                EvalParams::Sigma => "sigma",
                EvalParams::Full => "full",
            }
            .to_string(),
            best_val_acc: AccuracySummary::from_accs(best_val),
            best_test_acc: AccuracySummary::from_accs(best_test),
        });
    }
    let summary = AblateSummary {
        command: "ablate".to_string(),
        config_hash: cfg.config_hash.clone(),
        trials: cfg.trials,
        seeds: (0..cfg.trials).map(|i| trial_seed(cfg.seed, i)).collect(),
        rows,
    };
    write_json(&out.join("ablate.json"), &summary)?;
    outputs.push("ablate.json".to_string());
    let manifest = RunManifest::new("ablate", cfg, outputs);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct SweepEntry {
    pub c2: f64,
    pub mean_val_acc: f64,
    pub summary: TrainSummary,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub command: String,
    pub config_hash: String,
    pub grid: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub selected_c2: f64,
    pub selected_mean_val_acc: f64,
}

/// `sweep-c2`: one train summary per grid point; the winner maximizes
/// mean validation accuracy, earliest grid point on ties.
pub fn cmd_sweep_c2(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    if cfg.c2_grid.is_empty() {
        return Err(Error::Config("sweep.c2_grid must be nonempty".into()));
    }
    if cfg.c2_grid.iter().any(|&c| c < 0.0) {
        return Err(Error::Config("sweep.c2_grid values must be nonnegative".into()));
    }
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut entries = Vec::new();
    let dataset = build_trial_data(cfg, 0)?.train.provenance;
    for &c2 in &cfg.c2_grid {
        let mut point_cfg = cfg.clone();
        point_cfg.c2 = c2;
        point_cfg.beta2_family_name = "power".to_string();
        let schedule = point_cfg.schedule()?;
        let runs = run_trials(&point_cfg, cfg.mode, &schedule)?;
        let point_dir = out.join(format!("c2-{c2}"));
        std::fs::create_dir_all(&point_dir)?;
        write_trial_outputs(&point_dir, cfg, &runs, &mut outputs, &format!("c2-{c2}/"))?;
        let summary = summarize_runs(&point_cfg, cfg.mode, &runs, dataset.clone());
        entries.push(SweepEntry {
            c2,
            mean_val_acc: summary.best_val_acc.mean,
            summary,
        });
    }
    let mut selected = 0usize;
    for (i, e) in entries.iter().enumerate() {
        if e.mean_val_acc > entries[selected].mean_val_acc {
            selected = i;
        }
    }
    let summary = SweepSummary {
        command: "sweep-c2".to_string(),
        config_hash: cfg.config_hash.clone(),
        grid: cfg.c2_grid.clone(),
        selected_c2: entries[selected].c2,
        selected_mean_val_acc: entries[selected].mean_val_acc,
        entries,
    };
    write_json(&out.join("sweep.json"), &summary)?;
    outputs.push("sweep.json".to_string());
    let manifest = RunManifest::new("sweep-c2", cfg, outputs);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct FamilyRow {
    pub family: String,
    pub best_val_acc: AccuracySummary,
    pub best_test_acc: AccuracySummary,
}

#[derive(Debug, Serialize)]
pub struct SchedulesSummary {
    pub command: String,
    pub config_hash: String,
    pub trials: usize,
    pub families: Vec<String>,
    pub rows: Vec<FamilyRow>,
}

const FAMILY_ORDER: [&str; 5] = ["constant", "linear", "power", "exponential", "step"];

/// `schedules`: one run-set per beta2 family (power always included) plus
/// a plot-ready long-format CSV of per-epoch trial means.
pub fn cmd_schedules(cfg: &ExperimentConfig) -> Result<SchedulesSummary> {
    for f in &cfg.families {
        if !FAMILY_ORDER.contains(&f.as_str()) {
            return Err(Error::Config(format!("unknown beta2 family `{f}`")));
        }
    }
    let families: Vec<String> = FAMILY_ORDER
        .iter()
        .filter(|name| **name == "power" || cfg.families.iter().any(|f| f == *name))
        .map(|s| s.to_string())
        .collect();

    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    let mut long_csv = String::from("family,epoch,metric,value\n");
    let eval = resolved_eval_for(cfg, cfg.mode);
    for family in &families {
        let schedule = apd_core::decomp::ScheduleSpec {
            c1: cfg.c1,
            beta2: cfg.beta2_family(family)?,
        };
        let runs = run_trials(cfg, cfg.mode, &schedule)?;
        let fam_dir = out.join(family);
        std::fs::create_dir_all(&fam_dir)?;
        write_trial_outputs(&fam_dir, cfg, &runs, &mut outputs, &format!("{family}/"))?;

        let best_test: Vec<f64> = runs
            .iter()
            .map(|r| best_test_acc(&r.result, eval))
            .collect();
        let best_val: Vec<f64> = runs.iter().map(|r| r.result.best_val_acc).collect();
        rows.push(FamilyRow {
            family: family.clone(),
            best_val_acc: AccuracySummary::from_accs(best_val),
            best_test_acc: AccuracySummary::from_accs(best_test),
        });

        for epoch_idx in 0..cfg.max_epochs {
            let mean_of = |f: &dyn Fn(&TrialRun) -> f64| {
                runs.iter().map(f).sum::<f64>() / runs.len() as f64
            };
            let row = |metric: &str, value: f64| {
                format!("{family},{},{metric},{}\n", epoch_idx + 1, fmt_sig(value))
            };
            long_csv.push_str(&row(
                "train_loss",
                mean_of(&|r| r.result.per_epoch[epoch_idx].train_loss),
            ));
            long_csv.push_str(&row(
                "val_acc",
                mean_of(&|r| match eval {
                    EvalParams::Sigma => r.result.per_epoch[epoch_idx].val_acc_sigma,
                    EvalParams::Full => r.result.per_epoch[epoch_idx].val_acc_full,
                }),
            ));
            long_csv.push_str(&row(
                "test_acc",
                mean_of(&|r| match eval {
                    EvalParams::Sigma => r.result.per_epoch[epoch_idx].test_acc_sigma,
                    EvalParams::Full => r.result.per_epoch[epoch_idx].test_acc_full,
                }),
            ));
            long_csv.push_str(&row(
                "beta2",
                mean_of(&|r| r.result.per_epoch[epoch_idx].beta2),
            ));
        }
    }
    write_atomic(&out.join("schedules_long.csv"), long_csv.as_bytes())?;
    outputs.push("schedules_long.csv".to_string());
    let summary = SchedulesSummary {
        command: "schedules".to_string(),
        config_hash: cfg.config_hash.clone(),
        trials: cfg.trials,
        families,
        rows,
    };
    write_json(&out.join("schedules.json"), &summary)?;
    outputs.push("schedules.json".to_string());
    let manifest = RunManifest::new("schedules", cfg, outputs);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}

/// `dump-features`: penultimate-layer activations of the test set under a
/// saved checkpoint, as `index,label,f0..f{h-1}`.
pub fn cmd_dump_features(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if cfg.dump_checkpoint.as_os_str().is_empty() {
        return Err(Error::Config(
            "dump-features requires dump.checkpoint to point at a checkpoint".into(),
        ));
    }
    let (arch, params) = load_checkpoint(&cfg.dump_checkpoint)?;
    let data = build_trial_data(cfg, 0)?;
    if arch.input_dim != data.test.dim() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} input features, test set has {}",
            arch.input_dim,
            data.test.dim()
        )));
    }
    let feats = hidden_features(&params, &data.test.features, arch.activation)?;
    let labels = data
        .test
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::Data("test set has no labels for the dump".into()))?;

    let width = feats.cols();
    let mut csv = String::from("index,label");
    for j in 0..width {
        let _ = write!(csv, ",f{j}");
    }
    csv.push('\n');
    for (i, &label) in labels.iter().enumerate() {
        let _ = write!(csv, "{i},{label}");
        for &v in feats.row(i) {
            let _ = write!(csv, ",{}", fmt_sig(v));
        }
        csv.push('\n');
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(&cfg.dump_output);
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}
