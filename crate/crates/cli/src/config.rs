//! Flat key-value experiment configuration with dotted section keys.
//!
//! Resolution order: built-in defaults, then the `--config` file, then
//! `--key value` command-line overrides (flags win). The canonical
//! serialization (sorted keys) feeds the config hash, so semantically
//! identical configs hash identically regardless of field order. The
//! output directory is excluded from the hash: where results land is not
//! part of what was run.

use apd_core::decomp::{AblationMode, Beta2Family, GammaInit, OptimizerConfig, ScheduleSpec};
use apd_core::error::{Error, Result};
use apd_core::mlp::{Activation, MlpArchitecture};
use apd_core::noise::{ClassFlip, NoiseKind, NoiseSpec};
use apd_core::train::EvalParams;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const DEFAULTS: &[(&str, &str)] = &[
    ("dataset.kind", "blobs"),
    ("dataset.n", "10000"),
    ("dataset.d", "20"),
    ("dataset.k", "10"),
    ("dataset.cluster_std", "0.14"),
    ("dataset.test_n", "2000"),
    ("dataset.idx_dir", ""),
    ("dataset.subset", "0"),
    ("noise.kind", "symmetric"),
    ("noise.rate", "0.4"),
    ("noise.class_map", "2>7,5<>6,3>8"),
    ("noise.instance_std", "0.1"),
    ("model.hidden_dims", "64,64"),
    ("model.activation", "relu"),
    ("train.mode", "full"),
    ("train.max_epochs", "60"),
    ("train.batch_size", "64"),
    ("train.gamma_init", "zeros"),
    ("train.eval_params", "auto"),
    ("train.val_fraction", "0.1"),
    ("opt.lr", "0.01"),
    ("opt.momentum", "0.9"),
    ("opt.weight_decay", "0.001"),
    ("opt.lr_decay_epochs", "24,48"),
    ("opt.lr_decay_factor", "0.1"),
    ("opt.norm_epsilon", "1e-12"),
    ("schedule.c1", "0.0001"),
    ("schedule.beta2_family", "power"),
    ("schedule.c2", "0.6"),
    ("schedule.constant_level", "1.0"),
    ("schedule.linear_start", "1.0"),
    ("schedule.linear_end", "0.0"),
    ("schedule.exp_factor", "0.9"),
    ("schedule.step_factor", "0.3"),
    ("schedule.step_interval", "5"),
    ("run.seed", "1"),
    ("run.trials", "5"),
    ("run.out", "out"),
    ("sweep.c2_grid", "0.2,0.6,1.0,1.5,2.0"),
    ("schedules.families", "constant,linear,power,exponential,step"),
    ("dump.checkpoint", ""),
    ("dump.output", "features.csv"),
];

/// The resolved key-value map before typing.
#[derive(Debug, Clone)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        let map = DEFAULTS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        RawConfig { map }
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.map.contains_key(key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.map
            .get(key)
            .unwrap_or_else(|| panic!("missing default for `{key}`"))
    }

    /// Parse a `key=value` config file. `#` starts a comment; blank lines
    /// and whitespace around keys/values are ignored.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key=value`, got `{line}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sorted `key=value` lines; `run.out` is excluded so the hash names
    /// the experiment, not its destination.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            if k == "run.out" {
                continue;
            }
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }
}

fn parse<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<T> {
    raw.get(key)
        .parse()
        .map_err(|_| Error::Config(format!("could not parse `{key}={}`", raw.get(key))))
}

fn parse_list<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Vec<T>> {
    let text = raw.get(key).trim();
    if text.is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::Config(format!("could not parse `{key}` entry `{part}`")))
        })
        .collect()
}

/// Parse `2>7,5<>6,3>8` into directed/bidirectional flip rules.
pub fn parse_class_map(text: &str) -> Result<Vec<ClassFlip>> {
    let mut flips = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (src, dst, bidirectional) = if let Some((a, b)) = part.split_once("<>") {
            (a, b, true)
        } else if let Some((a, b)) = part.split_once('>') {
            (a, b, false)
        } else {
            return Err(Error::Config(format!(
                "class map entry `{part}` must look like `2>7` or `5<>6`"
            )));
        };
        let source = src.trim().parse().map_err(|_| {
            Error::Config(format!("bad class map source in `{part}`"))
        })?;
        let target = dst.trim().parse().map_err(|_| {
            Error::Config(format!("bad class map target in `{part}`"))
        })?;
        flips.push(ClassFlip {
            source,
            target,
            bidirectional,
        });
    }
    Ok(flips)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Idx,
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub cluster_std: f64,
    pub test_n: usize,
    pub idx_dir: PathBuf,
    pub subset: usize,
}

/// Everything a command needs, typed and validated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub noise_kind: Option<NoiseKind>,
    pub noise_rate: f64,
    pub class_map: Vec<ClassFlip>,
    pub instance_std: f64,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub mode: AblationMode,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub gamma_init: GammaInit,
    pub eval_params: Option<EvalParams>,
    pub val_fraction: f64,
    pub optimizer: OptimizerConfig,
    pub c1: f64,
    pub beta2_family_name: String,
    pub c2: f64,
    pub constant_level: f64,
    pub linear_start: f64,
    pub linear_end: f64,
    pub exp_factor: f64,
    pub step_factor: f64,
    pub step_interval: usize,
    pub seed: u64,
    pub trials: usize,
    pub out_dir: PathBuf,
    pub c2_grid: Vec<f64>,
    pub families: Vec<String>,
    pub dump_checkpoint: PathBuf,
    pub dump_output: String,
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        let kind = match raw.get("dataset.kind") {
            "blobs" => DatasetKind::Blobs,
            "idx" => DatasetKind::Idx,
            other => {
                return Err(Error::Config(format!("unknown dataset kind `{other}`")));
            }
        };
        let dataset = DatasetConfig {
            kind,
            n: parse(raw, "dataset.n")?,
            d: parse(raw, "dataset.d")?,
            k: parse(raw, "dataset.k")?,
            cluster_std: parse(raw, "dataset.cluster_std")?,
            test_n: parse(raw, "dataset.test_n")?,
            idx_dir: PathBuf::from(raw.get("dataset.idx_dir")),
            subset: parse(raw, "dataset.subset")?,
        };
        let noise_kind = match raw.get("noise.kind") {
            "none" => None,
            "symmetric" => Some(NoiseKind::Symmetric),
            "asymmetric" => Some(NoiseKind::Asymmetric),
            "pairflip" => Some(NoiseKind::Pairflip),
            "instance" => Some(NoiseKind::Instance),
            other => return Err(Error::Config(format!("unknown noise kind `{other}`"))),
        };
        let activation = match raw.get("model.activation") {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => return Err(Error::Config(format!("unknown activation `{other}`"))),
        };
        let gamma_init = {
            let text = raw.get("train.gamma_init");
            if text == "zeros" {
                GammaInit::Zeros
            } else if let Some(scale) = text.strip_prefix("random:") {
                GammaInit::Random {
                    scale: scale.parse().map_err(|_| {
                        Error::Config(format!("bad gamma init scale in `{text}`"))
                    })?,
                }
            } else {
                return Err(Error::Config(format!(
                    "gamma init must be `zeros` or `random:<scale>`, got `{text}`"
                )));
            }
        };
        let eval_params = match raw.get("train.eval_params") {
            "auto" => None,
            "sigma" => Some(EvalParams::Sigma),
            "full" => Some(EvalParams::Full),
            other => {
                return Err(Error::Config(format!(
                    "eval params must be auto|sigma|full, got `{other}`"
                )));
            }
        };
        let optimizer = OptimizerConfig {
            learning_rate: parse(raw, "opt.lr")?,
            momentum: parse(raw, "opt.momentum")?,
            weight_decay: parse(raw, "opt.weight_decay")?,
            lr_decay_epochs: parse_list(raw, "opt.lr_decay_epochs")?,
            lr_decay_factor: parse(raw, "opt.lr_decay_factor")?,
            norm_epsilon: parse(raw, "opt.norm_epsilon")?,
        };
        optimizer.validate()?;
        let trials: usize = parse(raw, "run.trials")?;
        if trials < 1 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        let cfg = ExperimentConfig {
            dataset,
            noise_kind,
            noise_rate: parse(raw, "noise.rate")?,
            class_map: parse_class_map(raw.get("noise.class_map"))?,
            instance_std: parse(raw, "noise.instance_std")?,
            hidden_dims: parse_list(raw, "model.hidden_dims")?,
            activation,
            mode: parse(raw, "train.mode")?,
            max_epochs: parse(raw, "train.max_epochs")?,
            batch_size: parse(raw, "train.batch_size")?,
            gamma_init,
            eval_params,
            val_fraction: parse(raw, "train.val_fraction")?,
            optimizer,
            c1: parse(raw, "schedule.c1")?,
            beta2_family_name: raw.get("schedule.beta2_family").to_string(),
            c2: parse(raw, "schedule.c2")?,
            constant_level: parse(raw, "schedule.constant_level")?,
            linear_start: parse(raw, "schedule.linear_start")?,
            linear_end: parse(raw, "schedule.linear_end")?,
            exp_factor: parse(raw, "schedule.exp_factor")?,
            step_factor: parse(raw, "schedule.step_factor")?,
            step_interval: parse(raw, "schedule.step_interval")?,
            seed: parse(raw, "run.seed")?,
            trials,
            out_dir: PathBuf::from(raw.get("run.out")),
            c2_grid: parse_list(raw, "sweep.c2_grid")?,
            families: parse_list(raw, "schedules.families")?,
            dump_checkpoint: PathBuf::from(raw.get("dump.checkpoint")),
            dump_output: raw.get("dump.output").to_string(),
            config_hash: raw.hash(),
        };
        cfg.schedule()?.validate()?;
        Ok(cfg)
    }

    pub fn arch(&self) -> MlpArchitecture {
        MlpArchitecture {
            input_dim: self.dataset.d,
            hidden_dims: self.hidden_dims.clone(),
            num_classes: self.dataset.k,
            activation: self.activation,
        }
    }

    pub fn beta2_family(&self, name: &str) -> Result<Beta2Family> {
        Ok(match name {
            "power" => Beta2Family::Power { c2: self.c2 },
            "constant" => Beta2Family::Constant {
                level: self.constant_level,
            },
            "linear" => Beta2Family::Linear {
                start: self.linear_start,
                end: self.linear_end,
                end_epoch: self.max_epochs,
            },
            "exponential" => Beta2Family::Exponential {
                factor: self.exp_factor,
            },
            "step" => Beta2Family::Step {
                factor: self.step_factor,
                interval: self.step_interval,
            },
            other => {
                return Err(Error::Config(format!("unknown beta2 family `{other}`")));
            }
        })
    }

    pub fn schedule(&self) -> Result<ScheduleSpec> {
        Ok(ScheduleSpec {
            c1: self.c1,
            beta2: self.beta2_family(&self.beta2_family_name)?,
        })
    }

    pub fn noise_spec(&self) -> Result<Option<NoiseSpec>> {
        let Some(kind) = self.noise_kind else {
            return Ok(None);
        };
        let spec = NoiseSpec {
            kind,
            rate: self.noise_rate,
            class_map: (kind == NoiseKind::Asymmetric).then(|| self.class_map.clone()),
            num_classes: self.dataset.k,
            instance_std: self.instance_std,
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}
