//! `apd` command line: experiment configuration plus six subcommands.
//!
//! Any `--<dotted.key> <value>` pair overrides the matching config key;
//! flags win over the `--config` file, which wins over defaults.

use apd_cli::commands::{
    cmd_ablate, cmd_dump_features, cmd_gen_noise, cmd_schedules, cmd_sweep_c2, cmd_train,
};
use apd_cli::{exit_code_for, ExperimentConfig, RawConfig, EXIT_AUDIT_FAILURE};
use apd_core::error::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
usage: apd <command> [options]

commands:
  gen-noise      write noisy-label sidecars and audit reports per trial
  train          run the configured training mode over all trial seeds
  ablate         compare standard / pd-only / gamma-only / full
  sweep-c2       grid-search the power-schedule exponent c2
  schedules      compare beta2 schedule families
  dump-features  dump penultimate-layer test features for a checkpoint

options:
  --config <path>   load key=value configuration from a file
  --seed <u64>      base seed (trial i runs with seed + i)
  --trials <n>      number of trials
  --out <dir>       output directory
  --quiet           suppress the report printed on success
  --help            this text
  --<key> <value>   override any config key, e.g. --noise.rate 0.2
";

struct Cli {
    command: String,
    config: ExperimentConfig,
    quiet: bool,
}

fn parse_args(args: &[String]) -> Result<Option<Cli>> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        print!("{USAGE}");
        return Ok(None);
    }
    let command = args[0].clone();
    let known = [
        "gen-noise",
        "train",
        "ablate",
        "sweep-c2",
        "schedules",
        "dump-features",
    ];
    if !known.contains(&command.as_str()) {
        return Err(Error::Config(format!(
            "unknown command `{command}` (try --help)"
        )));
    }

    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut quiet = false;
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        match arg.as_str() {
            "--quiet" => {
                quiet = true;
                i += 1;
            }
            "--help" | "-h" => {
                print!("{USAGE}");
                return Ok(None);
            }
            _ => {
                let key = arg.strip_prefix("--").ok_or_else(|| {
                    Error::Config(format!("expected a --flag, got `{arg}`"))
                })?;
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?
                    .clone();
                match key {
                    "config" => config_path = Some(PathBuf::from(&value)),
                    "seed" => overrides.push(("run.seed".into(), value)),
                    "trials" => overrides.push(("run.trials".into(), value)),
                    "out" => overrides.push(("run.out".into(), value)),
                    other => overrides.push((other.to_string(), value)),
                }
                i += 2;
            }
        }
    }

    let mut raw = RawConfig::default();
    if let Some(path) = config_path {
        raw.load_file(&path)?;
    }
    for (key, value) in &overrides {
        raw.set(key, value)?;
    }
    let config = ExperimentConfig::from_raw(&raw)?;
    Ok(Some(Cli {
        command,
        config,
        quiet,
    }))
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = &cli.config;
    match cli.command.as_str() {
        "gen-noise" => {
            let report = cmd_gen_noise(cfg)?;
            if !cli.quiet {
                for t in &report.trials {
                    println!(
                        "trial {} (seed {}): flip fraction {:.4}, {}",
                        t.trial,
                        t.seed,
                        t.flip_fraction,
                        if t.passed { "audit ok" } else { "AUDIT FAILED" }
                    );
                    if let Some(w) = &t.high_rate_warning {
                        eprintln!("warning: {w}");
                    }
                }
            }
            if !report.all_passed {
                eprintln!("structural audit failed; see audit.json");
                return Ok(EXIT_AUDIT_FAILURE);
            }
            Ok(0)
        }
        "train" => {
            let summary = cmd_train(cfg)?;
            if !cli.quiet {
                println!(
                    "mode {} ({} eval): best test acc {} over {} trials (best epochs {:?})",
                    summary.mode,
                    summary.eval,
                    summary.best_test_acc.display,
                    summary.trials,
                    summary.best_epochs
                );
            }
            Ok(0)
        }
        "ablate" => {
            let summary = cmd_ablate(cfg)?;
            if !cli.quiet {
                println!("mode        eval   best test acc");
                for row in &summary.rows {
                    println!(
                        "{:<11} {:<6} {}",
                        row.mode, row.eval, row.best_test_acc.display
                    );
                }
            }
            Ok(0)
        }
        "sweep-c2" => {
            let summary = cmd_sweep_c2(cfg)?;
            if !cli.quiet {
                for e in &summary.entries {
                    println!(
                        "c2 {:<5} val acc {:.4}  test acc {}",
                        e.c2, e.mean_val_acc, e.summary.best_test_acc.display
                    );
                }
                println!("selected c2 = {}", summary.selected_c2);
            }
            Ok(0)
        }
        "schedules" => {
            let summary = cmd_schedules(cfg)?;
            if !cli.quiet {
                println!("family       best test acc");
                for row in &summary.rows {
                    println!("{:<12} {}", row.family, row.best_test_acc.display);
                }
            }
            Ok(0)
        }
        "dump-features" => {
            let path = cmd_dump_features(cfg)?;
            if !cli.quiet {
                println!("features written to {}", path.display());
            }
            Ok(0)
        }
        _ => unreachable!("commands are checked in parse_args"),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(Some(cli)) => cli,
        Ok(None) => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
