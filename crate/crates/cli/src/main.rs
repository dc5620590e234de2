//! `vip` — train, evaluate, simulate, and analyze stream-adoption models
//! from the command line.

mod commands;
mod config;

use anyhow::{bail, Context, Result};
use std::path::PathBuf;

use config::Settings;

const USAGE: &str = "\
usage: vip <command> [--config <path>] [--key <value>]...

commands:
  train      fit a model and write a checkpoint plus its likelihood trace
  evaluate   cross-validated recall for the model and the baselines
  simulate   sample a synthetic dataset with its ground-truth factors
  analyze    per-item visibility/fitness/relevance decomposition

Every run needs `seed` and `out`, from the config file or flags
(`--seed 7 --out runs/demo`). Any config key may be overridden with
`--key value`; `--threads <n>` caps worker parallelism.";

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        None => bail!("missing command\n{USAGE}"),
        Some("help") | Some("--help") | Some("-h") => {
            println!("{USAGE}");
            return Ok(());
        }
        Some(_) => {}
    }
    let command = args[0].clone();

    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut rest = args[1..].iter();
    while let Some(flag) = rest.next() {
        let Some(key) = flag.strip_prefix("--") else {
            bail!("unexpected argument {flag:?}; flags look like --key value\n{USAGE}");
        };
        let Some(value) = rest.next() else {
            bail!("flag --{key} is missing a value");
        };
        if key == "config" {
            if config_path.is_some() {
                bail!("flag --config given twice");
            }
            config_path = Some(PathBuf::from(value));
        } else {
            overrides.push((key.to_string(), value.clone()));
        }
    }

    let mut settings = Settings::load(config_path.as_deref(), &overrides)?;
    match settings.parse_opt::<usize>("threads")? {
        Some(0) => bail!("config key threads: must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker thread pool")?
            .install(|| commands::run(&command, settings)),
        None => commands::run(&command, settings),
    }
}
