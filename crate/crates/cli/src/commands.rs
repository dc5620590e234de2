//! The four subcommands: train, evaluate, simulate, analyze.
//!
//! Each command is a pure function of its resolved configuration: all
//! randomness flows from the mandatory `seed` key through named sub-streams,
//! so identical configs produce byte-identical outputs. Every command writes
//! its outputs plus `config_resolved.cfg` into the `out` directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

use vip_core::data::{
    load_dir, load_events_with_rates, sample_negatives, save_dir, training_pairs,
    DEFAULT_POST_RATE_COEFF, DEFAULT_VISIT_RATE_COEFF,
};
use vip_core::distributions::SurfingParams;
use vip_core::eval::{cross_validate, decompose_items, EvalConfig};
use vip_core::model::{
    fit, load_checkpoint, save_checkpoint, FitMode, FitOptions, SweepOrder,
};
use vip_core::{AdoptionDataset, HyperParams, SyntheticConfig};

use crate::config::Settings;

fn out_dir(s: &mut Settings) -> Result<PathBuf> {
    let out = PathBuf::from(s.require_str("out")?);
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    Ok(out)
}

fn load_dataset(s: &mut Settings) -> Result<AdoptionDataset> {
    let data_dir = s.opt_str("data_dir");
    let events = s.opt_str("events");
    let meta = s.opt_str("meta");
    match (data_dir, events, meta) {
        (Some(dir), None, None) => Ok(load_dir(Path::new(&dir))?),
        (None, Some(events), Some(meta)) => {
            let post = s.parse_or("post_rate_coeff", DEFAULT_POST_RATE_COEFF)?;
            let visit = s.parse_or("visit_rate_coeff", DEFAULT_VISIT_RATE_COEFF)?;
            Ok(load_events_with_rates(
                Path::new(&events),
                Path::new(&meta),
                post,
                visit,
            )?)
        }
        (None, None, None) => bail!("no input data: set data_dir, or events and meta"),
        _ => bail!("set either data_dir or the events/meta pair, not a mix"),
    }
}

fn hyper_params(s: &mut Settings) -> Result<HyperParams> {
    let d = HyperParams::default();
    let hyper = HyperParams {
        k: s.parse_or("k", d.k)?,
        lambda_u: s.parse_or("lambda_u", d.lambda_u)?,
        lambda_theta: s.parse_or("lambda_theta", d.lambda_theta)?,
        lambda_eta: s.parse_or("lambda_eta", d.lambda_eta)?,
        conf_a: s.parse_or("conf_a", d.conf_a)?,
        conf_b: s.parse_or("conf_b", d.conf_b)?,
        conf_c: s.parse_or("conf_c", d.conf_c)?,
        l_max: s.parse_or("l_max", d.l_max)?,
        tol: s.parse_or("tol", d.tol)?,
        max_iters: s.parse_or("max_iters", d.max_iters)?,
    };
    hyper.validate()?;
    Ok(hyper)
}

fn surfing_params(s: &mut Settings) -> Result<SurfingParams> {
    let mu = s.parse_or("surf_mu", SurfingParams::DEFAULT_MU)?;
    let lambda = s.parse_or("surf_lambda", SurfingParams::DEFAULT_LAMBDA)?;
    Ok(SurfingParams::new(mu, lambda)?)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Floats in output tables use shortest round-trip scientific form, so the
/// tables are exact and byte-stable.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".to_string())
}

pub fn train(mut s: Settings) -> Result<()> {
    let out = out_dir(&mut s)?;
    let seed: u64 = s.require("seed")?;
    let data = load_dataset(&mut s)?;
    let hyper = hyper_params(&mut s)?;
    let model = s.str_or("model", "vip");
    let (mode, visibility) = match model.as_str() {
        "vip" => {
            let surfing = surfing_params(&mut s)?;
            (FitMode::Vip, data.visibilities(&surfing, hyper.l_max)?)
        }
        "pmf" => (FitMode::Pmf, DVector::from_element(data.n_users(), 1.0)),
        other => bail!("config key model: expected vip or pmf, got {other:?}"),
    };
    let sweep_order: SweepOrder = s
        .str_or("sweep_order", &SweepOrder::default().to_string())
        .parse()?;
    let negatives_per_user: usize = s.parse_or("negatives", 10)?;

    let negatives = sample_negatives(&data, negatives_per_user, seed);
    let pairs = training_pairs(&data, &negatives, &hyper)?;
    let opts = FitOptions { mode, seed, sweep_order, init: None };
    let report = fit(&pairs, &visibility, &hyper, &opts)?;

    save_checkpoint(&out.join("model.ckpt"), &report.state, &hyper)?;
    println!("wrote {}", out.join("model.ckpt").display());

    let mut trace = String::from("# sweep\tlog_likelihood\n");
    for (sweep, ll) in report.trace.iter().enumerate() {
        trace.push_str(&format!("{sweep}\t{}\n", num(*ll)));
    }
    write_file(&out.join("likelihood_trace.tsv"), &trace)?;
    s.write_resolved(&out, "train")?;

    let sweeps = report.trace.len() - 1;
    if report.converged {
        println!("converged after {sweeps} sweeps");
    } else {
        println!("stopped at the sweep limit ({sweeps} sweeps) before converging");
    }
    Ok(())
}

pub fn evaluate(mut s: Settings) -> Result<()> {
    if s.given("checkpoint") {
        bail!(
            "evaluate retrains inside cross-validation and cannot score a \
             fixed checkpoint; remove the checkpoint key (analyze consumes it)"
        );
    }
    let out = out_dir(&mut s)?;
    let seed: u64 = s.require("seed")?;
    let data = load_dataset(&mut s)?;
    let hyper = hyper_params(&mut s)?;
    let surfing = surfing_params(&mut s)?;
    let cfg = EvalConfig {
        models: s.list_or("models", "vip,relevance,fitness,random")?,
        x_values: s.list_or("x_values", "1,2,3,5,10,20")?,
        fold_count: s.parse_or("folds", 5)?,
        negatives_per_user: s.parse_or("negatives", 10)?,
        bucket_x: s.parse_or("bucket_x", 3)?,
        bucket_boundaries: s.list_or("buckets", "2,4,8,16,32,64,128,256")?,
        seed,
    };
    let reports = cross_validate(&data, &hyper, &surfing, &cfg)?;

    let mut recall = String::from("# model");
    for x in &cfg.x_values {
        recall.push_str(&format!("\trecall@{x}"));
    }
    recall.push('\n');
    for report in &reports {
        recall.push_str(report.model.name());
        for mean in &report.recall_at {
            recall.push_str(&format!("\t{}", num(*mean)));
        }
        recall.push('\n');
    }
    write_file(&out.join("recall.tsv"), &recall)?;

    let mut activity =
        String::from("# model\tbucket_lo\tbucket_hi\tcount\tmean_recall\tstddev_recall\n");
    for report in &reports {
        for b in &report.buckets {
            let hi = b.hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".into());
            activity.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                report.model.name(),
                b.lo,
                hi,
                b.count,
                opt_num(b.mean),
                opt_num(b.stddev),
            ));
        }
    }
    write_file(&out.join("activity.tsv"), &activity)?;

    let mut summary = String::from("# key\tvalue\n");
    summary.push_str(&format!("folds\t{}\n", cfg.fold_count));
    summary.push_str(&format!("seed\t{seed}\n"));
    summary.push_str(&format!("bucket_x\t{}\n", cfg.bucket_x));
    for report in &reports {
        let name = report.model.name();
        for (x, mean) in cfg.x_values.iter().zip(&report.recall_at) {
            summary.push_str(&format!("recall_at_{x}_{name}\t{}\n", num(*mean)));
        }
        summary.push_str(&format!("scored_samples_{name}\t{}\n", report.samples.len()));
        summary.push_str(&format!("skipped_users_{name}\t{}\n", report.skipped_users));
    }
    write_file(&out.join("eval_summary.tsv"), &summary)?;
    s.write_resolved(&out, "evaluate")?;
    Ok(())
}

pub fn simulate(mut s: Settings) -> Result<()> {
    let out = out_dir(&mut s)?;
    let seed: u64 = s.require("seed")?;
    let n_users: usize = s.require("n_users")?;
    let n_items: usize = s.require("n_items")?;
    let mut cfg = SyntheticConfig::new(n_users, n_items);
    cfg.seed = seed;
    cfg.hyper = hyper_params(&mut s)?;
    cfg.surfing = surfing_params(&mut s)?;
    cfg.rho_range = (s.parse_or("rho_lo", 0.0)?, s.parse_or("rho_hi", 100.0)?);
    cfg.exposure_density = s.parse_or("density", 0.1)?;
    cfg.adoption_cut = s.parse_or("cut", 0.5)?;
    cfg.noise_precision = s.parse_opt("noise_precision")?;

    let (data, truth) = vip_core::data::generate_synthetic(&cfg)?;
    let dataset_dir = out.join("dataset");
    save_dir(&data, &dataset_dir)?;
    println!("wrote {}", dataset_dir.display());
    save_checkpoint(&out.join("ground_truth.ckpt"), &truth, &cfg.hyper)?;
    println!("wrote {}", out.join("ground_truth.ckpt").display());
    s.write_resolved(&out, "simulate")?;

    let adoptions: usize = (0..data.n_users()).map(|i| data.adopted(i).len()).sum();
    let exposures: usize = (0..data.n_users()).map(|i| data.exposed(i).len()).sum();
    println!(
        "sampled {} users x {} items: {adoptions} adoptions inside {exposures} exposures",
        data.n_users(),
        data.n_items()
    );
    Ok(())
}

pub fn analyze(mut s: Settings) -> Result<()> {
    let out = out_dir(&mut s)?;
    let _seed: u64 = s.require("seed")?;
    let data = load_dataset(&mut s)?;
    let ckpt = PathBuf::from(s.require_str("checkpoint")?);
    let (state, _hyper) = load_checkpoint(&ckpt)?;
    let report = decompose_items(&state, &data)?;

    let mut table = String::from("# item_id\tcascade_size\tE_V\tE_I\tE_P\n");
    for d in &report.items {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            data.item_ids()[d.item],
            d.cascade_size,
            num(d.expected_visibility),
            num(d.expected_fitness),
            num(d.expected_relevance),
        ));
    }
    write_file(&out.join("decomposition.tsv"), &table)?;

    let mut summary = String::from("# key\tvalue\n");
    summary.push_str(&format!("adopted_items\t{}\n", report.items.len()));
    summary.push_str(&format!("total_items\t{}\n", data.n_items()));
    summary.push_str(&format!(
        "fitness_cascade_correlation\t{}\n",
        opt_num(report.fitness_cascade_correlation)
    ));
    write_file(&out.join("analysis_summary.tsv"), &summary)?;
    s.write_resolved(&out, "analyze")?;
    Ok(())
}

/// Dispatch by subcommand name; used by `main` after global flag handling.
pub fn run(command: &str, settings: Settings) -> Result<()> {
    match command {
        "train" => train(settings),
        "evaluate" => evaluate(settings),
        "simulate" => simulate(settings),
        "analyze" => analyze(settings),
        other => bail!("unknown command {other:?}; expected train, evaluate, simulate, or analyze"),
    }
}
