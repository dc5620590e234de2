//! Acceptance gate for the whole workspace: eight independent checks that
//! exercise the distribution layer, the optimizer, the evaluation pipeline,
//! and the CLI end to end. Each check is one test that prints a single
//! `PASS criterion N` line on success (visible under `-- --nocapture`), so
//! the suite doubles as a release checklist. Tolerances and runtime budgets
//! are asserted, not just printed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use vip_core::data::{generate_synthetic, sample_negatives, training_pairs, SyntheticConfig};
use vip_core::distributions::{ig_density, ig_upper_cdf, visibility, LoadRatio, SurfingParams};
use vip_core::eval::{
    activity_buckets, cross_validate, decompose_items, EvalConfig, EvalReport, ModelTag,
    RecallSample,
};
use vip_core::model::{
    fit, log_likelihood, update_fitness, update_item, update_user, FitMode, FitOptions,
    HyperParams, ModelState, TrainingPairs,
};
use vip_core::rng::substream;
use vip_core::BaselineKind;

// ---------------------------------------------------------------------------
// Criterion 1: the closed-form upper-tail CDF agrees with adaptive quadrature
// of the density, and visibility behaves like a probability of being seen.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_visibility_correctness() {
    let start = Instant::now();

    // 50 (mu, lambda, L) triples: both parameters cycle over {1, 7, 14, 50}
    // while L sweeps a log grid across [0.1, 500].
    let grid = [1.0, 7.0, 14.0, 50.0];
    let mut worst: f64 = 0.0;
    for idx in 0..50 {
        let mu = grid[idx % grid.len()];
        let lambda = grid[(idx / grid.len()) % grid.len()];
        let l = 0.1 * (500.0f64 / 0.1).powf(idx as f64 / 49.0);
        let params = SurfingParams::new(mu, lambda).unwrap();
        let exact = ig_upper_cdf(&params, l).unwrap();
        let quad = vip_testkit::integrate_to_inf(
            &|x| ig_density(&params, x).expect("density on the positive axis"),
            l,
            1e-10,
        );
        worst = worst.max((exact - quad).abs());
        assert!(
            (exact - quad).abs() < 1e-6,
            "upper-tail CDF off by {:e} at mu={mu} lambda={lambda} L={l}",
            (exact - quad).abs()
        );
    }

    // Visibility must be 1 with an empty stream and never increase with load.
    let params = SurfingParams::new(14.0, 14.0).unwrap();
    let l_max = 100_000;
    let rhos = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 1e3, 1e4];
    let vs: Vec<f64> = rhos
        .iter()
        .map(|&r| visibility(LoadRatio::new(r).unwrap(), &params, l_max).unwrap())
        .collect();
    assert_eq!(vs[0], 1.0, "visibility at zero load must be exactly one");
    for w in vs.windows(2) {
        assert!(
            w[1] <= w[0],
            "visibility increased with load: {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(
        vs.iter().all(|&v| (0.0..=1.0).contains(&v)),
        "visibility escaped [0, 1]: {vs:?}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "budget exceeded: {elapsed:?}");
    println!(
        "PASS criterion 1: upper-tail CDF within {worst:.2e} of quadrature (tol 1e-6) \
         on 50 grid points; visibility monotone over 9 load ratios with v(0)=1 \
         [{elapsed:.2?}]"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: every block update lands on a stationary point of the
// objective, measured with finite differences on random instances.
// ---------------------------------------------------------------------------

fn random_instance(n: usize, m: usize, k: usize, seed: u64) -> (TrainingPairs, DVector<f64>, HyperParams) {
    let mut rng = substream(seed, "accept-instance", 0);
    let mut adopted = vec![Vec::new(); n];
    let mut exposed = vec![Vec::new(); n];
    let mut negatives = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..m {
            let roll: f64 = rng.random();
            if roll < 0.15 {
                adopted[i].push(j);
                exposed[i].push(j);
            } else if roll < 0.40 {
                exposed[i].push(j);
            } else if roll < 0.55 {
                negatives[i].push(j);
            }
        }
    }
    // Pin one adoption so the training set is never empty.
    adopted[0].retain(|&j| j != 0);
    exposed[0].retain(|&j| j != 0);
    negatives[0].retain(|&j| j != 0);
    exposed[0].insert(0, 0);
    adopted[0].insert(0, 0);
    let h = HyperParams {
        k,
        lambda_u: 0.1,
        lambda_theta: 0.1,
        lambda_eta: 1.0,
        ..HyperParams::default()
    };
    let pairs = TrainingPairs::build(m, &adopted, &exposed, &negatives, &h).unwrap();
    let vis = DVector::from_iterator(n, (0..n).map(|_| 0.2 + 0.8 * rng.random::<f64>()));
    (pairs, vis, h)
}

fn random_state(n: usize, m: usize, k: usize, v: &DVector<f64>, seed: u64) -> ModelState {
    let mut rng = substream(seed, "accept-state", 0);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>() - 0.5).collect() };
    ModelState::new(
        DMatrix::from_column_slice(k, n, &draw(k * n)),
        DMatrix::from_column_slice(k, m, &draw(k * m)),
        DVector::from_vec(draw(m)),
        v.clone(),
    )
    .unwrap()
}

fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn criterion_2_updates_are_stationary() {
    let start = Instant::now();
    let (n, m, k) = (12, 12, 3);
    let mut worst: f64 = 0.0;

    for inst in 0..20u64 {
        let (pairs, vis, h) = random_instance(n, m, k, 1000 + inst);
        let state = random_state(n, m, k, &vis, 2000 + inst);

        // User block.
        let i = inst as usize % n;
        let mut f_user = |x: &[f64]| {
            let mut s = state.clone();
            s.u.column_mut(i).copy_from_slice(x);
            log_likelihood(&s, &pairs, &h)
        };
        let x0: Vec<f64> = state.u.column(i).iter().copied().collect();
        let g_pre = vip_testkit::fd_gradient(&mut f_user, &x0, 1e-5);
        let new_u = update_user(&state, &pairs, &h, i);
        let g_post = vip_testkit::fd_gradient(&mut f_user, new_u.as_slice(), 1e-5);
        assert!(grad_norm(&g_pre) > 1e-3, "user start point already stationary");
        let rel = grad_norm(&g_post) / grad_norm(&g_pre);
        assert!(rel < 1e-4, "user update left gradient at rel {rel:e} (instance {inst})");
        worst = worst.max(rel);

        // Item block.
        let j = (inst as usize * 5 + 3) % m;
        let mut f_item = |x: &[f64]| {
            let mut s = state.clone();
            s.theta.column_mut(j).copy_from_slice(x);
            log_likelihood(&s, &pairs, &h)
        };
        let x0: Vec<f64> = state.theta.column(j).iter().copied().collect();
        let g_pre = vip_testkit::fd_gradient(&mut f_item, &x0, 1e-5);
        let new_theta = update_item(&state, &pairs, &h, j);
        let g_post = vip_testkit::fd_gradient(&mut f_item, new_theta.as_slice(), 1e-5);
        assert!(grad_norm(&g_pre) > 1e-3, "item start point already stationary");
        let rel = grad_norm(&g_post) / grad_norm(&g_pre);
        assert!(rel < 1e-4, "item update left gradient at rel {rel:e} (instance {inst})");
        worst = worst.max(rel);

        // Fitness block (scalar).
        let j = (inst as usize * 7 + 1) % m;
        let mut f_eta = |x: &[f64]| {
            let mut s = state.clone();
            s.eta[j] = x[0];
            log_likelihood(&s, &pairs, &h)
        };
        let g_pre = vip_testkit::fd_gradient(&mut f_eta, &[state.eta[j]], 1e-5);
        let new_eta = update_fitness(&state, &pairs, &h, j);
        let g_post = vip_testkit::fd_gradient(&mut f_eta, &[new_eta], 1e-5);
        assert!(grad_norm(&g_pre) > 1e-3, "fitness start point already stationary");
        let rel = grad_norm(&g_post) / grad_norm(&g_pre);
        assert!(rel < 1e-4, "fitness update left gradient at rel {rel:e} (instance {inst})");
        worst = worst.max(rel);
    }

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "budget exceeded: {elapsed:?}");
    println!(
        "PASS criterion 2: all 60 block updates over 20 random instances zero the \
         finite-difference gradient (worst rel {worst:.2e}, tol 1e-4) [{elapsed:.2?}]"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: coordinate ascent never decreases the objective on a
// mid-sized training run and terminates by tolerance or sweep cap.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_training_likelihood_is_monotone() {
    let start = Instant::now();

    let mut gen = SyntheticConfig::new(200, 500);
    gen.seed = 31;
    gen.hyper.k = 5;
    gen.hyper.lambda_u = 1.0;
    gen.hyper.lambda_theta = 1.0;
    gen.hyper.lambda_eta = 1.0;
    gen.rho_range = (0.5, 30.0);
    gen.exposure_density = 0.08;
    gen.adoption_cut = 1.0;
    gen.noise_precision = Some(25.0);
    let (data, _) = generate_synthetic(&gen).unwrap();

    let hyper = HyperParams {
        k: 5,
        lambda_eta: 1.0,
        ..HyperParams::default()
    };
    let negatives = sample_negatives(&data, 10, 77);
    let pairs = training_pairs(&data, &negatives, &hyper).unwrap();
    let vis = data
        .visibilities(&SurfingParams::default(), hyper.l_max)
        .unwrap();
    let report = fit(&pairs, &vis, &hyper, &FitOptions { seed: 77, ..FitOptions::default() }).unwrap();

    assert!(report.trace.len() >= 2, "training must run at least one sweep");
    for w in report.trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-8 * w[0].abs(),
            "log-likelihood decreased: {:e} -> {:e}",
            w[0],
            w[1]
        );
    }
    let sweeps = report.trace.len() - 1;
    assert!(
        report.converged || sweeps == hyper.max_iters,
        "training stopped after {sweeps} sweeps without converging"
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "budget exceeded: {elapsed:?}");
    println!(
        "PASS criterion 3: log-likelihood non-decreasing over {sweeps} sweeps on a \
         200x500 run (converged: {}) [{elapsed:.2?}]",
        report.converged
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: with unit visibility and the fitness block disabled, the
// trainer reproduces an independently coded confidence-weighted matrix
// factorization: same init, same sweeps, plain-loop normal equations.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_reduces_to_weighted_matrix_factorization() {
    let start = Instant::now();
    let (n, m, k) = (20, 20, 3);
    let (pairs, _, h) = random_instance(n, m, k, 4004);
    let h = HyperParams { tol: 1e-12, max_iters: 300, ..h };
    let ones = DVector::from_element(n, 1.0);

    let mut rng = substream(12, "accept-init", 0);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>() - 0.5).collect() };
    let u0 = DMatrix::from_column_slice(k, n, &draw(k * n));
    let theta0 = DMatrix::from_column_slice(k, m, &draw(k * m));

    let opts = FitOptions {
        mode: FitMode::Pmf,
        init: Some((u0.clone(), theta0.clone())),
        ..FitOptions::default()
    };
    let report = fit(&pairs, &ones, &h, &opts).unwrap();
    let sweeps = report.trace.len() - 1;
    assert!(
        report.state.eta.iter().all(|&e| e == 0.0),
        "the reduction must leave fitness at exactly zero"
    );

    // Reference solver: ridge-regularized alternating least squares with
    // explicit normal equations and Gauss-Jordan elimination, run for the
    // same number of sweeps from the same starting point. Users first, then
    // items against the updated user profiles.
    let ridge = |lambda: f64,
                 obs: &[vip_core::model::Observation],
                 basis: &DMatrix<f64>|
     -> Vec<f64> {
        let mut a = vec![vec![0.0; k]; k];
        for (d, row) in a.iter_mut().enumerate() {
            row[d] = lambda;
        }
        let mut b = vec![0.0; k];
        for o in obs {
            let col = basis.column(o.idx);
            for r in 0..k {
                for c in 0..k {
                    a[r][c] += o.confidence * col[r] * col[c];
                }
                b[r] += o.confidence * o.response * col[r];
            }
        }
        vip_testkit::solve_dense(&a, &b)
    };

    let (mut u, mut theta) = (u0, theta0);
    for _ in 0..sweeps {
        for i in 0..n {
            let sol = ridge(h.lambda_u, pairs.user_observations(i), &theta);
            u.column_mut(i).copy_from_slice(&sol);
        }
        for j in 0..m {
            let sol = ridge(h.lambda_theta, pairs.item_observations(j), &u);
            theta.column_mut(j).copy_from_slice(&sol);
        }
    }

    let rel_u = (&report.state.u - &u).norm() / u.norm();
    let rel_theta = (&report.state.theta - &theta).norm() / theta.norm();
    assert!(rel_u < 1e-6, "user profiles diverge from the reference: rel {rel_u:e}");
    assert!(
        rel_theta < 1e-6,
        "item profiles diverge from the reference: rel {rel_theta:e}"
    );

    let elapsed = start.elapsed();
    println!(
        "PASS criterion 4: trainer matches an independent weighted-factorization \
         solver after {sweeps} sweeps (rel err u {rel_u:.2e}, theta {rel_theta:.2e}, \
         tol 1e-6) [{elapsed:.2?}]"
    );
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6 share one expensive fixture: five-fold cross-validation
// of all four models on three generator seeds with heterogeneous load.
// ---------------------------------------------------------------------------

const CV_SEEDS: [u64; 3] = [101, 202, 303];

struct CvFixture {
    /// One report set per generator seed, in `EvalConfig::models` order.
    runs: Vec<Vec<EvalReport>>,
    elapsed: Duration,
}

static CV: LazyLock<CvFixture> = LazyLock::new(|| {
    let start = Instant::now();
    let runs = CV_SEEDS
        .iter()
        .map(|&seed| {
            let mut gen = SyntheticConfig::new(1000, 300);
            gen.seed = seed;
            // A pure-topic world: planted fitness is negligible and the topic
            // dimension is high enough that item norms concentrate, so global
            // popularity cannot carry a user with no history — ranking quality
            // hinges on learning per-user profiles.
            gen.hyper.k = 10;
            gen.hyper.lambda_u = 1.0;
            gen.hyper.lambda_theta = 1.0;
            gen.hyper.lambda_eta = 100.0;
            gen.rho_range = (0.0, 100.0);
            gen.exposure_density = 0.2;
            gen.adoption_cut = 4.5;
            gen.noise_precision = Some(25.0);
            let (data, _) = generate_synthetic(&gen).expect("synthetic generator");

            // Strong shrinkage on the profile blocks: a user's taste estimate
            // has to be earned from adoptions (weight conf_a each) rather than
            // scraped off low-confidence non-adoption zeros.
            let hyper = HyperParams {
                k: 10,
                lambda_u: 1.0,
                lambda_theta: 1.0,
                lambda_eta: 0.3,
                conf_a: 4.0,
                conf_b: 0.03,
                conf_c: 0.01,
                ..HyperParams::default()
            };
            let cfg = EvalConfig {
                models: vec![
                    ModelTag::Vip,
                    ModelTag::Baseline(BaselineKind::Relevance),
                    ModelTag::Baseline(BaselineKind::Fitness),
                    ModelTag::Baseline(BaselineKind::Random),
                ],
                x_values: vec![3],
                fold_count: 5,
                negatives_per_user: 10,
                bucket_x: 3,
                bucket_boundaries: vec![1, 2, 4, 8, 16, 32],
                seed,
            };
            cross_validate(&data, &hyper, &SurfingParams::default(), &cfg)
                .expect("cross-validation")
        })
        .collect();
    CvFixture { runs, elapsed: start.elapsed() }
});

fn report_for(run: &[EvalReport], tag: ModelTag) -> &EvalReport {
    run.iter().find(|r| r.model == tag).expect("model missing from report set")
}

fn mean_recall3(tag: ModelTag) -> f64 {
    let runs = &CV.runs;
    runs.iter().map(|run| report_for(run, tag).recall_at[0]).sum::<f64>() / runs.len() as f64
}

fn pooled_samples(tag: ModelTag) -> Vec<RecallSample> {
    CV.runs
        .iter()
        .flat_map(|run| report_for(run, tag).samples.iter().cloned())
        .collect()
}

#[test]
fn criterion_5_model_ordering_on_synthetic_streams() {
    let vip = mean_recall3(ModelTag::Vip);
    let relevance = mean_recall3(ModelTag::Baseline(BaselineKind::Relevance));
    let fitness = mean_recall3(ModelTag::Baseline(BaselineKind::Fitness));
    let random = mean_recall3(ModelTag::Baseline(BaselineKind::Random));

    assert!(
        vip > relevance,
        "expected the full model to beat the relevance baseline: {vip:.4} vs {relevance:.4}"
    );
    assert!(
        relevance > random,
        "expected the relevance baseline to beat random: {relevance:.4} vs {random:.4}"
    );
    assert!(
        vip >= 2.0 * random,
        "expected at least a 2x margin over random: {vip:.4} vs {random:.4}"
    );
    assert!(
        CV.elapsed < Duration::from_secs(600),
        "budget exceeded: {:?}",
        CV.elapsed
    );
    println!(
        "PASS criterion 5: mean recall@3 over 3 seeds — full {vip:.4} > relevance \
         {relevance:.4} > random {random:.4} (fitness {fitness:.4}); margin over random \
         {:.2}x >= 2x [cv fixture {:.2?}]",
        vip / random,
        CV.elapsed
    );
}

#[test]
fn criterion_6_recall_trend_with_user_activity() {
    // Pool the per-(user, fold) samples from all three seeds and rank-correlate
    // recall@3 against the user's training-adoption count. The full model must
    // improve with activity; random ranking must show no material trend.
    let trend = |tag: ModelTag| -> f64 {
        let samples = pooled_samples(tag);
        let xs: Vec<f64> = samples.iter().map(|s| s.train_count as f64).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.recall).collect();
        vip_testkit::spearman(&xs, &ys).expect("non-degenerate samples")
    };

    let vip_trend = trend(ModelTag::Vip);
    let random_trend = trend(ModelTag::Baseline(BaselineKind::Random));

    // Bucketed means, printed for inspection alongside the coefficients.
    let table = |tag: ModelTag| -> String {
        let samples = pooled_samples(tag);
        let buckets = activity_buckets(&samples, &[1, 2, 4, 8, 16, 32]).unwrap();
        buckets
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| {
                let hi = b.hi.map_or("inf".to_string(), |h| h.to_string());
                format!("[{},{}) {:.3}x{}", b.lo, hi, b.mean.unwrap_or(f64::NAN), b.count)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    assert!(
        vip_trend > 0.0,
        "expected recall to rise with activity for the full model, got rank corr {vip_trend:.3}\n\
         buckets: {}",
        table(ModelTag::Vip)
    );
    assert!(
        random_trend.abs() <= 0.3,
        "expected no activity trend for random ranking, got rank corr {random_trend:.3}\n\
         buckets: {}",
        table(ModelTag::Baseline(BaselineKind::Random))
    );
    println!(
        "PASS criterion 6: activity rank correlation — full model {vip_trend:+.3} > 0, \
         random {random_trend:+.3} within +/-0.3\n  full model buckets:  {}\n  random buckets:      {}",
        table(ModelTag::Vip),
        table(ModelTag::Baseline(BaselineKind::Random))
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: on a fitness-driven regime, learned per-item fitness must
// correlate positively with cascade size in the decomposition report.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_fitness_tracks_cascade_size() {
    let start = Instant::now();

    let mut gen = SyntheticConfig::new(300, 120);
    gen.seed = 707;
    gen.hyper.k = 3;
    // Tight topic priors and loose fitness: adoption is driven by per-item
    // fitness, so cascades should sort by it.
    gen.hyper.lambda_u = 4.0;
    gen.hyper.lambda_theta = 4.0;
    gen.hyper.lambda_eta = 0.1;
    // The wide load range spreads visibility, so cascades grow smoothly with
    // fitness instead of saturating at the exposure count.
    gen.rho_range = (0.5, 50.0);
    gen.exposure_density = 0.3;
    gen.adoption_cut = 2.0;
    gen.noise_precision = Some(25.0);
    let (data, _) = generate_synthetic(&gen).unwrap();

    // Shrink the topic blocks harder than fitness so popularity has to land
    // in the fitness term rather than leaking into a topic direction.
    let hyper = HyperParams {
        k: 3,
        lambda_u: 0.1,
        lambda_theta: 0.1,
        lambda_eta: 0.01,
        conf_a: 4.0,
        ..HyperParams::default()
    };
    let negatives = sample_negatives(&data, 10, 707);
    let pairs = training_pairs(&data, &negatives, &hyper).unwrap();
    let vis = data
        .visibilities(&SurfingParams::default(), hyper.l_max)
        .unwrap();
    let report = fit(&pairs, &vis, &hyper, &FitOptions { seed: 707, ..FitOptions::default() }).unwrap();

    let decomp = decompose_items(&report.state, &data).unwrap();
    let r = decomp
        .fitness_cascade_correlation
        .expect("regime produces many adopted items");
    assert!(
        decomp.items.len() > 20,
        "too few adopted items ({}) for a meaningful correlation",
        decomp.items.len()
    );
    assert!(r > 0.0, "expected positive fitness-cascade correlation, got {r:.3}");

    let elapsed = start.elapsed();
    println!(
        "PASS criterion 7: fitness-cascade Pearson correlation {r:+.3} > 0 across {} \
         adopted items [{elapsed:.2?}]",
        decomp.items.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: every CLI command is byte-identical across two runs with the
// same config and seed, and training output does not depend on thread count.
// ---------------------------------------------------------------------------

fn vip(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_vip"))
        .args(args)
        .output()
        .expect("failed to spawn the vip binary");
    assert!(
        out.status.success(),
        "vip {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// All regular files under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("read output directory") {
            let path = entry.expect("directory entry").path();
            if path.is_dir() {
                walk(root, &path, files);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).expect("read output file"));
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(dir, dir, &mut files);
    files
}

fn assert_identical(label: &str, first: &BTreeMap<String, Vec<u8>>, second: &BTreeMap<String, Vec<u8>>) {
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "{label}: the two runs wrote different file sets"
    );
    for (name, bytes) in first {
        assert_eq!(bytes, &second[name], "{label}: {name} differs between runs");
    }
}

#[test]
fn criterion_8_cli_runs_are_byte_identical() {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let path = |name: &str| root.path().join(name).to_string_lossy().into_owned();

    let sim_out = path("sim");
    let dataset = format!("{sim_out}/dataset");
    let train_out = path("train");
    let eval_out = path("eval");
    let analyze_out = path("analyze");
    let ckpt = format!("{train_out}/model.ckpt");

    let simulate: Vec<String> = [
        "simulate", "--out", &sim_out, "--seed", "17", "--n_users", "60", "--n_items", "30",
        "--k", "3", "--density", "0.4", "--rho_lo", "0.5", "--rho_hi", "20", "--cut", "0.5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let train: Vec<String> = [
        "train", "--data_dir", &dataset, "--out", &train_out, "--seed", "5", "--k", "3",
        "--lambda_eta", "0.3", "--max_iters", "60",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let evaluate: Vec<String> = [
        "evaluate", "--data_dir", &dataset, "--out", &eval_out, "--seed", "5", "--k", "3",
        "--lambda_eta", "0.3", "--folds", "3", "--x_values", "1,3", "--negatives", "5",
        "--max_iters", "40",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let analyze: Vec<String> = [
        "analyze", "--data_dir", &dataset, "--checkpoint", &ckpt, "--out", &analyze_out,
        "--seed", "5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let commands: [(&str, &Vec<String>, &str); 4] = [
        ("simulate", &simulate, &sim_out),
        ("train", &train, &train_out),
        ("evaluate", &evaluate, &eval_out),
        ("analyze", &analyze, &analyze_out),
    ];

    for (label, args, out_dir) in commands {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let first_run = vip(&argv);
        let first = snapshot(Path::new(out_dir));
        let second_run = vip(&argv);
        let second = snapshot(Path::new(out_dir));
        assert_identical(label, &first, &second);
        assert_eq!(
            first_run.stdout, second_run.stdout,
            "{label}: stdout differs between identical runs"
        );
        assert!(!first.is_empty(), "{label}: no output files written");
    }

    // Thread count must not change numeric results; only the resolved-config
    // echo records it, so compare everything else.
    let t1 = path("train-t1");
    let t4 = path("train-t4");
    for (dir, threads) in [(&t1, "1"), (&t4, "4")] {
        let argv: Vec<String> = train
            .iter()
            .map(|a| if a == &train_out { dir.clone() } else { a.clone() })
            .chain(["--threads".to_string(), threads.to_string()])
            .collect();
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        vip(&argv);
    }
    for name in ["model.ckpt", "likelihood_trace.tsv"] {
        let a = fs::read(Path::new(&t1).join(name)).unwrap();
        let b = fs::read(Path::new(&t4).join(name)).unwrap();
        assert_eq!(a, b, "{name} depends on thread count");
    }

    let elapsed = start.elapsed();
    println!(
        "PASS criterion 8: simulate/train/evaluate/analyze byte-identical across \
         repeated runs; training output invariant to --threads 1 vs 4 [{elapsed:.2?}]"
    );
}
