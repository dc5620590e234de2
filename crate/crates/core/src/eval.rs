//! Recall measurement, per-user cross-validation, activity-bucketed recall,
//! and the per-item decomposition of adoption into visibility, fitness, and
//! relevance contributions.
//!
//! The central entry point is [`cross_validate`]: it splits every user's
//! adoptions into folds, retrains on each fold's complement, ranks each
//! user's held-out stream with the main model and the requested baselines,
//! and aggregates recall@X per user and per activity bucket.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::baselines::{self, rank_desc, BaselineKind};
use crate::data::{sample_negatives, union_sorted, AdoptionDataset, DataError};
use crate::distributions::{DistError, SurfingParams};
use crate::model::{fit, FitMode, FitOptions, HyperParams, ModelError, ModelState, TrainingPairs};
use crate::rng::{derive_seed, substream};

use rand::seq::SliceRandom;

/// Activity buckets used when no explicit boundaries are configured:
/// powers of two over training-adoption counts.
pub const DEFAULT_BUCKET_BOUNDARIES: [usize; 8] = [2, 4, 8, 16, 32, 64, 128, 256];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(
        "fold {fold} of {fold_count} holds no held-out adoptions; \
         the dataset is too sparse for this split"
    )]
    DegenerateFold { fold: usize, fold_count: usize },
    #[error(
        "model was trained for {state_users} users x {state_items} items \
         but the dataset covers {data_users} users x {data_items} items"
    )]
    ShapeMismatch {
        state_users: usize,
        state_items: usize,
        data_users: usize,
        data_items: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Which recommender an [`EvalReport`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Vip,
    Baseline(BaselineKind),
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [
        ModelTag::Vip,
        ModelTag::Baseline(BaselineKind::Relevance),
        ModelTag::Baseline(BaselineKind::Fitness),
        ModelTag::Baseline(BaselineKind::Random),
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelTag::Vip => "vip",
            ModelTag::Baseline(kind) => kind.name(),
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelTag {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.trim() {
            "vip" => Ok(ModelTag::Vip),
            other => other.parse::<BaselineKind>().map(ModelTag::Baseline).map_err(|_| {
                EvalError::InvalidConfig(format!(
                    "unknown model {other:?}; expected one of vip, random, fitness, relevance"
                ))
            }),
        }
    }
}

/// Per-user partition of adopted items into test folds.
///
/// Each user's adoption list is shuffled on its own seeded sub-stream and
/// dealt round-robin, so the folds are disjoint, their union is exactly the
/// user's adoptions, and their sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    fold_count: usize,
    seed: u64,
    /// `folds[user][fold]` — held-out items, sorted ascending.
    folds: Vec<Vec<Vec<usize>>>,
}

impl FoldSplit {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_users(&self) -> usize {
        self.folds.len()
    }

    /// Items of `user` held out in `fold`, sorted ascending.
    pub fn test_items(&self, user: usize, fold: usize) -> &[usize] {
        &self.folds[user][fold]
    }
}

/// Assign each user's adopted items to `fold_count` folds by seeded shuffle
/// and round-robin deal.
pub fn split_folds(
    data: &AdoptionDataset,
    fold_count: usize,
    seed: u64,
) -> Result<FoldSplit, EvalError> {
    if fold_count < 2 {
        return Err(EvalError::InvalidConfig(format!(
            "fold count must be at least 2, got {fold_count}"
        )));
    }
    let folds = (0..data.n_users())
        .map(|i| {
            let mut order = data.adopted(i).to_vec();
            order.shuffle(&mut substream(seed, "folds", i as u64));
            let mut per_fold = vec![Vec::new(); fold_count];
            for (slot, item) in order.into_iter().enumerate() {
                per_fold[slot % fold_count].push(item);
            }
            for fold in &mut per_fold {
                fold.sort_unstable();
            }
            per_fold
        })
        .collect();
    Ok(FoldSplit { fold_count, seed, folds })
}

/// Fraction of `adopted` found in the first `x` entries of `ranked`.
///
/// `adopted` must be sorted ascending and non-empty; `x` must be positive.
/// When the ranking is shorter than `x` the full ranking is used as-is.
pub fn recall_at_x(ranked: &[usize], adopted: &[usize], x: usize) -> f64 {
    assert!(x >= 1, "recall cutoff must be positive");
    assert!(!adopted.is_empty(), "recall is undefined without adoptions");
    debug_assert!(adopted.windows(2).all(|w| w[0] < w[1]));
    let hits = ranked
        .iter()
        .take(x)
        .filter(|j| adopted.binary_search(j).is_ok())
        .count();
    hits as f64 / adopted.len() as f64
}

/// One scored (user, fold) evaluation: how many adoptions the user had left
/// in training, and the recall achieved on the held-out items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallSample {
    pub user: usize,
    pub fold: usize,
    /// Adoptions of this user remaining in the training split.
    pub train_count: usize,
    /// Recall at the bucket cutoff ([`EvalConfig::bucket_x`]).
    pub recall: f64,
}

/// Recall statistics for one contiguous range of training-adoption counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityBucket {
    /// Inclusive lower edge of the bucket's training-adoption range.
    pub lo: usize,
    /// Exclusive upper edge; `None` for the unbounded last bucket.
    pub hi: Option<usize>,
    /// Number of (user, fold) samples that landed here.
    pub count: usize,
    /// Mean recall; `None` marks an empty bucket rather than dropping it.
    pub mean: Option<f64>,
    /// Sample standard deviation (n-1); needs at least two samples.
    pub stddev: Option<f64>,
}

/// Group samples by training-adoption count and report recall mean and
/// spread per group.
///
/// `boundaries` are strictly increasing cut points: the buckets are
/// `[0, b_0), [b_0, b_1), ..., [b_last, inf)`. Empty buckets stay in the
/// output with `mean: None`.
pub fn activity_buckets(
    samples: &[RecallSample],
    boundaries: &[usize],
) -> Result<Vec<ActivityBucket>, EvalError> {
    if !boundaries.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::InvalidConfig(format!(
            "bucket boundaries must be strictly increasing, got {boundaries:?}"
        )));
    }
    let mut grouped: Vec<Vec<f64>> = vec![Vec::new(); boundaries.len() + 1];
    for sample in samples {
        let slot = boundaries.partition_point(|&b| b <= sample.train_count);
        grouped[slot].push(sample.recall);
    }
    Ok(grouped
        .into_iter()
        .enumerate()
        .map(|(slot, recalls)| {
            let lo = if slot == 0 { 0 } else { boundaries[slot - 1] };
            let hi = boundaries.get(slot).copied();
            let count = recalls.len();
            let mean = (count > 0).then(|| recalls.iter().sum::<f64>() / count as f64);
            let stddev = (count > 1).then(|| {
                let m = mean.unwrap();
                let ss: f64 = recalls.iter().map(|r| (r - m) * (r - m)).sum();
                (ss / (count - 1) as f64).sqrt()
            });
            ActivityBucket { lo, hi, count, mean, stddev }
        })
        .collect())
}

/// What [`cross_validate`] runs and measures.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Recommenders to score, in report order. No duplicates.
    pub models: Vec<ModelTag>,
    /// Recall cutoffs, strictly increasing.
    pub x_values: Vec<usize>,
    pub fold_count: usize,
    /// Unexposed negatives sampled per user for the training confidence
    /// floor.
    pub negatives_per_user: usize,
    /// Cutoff used for the per-sample recall behind the activity buckets.
    pub bucket_x: usize,
    /// Cut points for [`activity_buckets`].
    pub bucket_boundaries: Vec<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            models: ModelTag::ALL.to_vec(),
            x_values: vec![1, 2, 3, 5, 10, 20],
            fold_count: 5,
            negatives_per_user: 10,
            bucket_x: 3,
            bucket_boundaries: DEFAULT_BUCKET_BOUNDARIES.to_vec(),
            seed: 0,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<(), EvalError> {
        let err = |msg: String| Err(EvalError::InvalidConfig(msg));
        if self.models.is_empty() {
            return err("no models requested".into());
        }
        for (i, tag) in self.models.iter().enumerate() {
            if self.models[..i].contains(tag) {
                return err(format!("model {tag} requested twice"));
            }
        }
        if self.x_values.is_empty() {
            return err("no recall cutoffs requested".into());
        }
        if self.x_values[0] == 0 || !self.x_values.windows(2).all(|w| w[0] < w[1]) {
            return err(format!(
                "recall cutoffs must be positive and strictly increasing, got {:?}",
                self.x_values
            ));
        }
        if self.fold_count < 2 {
            return err(format!("fold count must be at least 2, got {}", self.fold_count));
        }
        if self.bucket_x == 0 {
            return err("bucket cutoff must be positive".into());
        }
        if !self.bucket_boundaries.windows(2).all(|w| w[0] < w[1]) {
            return err(format!(
                "bucket boundaries must be strictly increasing, got {:?}",
                self.bucket_boundaries
            ));
        }
        Ok(())
    }
}

/// Cross-validated recall for one recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: ModelTag,
    /// The cutoffs the columns below refer to.
    pub x_values: Vec<usize>,
    /// `recall_at[xi]` — mean over scored users of the per-user fold means.
    pub recall_at: Vec<f64>,
    /// `per_user[xi][i]` — user i's recall at `x_values[xi]`, averaged over
    /// the folds that held out at least one of their adoptions; `None` if no
    /// fold did.
    pub per_user: Vec<Vec<Option<f64>>>,
    /// One entry per scored (user, fold) pair, at the bucket cutoff.
    pub samples: Vec<RecallSample>,
    pub buckets: Vec<ActivityBucket>,
    /// Users that never had a held-out adoption and so joined no average.
    pub skipped_users: usize,
}

/// Ranking pool for one user at test time: the held-out adoptions plus the
/// exposed items the user never adopted. Training adoptions stay out.
fn test_candidates(test: &[usize], exposed: &[usize], adopted: &[usize]) -> Vec<usize> {
    union_sorted(test, &sorted_difference(exposed, adopted))
}

/// Elements of sorted list `a` not present in sorted list `b`.
fn sorted_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len());
    let mut ib = 0;
    for &x in a {
        while ib < b.len() && b[ib] < x {
            ib += 1;
        }
        if ib == b.len() || b[ib] != x {
            out.push(x);
        }
    }
    out
}

/// Everything measured for one model inside one fold.
struct FoldRow {
    user: usize,
    train_count: usize,
    bucket_recall: f64,
    recall_at: Vec<f64>,
}

fn eval_fold(
    data: &AdoptionDataset,
    hyper: &HyperParams,
    visibility: &DVector<f64>,
    negatives: &[Vec<usize>],
    split: &FoldSplit,
    cfg: &EvalConfig,
    fold: usize,
) -> Result<Vec<Vec<FoldRow>>, EvalError> {
    let n = data.n_users();

    // Held-out pairs vanish from the training data entirely: they are
    // neither adoptions nor exposures there, exactly as unseen pairs.
    let mut train_adopted = Vec::with_capacity(n);
    let mut train_streams = Vec::with_capacity(n);
    for i in 0..n {
        let test = split.test_items(i, fold);
        let adopted = sorted_difference(data.adopted(i), test);
        let exposed = sorted_difference(data.exposed(i), test);
        train_streams.push(union_sorted(&adopted, &exposed));
        train_adopted.push(adopted);
    }
    let pairs = TrainingPairs::build(
        data.n_items(),
        &train_adopted,
        &train_streams,
        negatives,
        hyper,
    )?;

    let needs_vip = cfg
        .models
        .iter()
        .any(|t| matches!(t, ModelTag::Vip | ModelTag::Baseline(BaselineKind::Fitness)));
    let vip_state = if needs_vip {
        let opts = FitOptions {
            seed: derive_seed(cfg.seed, "fold", fold as u64),
            ..FitOptions::default()
        };
        Some(fit(&pairs, visibility, hyper, &opts)?.state)
    } else {
        None
    };
    let pmf_state = if cfg.models.contains(&ModelTag::Baseline(BaselineKind::Relevance)) {
        let opts = FitOptions {
            mode: FitMode::Pmf,
            seed: derive_seed(cfg.seed, "fold-pmf", fold as u64),
            ..FitOptions::default()
        };
        let unit = DVector::from_element(n, 1.0);
        Some(fit(&pairs, &unit, hyper, &opts)?.state)
    } else {
        None
    };

    let mut rows: Vec<Vec<FoldRow>> = cfg.models.iter().map(|_| Vec::new()).collect();
    for i in 0..n {
        let test = split.test_items(i, fold);
        if test.is_empty() {
            continue;
        }
        let pool = test_candidates(test, data.exposed(i), data.adopted(i));
        for (mi, tag) in cfg.models.iter().enumerate() {
            let ranked = match tag {
                ModelTag::Vip => {
                    let state = vip_state.as_ref().expect("fitted above");
                    rank_desc(&pool, |j| state.predict(i, j))
                }
                ModelTag::Baseline(BaselineKind::Fitness) => {
                    baselines::score_fitness(vip_state.as_ref().expect("fitted above"), &pool)
                }
                ModelTag::Baseline(BaselineKind::Relevance) => baselines::score_relevance(
                    pmf_state.as_ref().expect("fitted above"),
                    i,
                    &pool,
                ),
                ModelTag::Baseline(BaselineKind::Random) => baselines::score_random(
                    &pool,
                    derive_seed(cfg.seed, "random-eval", (fold * n + i) as u64),
                ),
            };
            rows[mi].push(FoldRow {
                user: i,
                train_count: train_adopted[i].len(),
                bucket_recall: recall_at_x(&ranked, test, cfg.bucket_x),
                recall_at: cfg
                    .x_values
                    .iter()
                    .map(|&x| recall_at_x(&ranked, test, x))
                    .collect(),
            });
        }
    }
    Ok(rows)
}

/// Five-fold (by default) cross-validated recall for the requested models.
///
/// Training happens per fold on the fold's complement; every model inside a
/// fold scores the same candidate pools. Folds run in parallel, yet the
/// whole procedure is deterministic in `cfg.seed`: every random choice
/// (fold assignment, negative sampling, initialization, random baseline)
/// lives on its own derived sub-stream.
pub fn cross_validate(
    data: &AdoptionDataset,
    hyper: &HyperParams,
    surfing: &SurfingParams,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>, EvalError> {
    cfg.validate()?;
    hyper.validate().map_err(EvalError::Model)?;

    let split = split_folds(data, cfg.fold_count, cfg.seed)?;
    for fold in 0..cfg.fold_count {
        let held_out: usize = (0..data.n_users())
            .map(|i| split.test_items(i, fold).len())
            .sum();
        if held_out == 0 {
            return Err(EvalError::DegenerateFold { fold, fold_count: cfg.fold_count });
        }
    }

    let visibility = data.visibilities(surfing, hyper.l_max)?;
    let negatives = sample_negatives(data, cfg.negatives_per_user, cfg.seed);

    let per_fold: Vec<Vec<Vec<FoldRow>>> = (0..cfg.fold_count)
        .into_par_iter()
        .map(|fold| eval_fold(data, hyper, &visibility, &negatives, &split, cfg, fold))
        .collect::<Result<_, _>>()?;

    let n = data.n_users();
    let reports = cfg
        .models
        .iter()
        .enumerate()
        .map(|(mi, &tag)| {
            let mut sums = vec![vec![0.0; n]; cfg.x_values.len()];
            let mut counts = vec![0usize; n];
            let mut samples = Vec::new();
            for (fold, rows) in per_fold.iter().enumerate() {
                for row in &rows[mi] {
                    counts[row.user] += 1;
                    for (xi, r) in row.recall_at.iter().enumerate() {
                        sums[xi][row.user] += r;
                    }
                    samples.push(RecallSample {
                        user: row.user,
                        fold,
                        train_count: row.train_count,
                        recall: row.bucket_recall,
                    });
                }
            }
            let per_user: Vec<Vec<Option<f64>>> = sums
                .iter()
                .map(|col| {
                    (0..n)
                        .map(|i| (counts[i] > 0).then(|| col[i] / counts[i] as f64))
                        .collect()
                })
                .collect();
            let scored = counts.iter().filter(|&&c| c > 0).count();
            let recall_at = per_user
                .iter()
                .map(|col| col.iter().flatten().sum::<f64>() / scored as f64)
                .collect();
            let buckets = activity_buckets(&samples, &cfg.bucket_boundaries)?;
            Ok(EvalReport {
                model: tag,
                x_values: cfg.x_values.clone(),
                recall_at,
                per_user,
                samples,
                buckets,
                skipped_users: n - scored,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(reports)
}

/// How one item's adoptions decompose over its adopters.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemDecomposition {
    pub item: usize,
    /// Number of users who adopted the item.
    pub cascade_size: usize,
    /// Mean visibility `v_i` over adopters.
    pub expected_visibility: f64,
    /// Item fitness; constant across adopters, reported per item.
    pub expected_fitness: f64,
    /// Mean topic relevance `u_i' theta_j` over adopters.
    pub expected_relevance: f64,
}

/// [`decompose_items`] output: one row per adopted item, plus the
/// correlation between fitness and cascade size across those items.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub items: Vec<ItemDecomposition>,
    /// Pearson correlation of fitness with cascade size; `None` when fewer
    /// than two adopted items exist or one side is constant.
    pub fitness_cascade_correlation: Option<f64>,
}

/// Per-item adopter averages of visibility, fitness, and relevance.
///
/// Items nobody adopted are omitted. Errors if the model and dataset
/// dimensions disagree.
pub fn decompose_items(
    state: &ModelState,
    data: &AdoptionDataset,
) -> Result<DecompositionReport, EvalError> {
    if state.n_users() != data.n_users() || state.n_items() != data.n_items() {
        return Err(EvalError::ShapeMismatch {
            state_users: state.n_users(),
            state_items: state.n_items(),
            data_users: data.n_users(),
            data_items: data.n_items(),
        });
    }
    let m = data.n_items();
    let mut counts = vec![0usize; m];
    let mut sum_v = vec![0.0; m];
    let mut sum_rel = vec![0.0; m];
    for i in 0..data.n_users() {
        for &j in data.adopted(i) {
            counts[j] += 1;
            sum_v[j] += state.v[i];
            sum_rel[j] += state.relevance(i, j);
        }
    }
    let items: Vec<ItemDecomposition> = (0..m)
        .filter(|&j| counts[j] > 0)
        .map(|j| ItemDecomposition {
            item: j,
            cascade_size: counts[j],
            expected_visibility: sum_v[j] / counts[j] as f64,
            expected_fitness: state.eta[j],
            expected_relevance: sum_rel[j] / counts[j] as f64,
        })
        .collect();
    let fitness: Vec<f64> = items.iter().map(|d| d.expected_fitness).collect();
    let cascade: Vec<f64> = items.iter().map(|d| d.cascade_size as f64).collect();
    Ok(DecompositionReport {
        items,
        fitness_cascade_correlation: pearson(&fitness, &cascade),
    })
}

/// Pearson correlation; `None` for fewer than two points, zero variance, or
/// a non-finite result.
fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = sxy / (sxx * syy).sqrt();
    r.is_finite().then_some(r)
}
