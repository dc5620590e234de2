//! Dataset ingestion, load-ratio estimation, negative sampling, and the
//! synthetic generator.

mod io;
mod synthetic;

pub use io::{load_dir, load_events, load_events_with_rates, save_dir};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::distributions::{visibility, DistError, LoadRatio, SurfingParams};
use crate::model::{HyperParams, ModelError, TrainingPairs};
use crate::rng::substream;
use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

/// Default rate of incoming posts per friend, per unit time.
pub const DEFAULT_POST_RATE_COEFF: f64 = 1.4;
/// Default rate of stream visits per authored post, per unit time.
pub const DEFAULT_VISIT_RATE_COEFF: f64 = 7.6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("events reference users missing from metadata: {}", users.join(", "))]
    UnknownUsers { users: Vec<String> },
    #[error("invalid rate coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
    #[error("synthetic generation produced no exposed pairs")]
    NoExposure,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("{path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One adoption record: the user reposted the item at `timestamp`, and
/// `exposed` says whether the item had appeared in the user's stream via a
/// friend beforehand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdoptionEvent {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: u64,
    pub exposed: bool,
}

/// Per-user stream statistics used to estimate information load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserMeta {
    pub user_id: String,
    pub n_friends: u64,
    pub n_posts: u64,
}

/// A load-ratio estimate plus whether the degenerate-user floor was applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    pub rho: LoadRatio,
    pub floored: bool,
}

/// Estimates a user's information load as the ratio of their incoming post
/// rate to their visit rate. A user with zero recorded posts still visits at
/// some minimal rate, so `n_posts` is floored at one (and flagged).
pub fn estimate_rho(
    meta: &UserMeta,
    post_rate_coeff: f64,
    visit_rate_coeff: f64,
) -> Result<RhoEstimate, DataError> {
    for (name, value) in [
        ("post_rate_coeff", post_rate_coeff),
        ("visit_rate_coeff", visit_rate_coeff),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(DataError::InvalidCoefficient(format!(
                "{name} must be positive and finite, got {value}"
            )));
        }
    }
    let floored = meta.n_posts == 0;
    let posts = if floored { 1 } else { meta.n_posts };
    let rho = (post_rate_coeff * meta.n_friends as f64) / (visit_rate_coeff * posts as f64);
    let rho = LoadRatio::new(rho).map_err(DataError::Dist)?;
    Ok(RhoEstimate { rho, floored })
}

/// An immutable adoption dataset: contiguous user/item index spaces, sparse
/// per-user adoption and exposure lists, user metadata, and load ratios.
///
/// Ids are held in lexicographic order, so positions double as stable
/// indices. The exposure list records pairs seen through a friend; an
/// adoption may lie outside it (the user found the item elsewhere).
#[derive(Debug, Clone)]
pub struct AdoptionDataset {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    adopted: Vec<Vec<usize>>,
    exposed: Vec<Vec<usize>>,
    meta: Vec<UserMeta>,
    rho: Vec<LoadRatio>,
    duplicate_events: usize,
    rho_floor_count: usize,
}

impl AdoptionDataset {
    pub fn from_parts(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        adopted: Vec<Vec<usize>>,
        exposed: Vec<Vec<usize>>,
        meta: Vec<UserMeta>,
        rho: Vec<LoadRatio>,
    ) -> Result<Self, DataError> {
        let n = user_ids.len();
        let m = item_ids.len();
        if adopted.len() != n || exposed.len() != n || meta.len() != n || rho.len() != n {
            return Err(DataError::Invalid(format!(
                "per-user fields cover {}/{}/{}/{} users, expected {n}",
                adopted.len(),
                exposed.len(),
                meta.len(),
                rho.len()
            )));
        }
        for (name, ids) in [("user", &user_ids), ("item", &item_ids)] {
            if ids.iter().any(|id| id.is_empty()) {
                return Err(DataError::Invalid(format!("empty {name} id")));
            }
            if !ids.windows(2).all(|w| w[0] < w[1]) {
                return Err(DataError::Invalid(format!(
                    "{name} ids must be unique and lexicographically sorted"
                )));
            }
        }
        for i in 0..n {
            if meta[i].user_id != user_ids[i] {
                return Err(DataError::Invalid(format!(
                    "metadata row {i} is for {:?}, expected {:?}",
                    meta[i].user_id, user_ids[i]
                )));
            }
            for (kind, list) in [("adopted", &adopted[i]), ("exposed", &exposed[i])] {
                if !list.windows(2).all(|w| w[0] < w[1]) {
                    return Err(DataError::Invalid(format!(
                        "{kind} items of user {i} must be strictly increasing"
                    )));
                }
                if list.last().is_some_and(|&j| j >= m) {
                    return Err(DataError::Invalid(format!(
                        "{kind} item index out of bounds for user {i} ({m} items)"
                    )));
                }
            }
        }
        Ok(AdoptionDataset {
            user_ids,
            item_ids,
            adopted,
            exposed,
            meta,
            rho,
            duplicate_events: 0,
            rho_floor_count: 0,
        })
    }

    pub(crate) fn with_counters(mut self, duplicate_events: usize, rho_floor_count: usize) -> Self {
        self.duplicate_events = duplicate_events;
        self.rho_floor_count = rho_floor_count;
        self
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn adopted(&self, i: usize) -> &[usize] {
        &self.adopted[i]
    }

    pub fn exposed(&self, i: usize) -> &[usize] {
        &self.exposed[i]
    }

    pub fn all_adopted(&self) -> &[Vec<usize>] {
        &self.adopted
    }

    pub fn all_exposed(&self) -> &[Vec<usize>] {
        &self.exposed
    }

    pub fn meta(&self, i: usize) -> &UserMeta {
        &self.meta[i]
    }

    pub fn rho(&self, i: usize) -> LoadRatio {
        self.rho[i]
    }

    pub fn rhos(&self) -> &[LoadRatio] {
        &self.rho
    }

    /// Events that repeated an already-recorded (user, item) pair during
    /// ingestion; zero for datasets built any other way.
    pub fn duplicate_events(&self) -> usize {
        self.duplicate_events
    }

    /// Users whose zero post count was floored to one while estimating rho.
    pub fn rho_floor_count(&self) -> usize {
        self.rho_floor_count
    }

    /// Computes every user's visibility from their load ratio.
    pub fn visibilities(
        &self,
        surfing: &SurfingParams,
        l_max: u64,
    ) -> Result<DVector<f64>, DistError> {
        let mut v = DVector::zeros(self.n_users());
        for (i, &rho) in self.rho.iter().enumerate() {
            v[i] = visibility(rho, surfing, l_max)?;
        }
        Ok(v)
    }
}

/// Merges two strictly increasing index lists.
pub(crate) fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => {
                out.push(a[ia]);
                ia += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[ib]);
                ib += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[ia]);
                ia += 1;
                ib += 1;
            }
        }
    }
    out.extend_from_slice(&a[ia..]);
    out.extend_from_slice(&b[ib..]);
    out
}

/// Samples, for every user, up to `per_user` items the user neither adopted
/// nor saw, uniformly without replacement from the "negatives" sub-stream of
/// `seed`. Users with fewer unseen items than requested get them all.
pub fn sample_negatives(
    data: &AdoptionDataset,
    per_user: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let m = data.n_items();
    (0..data.n_users())
        .map(|i| {
            let seen = union_sorted(data.adopted(i), data.exposed(i));
            let mut pool: Vec<usize> = (0..m).filter(|j| seen.binary_search(j).is_err()).collect();
            let take = per_user.min(pool.len());
            if take < pool.len() {
                let mut rng = substream(seed, "negatives", i as u64);
                for t in 0..take {
                    let pick = t + rng.random_range(0..pool.len() - t);
                    pool.swap(t, pick);
                }
                pool.truncate(take);
                pool.sort_unstable();
            }
            pool
        })
        .collect()
}

/// Assembles the training set for a dataset: adopted pairs at full
/// confidence (whether or not the exposure mask covers them), exposed
/// non-adopted pairs at reduced confidence, and the provided sampled
/// negatives at the lowest tier.
pub fn training_pairs(
    data: &AdoptionDataset,
    negatives: &[Vec<usize>],
    hyper: &HyperParams,
) -> Result<TrainingPairs, ModelError> {
    let merged: Vec<Vec<usize>> = (0..data.n_users())
        .map(|i| union_sorted(data.adopted(i), data.exposed(i)))
        .collect();
    TrainingPairs::build(
        data.n_items(),
        data.all_adopted(),
        &merged,
        negatives,
        hyper,
    )
}
