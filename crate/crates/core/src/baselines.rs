//! Reference recommenders the main model is measured against.
//!
//! All three rank only the items a user was actually exposed to: a ranking
//! is always a permutation of the stream it was given.
//!
//! * [`score_random`] — a seed-deterministic uniform shuffle of the stream.
//! * [`score_fitness`] — stream sorted by learned item fitness, ignoring the
//!   user entirely.
//! * [`score_relevance`] — stream sorted by the user-item topic affinity of
//!   a factorization trained with [`FitMode::Pmf`](crate::model::FitMode)
//!   and unit visibility.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::model::ModelState;
use crate::rng;

/// Name of one of the comparison recommenders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Random,
    Fitness,
    Relevance,
}

/// Error from parsing a baseline name.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown baseline {0:?}; expected one of random, fitness, relevance")]
pub struct UnknownBaseline(pub String);

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Random,
        BaselineKind::Fitness,
        BaselineKind::Relevance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Fitness => "fitness",
            BaselineKind::Relevance => "relevance",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = UnknownBaseline;

    fn from_str(s: &str) -> Result<Self, UnknownBaseline> {
        match s.trim() {
            "random" => Ok(BaselineKind::Random),
            "fitness" => Ok(BaselineKind::Fitness),
            "relevance" => Ok(BaselineKind::Relevance),
            other => Err(UnknownBaseline(other.to_string())),
        }
    }
}

/// Rank `stream_items` by `score` descending, ties broken by ascending item
/// index. Each score is computed once; NaN orders below every finite value.
pub(crate) fn rank_desc(stream_items: &[usize], score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = stream_items.iter().map(|&j| (score(j), j)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, j)| j).collect()
}

/// Uniform random permutation of the stream, deterministic in `seed`.
pub fn score_random(stream_items: &[usize], seed: u64) -> Vec<usize> {
    let mut ranked = stream_items.to_vec();
    ranked.shuffle(&mut rng::substream(seed, "random-baseline", 0));
    ranked
}

/// Stream sorted by item fitness descending. The ranking depends only on the
/// stream, never on which user is asking.
///
/// Panics if a stream item is out of range for `state`.
pub fn score_fitness(state: &ModelState, stream_items: &[usize]) -> Vec<usize> {
    for &j in stream_items {
        assert!(j < state.n_items(), "stream item {j} out of range");
    }
    rank_desc(stream_items, |j| state.eta[j])
}

/// Stream sorted by topic affinity `u_i' theta_j` descending for user `i`.
///
/// `pmf_state` is expected to come from a [`FitMode::Pmf`](crate::model::FitMode)
/// fit (fitness frozen at zero, unit visibility), so the affinity is the
/// model's whole prediction.
///
/// Panics if `i` or a stream item is out of range for `pmf_state`.
pub fn score_relevance(pmf_state: &ModelState, i: usize, stream_items: &[usize]) -> Vec<usize> {
    assert!(i < pmf_state.n_users(), "user {i} out of range");
    for &j in stream_items {
        assert!(j < pmf_state.n_items(), "stream item {j} out of range");
    }
    rank_desc(stream_items, |j| pmf_state.relevance(i, j))
}
