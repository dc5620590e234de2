//! Model state, hyperparameters, and MAP coordinate-ascent training.
//!
//! The model scores a user/item pair as `v_i * (u_i' theta_j + eta_j)`:
//! a per-user visibility factor (precomputed from the load distribution and
//! frozen during training) times the sum of a latent-topic relevance term and
//! a per-item fitness term. Training maximizes the complete log posterior by
//! exact coordinate maximization over user profiles, item profiles, and item
//! fitness; each block update is a ridge regression, so every sweep is
//! monotone in the objective.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{
    fit, log_likelihood, update_fitness, update_item, update_user, Observation, TrainingPairs,
};

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid training pairs for user {user}: {message}")]
    InvalidPairs { user: usize, message: String },
    #[error("training set has no observations")]
    EmptyTrainingSet,
    #[error("non-finite values in the {block} block during sweep {sweep}")]
    NonFinite { block: &'static str, sweep: usize },
    #[error("invalid model state: {0}")]
    InvalidState(String),
    #[error("invalid sweep order: {0}")]
    InvalidSweepOrder(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Model hyperparameters.
///
/// The `lambda_*` values are precision ratios (observation precision over
/// prior precision), so larger values shrink the corresponding block harder.
/// The three confidence levels weight squared residuals in the objective:
/// `conf_a` for adopted pairs, `conf_b` for exposed-but-not-adopted pairs,
/// `conf_c` for sampled unexposed pairs. Adoption is the strongest signal,
/// so the ordering `conf_a > conf_b > conf_c > 0` is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Number of latent topics `K`.
    pub k: usize,
    pub lambda_u: f64,
    pub lambda_theta: f64,
    pub lambda_eta: f64,
    pub conf_a: f64,
    pub conf_b: f64,
    pub conf_c: f64,
    /// Truncation depth for the visibility series.
    pub l_max: u64,
    /// Relative log-likelihood change below which training stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            k: 30,
            lambda_u: 1e-3,
            lambda_theta: 1e-3,
            lambda_eta: 1e4,
            conf_a: 1.0,
            conf_b: 0.03,
            conf_c: 0.01,
            l_max: crate::distributions::DEFAULT_L_MAX,
            tol: 1e-6,
            max_iters: 200,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("lambda_u", self.lambda_u),
            ("lambda_theta", self.lambda_theta),
            ("lambda_eta", self.lambda_eta),
            ("conf_a", self.conf_a),
            ("conf_b", self.conf_b),
            ("conf_c", self.conf_c),
            ("tol", self.tol),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::InvalidHyper(format!(
                    "{name} must be a positive finite number, got {value}"
                )));
            }
        }
        if self.k == 0 {
            return Err(ModelError::InvalidHyper("k must be at least 1".into()));
        }
        if self.l_max == 0 {
            return Err(ModelError::InvalidHyper("l_max must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(ModelError::InvalidHyper(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.conf_a > self.conf_b && self.conf_b > self.conf_c) {
            return Err(ModelError::InvalidHyper(format!(
                "confidence levels must satisfy conf_a > conf_b > conf_c > 0, got {} / {} / {}",
                self.conf_a, self.conf_b, self.conf_c
            )));
        }
        Ok(())
    }
}

/// A fitted (or ground-truth) model.
///
/// `u` is K x N (one column per user), `theta` is K x M (one column per
/// item), `eta` holds per-item fitness, and `v` holds per-user visibility.
/// Visibility is data, not a parameter: it is computed once from each user's
/// load ratio and never touched by training.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub u: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub eta: DVector<f64>,
    pub v: DVector<f64>,
}

impl ModelState {
    pub fn new(
        u: DMatrix<f64>,
        theta: DMatrix<f64>,
        eta: DVector<f64>,
        v: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let state = ModelState { u, theta, eta, v };
        state.validate()?;
        Ok(state)
    }

    pub fn n_users(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_items(&self) -> usize {
        self.theta.ncols()
    }

    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.u.nrows() != self.theta.nrows() {
            return Err(ModelError::InvalidState(format!(
                "user profiles have {} topics but item profiles have {}",
                self.u.nrows(),
                self.theta.nrows()
            )));
        }
        if self.eta.len() != self.theta.ncols() {
            return Err(ModelError::InvalidState(format!(
                "{} fitness entries for {} items",
                self.eta.len(),
                self.theta.ncols()
            )));
        }
        if self.v.len() != self.u.ncols() {
            return Err(ModelError::InvalidState(format!(
                "{} visibility entries for {} users",
                self.v.len(),
                self.u.ncols()
            )));
        }
        let finite = self.u.iter().all(|x| x.is_finite())
            && self.theta.iter().all(|x| x.is_finite())
            && self.eta.iter().all(|x| x.is_finite());
        if !finite {
            return Err(ModelError::InvalidState(
                "non-finite entry in model parameters".into(),
            ));
        }
        if self.v.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(ModelError::InvalidState(
                "visibility entries must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Latent-topic relevance `u_i' theta_j`.
    pub fn relevance(&self, i: usize, j: usize) -> f64 {
        self.u.column(i).dot(&self.theta.column(j))
    }

    /// Predicted adoption score `v_i * (u_i' theta_j + eta_j)`.
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        self.v[i] * (self.relevance(i, j) + self.eta[j])
    }
}

/// Which objective the trainer maximizes.
///
/// `Pmf` freezes fitness at zero, reducing the model to confidence-weighted
/// matrix factorization; pass unit visibility alongside it to drop the
/// visibility scaling as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Vip,
    Pmf,
}

/// One coordinate block of a training sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Users,
    Items,
    Fitness,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Users => "users",
            Phase::Items => "items",
            Phase::Fitness => "fitness",
        }
    }
}

/// The order in which the three coordinate blocks are updated within one
/// sweep. Any permutation converges; the order only changes the path taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOrder([Phase; 3]);

impl SweepOrder {
    pub fn new(phases: [Phase; 3]) -> Result<Self, ModelError> {
        for phase in [Phase::Users, Phase::Items, Phase::Fitness] {
            if !phases.contains(&phase) {
                return Err(ModelError::InvalidSweepOrder(format!(
                    "each of users, items, fitness must appear exactly once, missing {}",
                    phase.name()
                )));
            }
        }
        Ok(SweepOrder(phases))
    }

    pub fn phases(&self) -> [Phase; 3] {
        self.0
    }
}

impl Default for SweepOrder {
    fn default() -> Self {
        SweepOrder([Phase::Users, Phase::Items, Phase::Fitness])
    }
}

impl FromStr for SweepOrder {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(ModelError::InvalidSweepOrder(format!(
                "expected three comma-separated phases, got {s:?}"
            )));
        }
        let mut phases = [Phase::Users; 3];
        for (slot, part) in phases.iter_mut().zip(&parts) {
            *slot = match *part {
                "users" => Phase::Users,
                "items" => Phase::Items,
                "fitness" => Phase::Fitness,
                other => {
                    return Err(ModelError::InvalidSweepOrder(format!(
                        "unknown phase {other:?}"
                    )))
                }
            };
        }
        SweepOrder::new(phases)
    }
}

impl fmt::Display for SweepOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.0[0].name(),
            self.0[1].name(),
            self.0[2].name()
        )
    }
}

/// Trainer configuration.
///
/// `init` overrides the random initialization with explicit `(U, Theta)`
/// matrices; when `None`, entries are drawn i.i.d. Normal(0, 0.01) from the
/// "init" substream of `seed` (users first, then items, column-major), a
/// small symmetric start that avoids the saddle at exactly zero while keeping
/// runs reproducible.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub mode: FitMode,
    pub seed: u64,
    pub sweep_order: SweepOrder,
    pub init: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: FitMode::Vip,
            seed: 0,
            sweep_order: SweepOrder::default(),
            init: None,
        }
    }
}

/// Outcome of a training run: the final state, the log-likelihood after the
/// initialization (index 0) and after each completed sweep, and whether the
/// relative-change stopping rule fired before `max_iters`.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub state: ModelState,
    pub trace: Vec<f64>,
    pub converged: bool,
}
