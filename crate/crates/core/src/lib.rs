//! A probabilistic model of item adoption in social streams.
//!
//! Users see only part of what their stream carries: how deep someone reads
//! depends on how fast messages arrive (their information load) and how many
//! items they view per visit. This crate models that per-user *visibility*
//! explicitly and combines it with latent-topic relevance and a per-item
//! fitness term to predict which stream items a user adopts (reposts).
//!
//! Modules:
//! - [`distributions`] — the geometric arrival law, the inverse-Gaussian
//!   "law of surfing", and the visibility mixture built from them;
//! - [`data`] — event-log ingestion, load-ratio estimation, dataset
//!   (de)serialization, negative sampling, and a synthetic generator;
//! - [`model`] — model state, the complete log likelihood, MAP
//!   coordinate-ascent training, and checkpoints;
//! - [`baselines`] — the Random / Fitness / Relevance reference rankers;
//! - [`eval`] — recall@X, per-user cross-validation, activity buckets, and
//!   per-item score decomposition;
//! - [`rng`] — named, seed-derived random sub-streams so every component
//!   draws reproducibly from one run seed.

pub mod baselines;
pub mod data;
pub mod distributions;
pub mod eval;
pub mod model;
pub mod rng;

pub use baselines::BaselineKind;
pub use data::{AdoptionDataset, AdoptionEvent, SyntheticConfig, UserMeta};
pub use distributions::{LoadRatio, SurfingParams};
pub use eval::{EvalConfig, EvalReport, ModelTag};
pub use model::{FitMode, FitOptions, FitReport, HyperParams, ModelState, TrainingPairs};
