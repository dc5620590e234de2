//! Synthetic dataset generation from the model's own generative process.

use super::{AdoptionDataset, DataError, UserMeta};
use crate::distributions::{visibility, LoadRatio, SurfingParams};
use crate::model::{HyperParams, ModelState};
use crate::rng::substream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Configuration for [`generate_synthetic`].
///
/// `hyper` doubles as the generator's prior: profiles and fitness are drawn
/// with standard deviations `lambda_u^-1/2`, `lambda_theta^-1/2`,
/// `lambda_eta^-1/2`. The Gaussian response noise has precision
/// `noise_precision` (defaulting to `conf_a`, the precision the trainer
/// assumes for adopted pairs).
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub hyper: HyperParams,
    pub surfing: SurfingParams,
    /// Load ratios are drawn uniformly from this interval.
    pub rho_range: (f64, f64),
    /// Independent Bernoulli probability that a pair lands in the exposure
    /// mask.
    pub exposure_density: f64,
    /// A sampled real-valued response above this cut becomes an adoption.
    pub adoption_cut: f64,
    pub noise_precision: Option<f64>,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        SyntheticConfig {
            n_users,
            n_items,
            hyper: HyperParams::default(),
            surfing: SurfingParams::default(),
            rho_range: (0.0, 100.0),
            exposure_density: 0.1,
            adoption_cut: 0.5,
            noise_precision: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(DataError::InvalidConfig(
                "need at least one user and one item".into(),
            ));
        }
        if self.n_users > 999_999 || self.n_items > 999_999 {
            return Err(DataError::InvalidConfig(
                "generated ids are zero-padded to six digits; dimensions above 999999 \
                 would break their ordering"
                    .into(),
            ));
        }
        self.hyper
            .validate()
            .map_err(|e| DataError::InvalidConfig(e.to_string()))?;
        let (lo, hi) = self.rho_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1e4) {
            return Err(DataError::InvalidConfig(format!(
                "rho range must satisfy 0 <= lo <= hi <= 1e4, got [{lo}, {hi}]"
            )));
        }
        if !(self.exposure_density > 0.0 && self.exposure_density <= 1.0) {
            return Err(DataError::InvalidConfig(format!(
                "exposure density must lie in (0, 1], got {}",
                self.exposure_density
            )));
        }
        if !self.adoption_cut.is_finite() {
            return Err(DataError::InvalidConfig("adoption cut must be finite".into()));
        }
        if let Some(p) = self.noise_precision {
            if !(p.is_finite() && p > 0.0) {
                return Err(DataError::InvalidConfig(format!(
                    "noise precision must be positive and finite, got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws a dataset from the generative process and returns it with the
/// ground-truth state that produced it.
///
/// Sampling order (each step on its own named sub-stream of `seed`, so runs
/// are bit-reproducible): per-user load ratios, then ground-truth factors,
/// then the exposure mask, then one Gaussian response per exposed pair,
/// thresholded at `adoption_cut`. Adoptions are therefore always a subset of
/// the exposure mask.
pub fn generate_synthetic(
    cfg: &SyntheticConfig,
) -> Result<(AdoptionDataset, ModelState), DataError> {
    cfg.validate()?;
    let (n, m, k) = (cfg.n_users, cfg.n_items, cfg.hyper.k);

    let (lo, hi) = cfg.rho_range;
    let mut rho_rng = substream(cfg.seed, "synth-rho", 0);
    let rhos: Vec<LoadRatio> = (0..n)
        .map(|_| {
            LoadRatio::new(lo + (hi - lo) * rho_rng.random::<f64>())
                .expect("the validated range only yields finite non-negative values")
        })
        .collect();

    let mut factor_rng = substream(cfg.seed, "synth-factors", 0);
    let draw = |std: f64, len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let normal = Normal::new(0.0, std).expect("positive standard deviation");
        (0..len).map(|_| normal.sample(rng)).collect()
    };
    let u = DMatrix::from_column_slice(
        k,
        n,
        &draw(cfg.hyper.lambda_u.powf(-0.5), k * n, &mut factor_rng),
    );
    let theta = DMatrix::from_column_slice(
        k,
        m,
        &draw(cfg.hyper.lambda_theta.powf(-0.5), k * m, &mut factor_rng),
    );
    let eta = DVector::from_vec(draw(cfg.hyper.lambda_eta.powf(-0.5), m, &mut factor_rng));

    let mut v = DVector::zeros(n);
    for (i, &rho) in rhos.iter().enumerate() {
        v[i] = visibility(rho, &cfg.surfing, cfg.hyper.l_max)?;
    }

    let mut exposure_rng = substream(cfg.seed, "synth-exposure", 0);
    let exposed: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            (0..m)
                .filter(|_| exposure_rng.random::<f64>() < cfg.exposure_density)
                .collect()
        })
        .collect();
    if exposed.iter().all(Vec::is_empty) {
        return Err(DataError::NoExposure);
    }

    let precision = cfg.noise_precision.unwrap_or(cfg.hyper.conf_a);
    let noise = Normal::new(0.0, precision.powf(-0.5)).expect("positive standard deviation");
    let mut response_rng = substream(cfg.seed, "synth-response", 0);
    let mut adopted: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let ui = u.column(i);
        for &j in &exposed[i] {
            let mean = v[i] * (ui.dot(&theta.column(j)) + eta[j]);
            if mean + noise.sample(&mut response_rng) > cfg.adoption_cut {
                adopted[i].push(j);
            }
        }
    }

    let user_ids: Vec<String> = (0..n).map(|i| format!("u{i:06}")).collect();
    let item_ids: Vec<String> = (0..m).map(|j| format!("i{j:06}")).collect();
    let meta: Vec<UserMeta> = user_ids
        .iter()
        .map(|id| UserMeta {
            user_id: id.clone(),
            n_friends: 0,
            n_posts: 1,
        })
        .collect();

    let data = AdoptionDataset::from_parts(user_ids, item_ids, adopted, exposed, meta, rhos)?;
    let state = ModelState::new(u, theta, eta, v).map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok((data, state))
}
