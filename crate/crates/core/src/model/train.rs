//! Training pairs, the coordinate-ascent kernels, and the trainer loop.

use super::{FitMode, FitOptions, FitReport, HyperParams, ModelError, ModelState, Phase};
use crate::rng::substream;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// One defined user/item pair, stored from the perspective of the opposite
/// side: `idx` is the item index in a per-user list and the user index in a
/// per-item list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub idx: usize,
    /// 1.0 for adopted pairs, 0.0 otherwise.
    pub response: f64,
    pub confidence: f64,
}

/// The defined-pair set the objective sums over, indexed both ways.
///
/// Three tiers, in decreasing confidence: adopted pairs (`conf_a`, response
/// 1), exposed-but-not-adopted pairs (`conf_b`, response 0), and sampled
/// unexposed pairs (`conf_c`, response 0). All remaining pairs are undefined
/// and contribute nothing.
#[derive(Debug, Clone)]
pub struct TrainingPairs {
    n_users: usize,
    n_items: usize,
    n_observations: usize,
    by_user: Vec<Vec<Observation>>,
    by_item: Vec<Vec<Observation>>,
}

impl TrainingPairs {
    /// Assembles the defined-pair set from per-user sorted item lists.
    ///
    /// `exposed` must contain `adopted` (an adoption implies the item was
    /// seen), and `negatives` must be disjoint from `exposed`; every list
    /// must be strictly increasing and within bounds.
    pub fn build(
        n_items: usize,
        adopted: &[Vec<usize>],
        exposed: &[Vec<usize>],
        negatives: &[Vec<usize>],
        hyper: &HyperParams,
    ) -> Result<TrainingPairs, ModelError> {
        hyper.validate()?;
        let n_users = adopted.len();
        if exposed.len() != n_users || negatives.len() != n_users {
            return Err(ModelError::DimensionMismatch(format!(
                "adopted/exposed/negative lists cover {}/{}/{} users",
                adopted.len(),
                exposed.len(),
                negatives.len()
            )));
        }

        let mut by_user = Vec::with_capacity(n_users);
        let mut by_item: Vec<Vec<Observation>> = vec![Vec::new(); n_items];
        let mut n_observations = 0usize;
        for i in 0..n_users {
            check_item_list(i, "adopted", &adopted[i], n_items)?;
            check_item_list(i, "exposed", &exposed[i], n_items)?;
            check_item_list(i, "negative", &negatives[i], n_items)?;
            if !is_subset(&adopted[i], &exposed[i]) {
                return Err(ModelError::InvalidPairs {
                    user: i,
                    message: "every adopted item must also appear in the exposed list".into(),
                });
            }
            if !is_disjoint(&negatives[i], &exposed[i]) {
                return Err(ModelError::InvalidPairs {
                    user: i,
                    message: "sampled negatives must be unexposed".into(),
                });
            }

            let mut obs = Vec::with_capacity(exposed[i].len() + negatives[i].len());
            let mut adopted_it = adopted[i].iter().peekable();
            let mut neg_it = negatives[i].iter().peekable();
            for &j in &exposed[i] {
                while let Some(&&nj) = neg_it.peek() {
                    if nj >= j {
                        break;
                    }
                    obs.push(Observation {
                        idx: nj,
                        response: 0.0,
                        confidence: hyper.conf_c,
                    });
                    neg_it.next();
                }
                let adopted_here = adopted_it.peek() == Some(&&j);
                if adopted_here {
                    adopted_it.next();
                }
                obs.push(if adopted_here {
                    Observation {
                        idx: j,
                        response: 1.0,
                        confidence: hyper.conf_a,
                    }
                } else {
                    Observation {
                        idx: j,
                        response: 0.0,
                        confidence: hyper.conf_b,
                    }
                });
            }
            for &nj in neg_it {
                obs.push(Observation {
                    idx: nj,
                    response: 0.0,
                    confidence: hyper.conf_c,
                });
            }

            n_observations += obs.len();
            for o in &obs {
                by_item[o.idx].push(Observation {
                    idx: i,
                    response: o.response,
                    confidence: o.confidence,
                });
            }
            by_user.push(obs);
        }

        Ok(TrainingPairs {
            n_users,
            n_items,
            n_observations,
            by_user,
            by_item,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn user_observations(&self, i: usize) -> &[Observation] {
        &self.by_user[i]
    }

    pub fn item_observations(&self, j: usize) -> &[Observation] {
        &self.by_item[j]
    }

    pub fn users(&self) -> &[Vec<Observation>] {
        &self.by_user
    }

    pub fn items(&self) -> &[Vec<Observation>] {
        &self.by_item
    }
}

fn check_item_list(
    user: usize,
    kind: &str,
    items: &[usize],
    n_items: usize,
) -> Result<(), ModelError> {
    if !items.windows(2).all(|w| w[0] < w[1]) {
        return Err(ModelError::InvalidPairs {
            user,
            message: format!("{kind} items must be strictly increasing"),
        });
    }
    if let Some(&last) = items.last() {
        if last >= n_items {
            return Err(ModelError::InvalidPairs {
                user,
                message: format!("{kind} item {last} out of bounds for {n_items} items"),
            });
        }
    }
    Ok(())
}

fn is_subset(sub: &[usize], sup: &[usize]) -> bool {
    let mut sup_it = sup.iter();
    'outer: for &x in sub {
        for &y in sup_it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}

fn is_disjoint(a: &[usize], b: &[usize]) -> bool {
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

/// Complete log posterior up to an additive constant:
/// Gaussian priors on the three parameter blocks, the per-user log of the
/// visibility mixture (constant while training, since visibility is frozen),
/// and the confidence-weighted squared residuals over defined pairs.
pub fn log_likelihood(state: &ModelState, pairs: &TrainingPairs, hyper: &HyperParams) -> f64 {
    assert_eq!(
        state.n_users(),
        pairs.n_users(),
        "state and pairs disagree on the user count"
    );
    assert_eq!(
        state.n_items(),
        pairs.n_items(),
        "state and pairs disagree on the item count"
    );
    ll_parts(&state.u, &state.theta, &state.eta, &state.v, pairs, hyper)
}

fn ll_parts(
    u: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    eta: &DVector<f64>,
    v: &DVector<f64>,
    pairs: &TrainingPairs,
    hyper: &HyperParams,
) -> f64 {
    let mut ll = -0.5 * hyper.lambda_u * u.norm_squared()
        - 0.5 * hyper.lambda_theta * theta.norm_squared()
        - 0.5 * hyper.lambda_eta * eta.norm_squared();
    ll += v.iter().map(|x| x.ln()).sum::<f64>();
    // Summed in a fixed order so the trace is reproducible bit-for-bit
    // regardless of thread count.
    for (i, obs) in pairs.users().iter().enumerate() {
        let vi = v[i];
        let ui = u.column(i);
        for o in obs {
            let pred = vi * (ui.dot(&theta.column(o.idx)) + eta[o.idx]);
            let resid = o.response - pred;
            ll -= 0.5 * o.confidence * resid * resid;
        }
    }
    ll
}

/// Exact coordinate maximizer for one user profile: the ridge system
/// `(lambda_u I + v_i^2 sum_j c_ij theta_j theta_j') u = v_i sum_j c_ij (r_ij - v_i eta_j) theta_j`.
/// A user with no defined pairs collapses to the prior mean (zero).
pub fn update_user(
    state: &ModelState,
    pairs: &TrainingPairs,
    hyper: &HyperParams,
    i: usize,
) -> DVector<f64> {
    solve_user(
        &state.theta,
        &state.eta,
        state.v[i],
        pairs.user_observations(i),
        hyper.lambda_u,
    )
    .expect("ridge system is positive definite for finite state")
}

/// Exact coordinate maximizer for one item profile: design rows `v_i u_i`,
/// weights `c_ij`, targets `r_ij - v_i eta_j`, ridge `lambda_theta`.
pub fn update_item(
    state: &ModelState,
    pairs: &TrainingPairs,
    hyper: &HyperParams,
    j: usize,
) -> DVector<f64> {
    solve_item(
        &state.u,
        &state.v,
        state.eta[j],
        pairs.item_observations(j),
        hyper.lambda_theta,
    )
    .expect("ridge system is positive definite for finite state")
}

/// Exact coordinate maximizer for one fitness entry:
/// `(lambda_eta + sum_i c_ij v_i^2)^-1 sum_i c_ij v_i (r_ij - v_i u_i' theta_j)`.
pub fn update_fitness(
    state: &ModelState,
    pairs: &TrainingPairs,
    hyper: &HyperParams,
    j: usize,
) -> f64 {
    solve_fitness(
        &state.u,
        &state.theta,
        j,
        &state.v,
        pairs.item_observations(j),
        hyper.lambda_eta,
    )
}

fn solve_user(
    theta: &DMatrix<f64>,
    eta: &DVector<f64>,
    v_i: f64,
    obs: &[Observation],
    lambda_u: f64,
) -> Option<DVector<f64>> {
    let k = theta.nrows();
    let mut a = DMatrix::from_diagonal_element(k, k, lambda_u);
    let mut b = DVector::zeros(k);
    let w = v_i * v_i;
    for o in obs {
        let col = theta.column(o.idx);
        a.ger(o.confidence * w, &col, &col, 1.0);
        b.axpy(o.confidence * v_i * (o.response - v_i * eta[o.idx]), &col, 1.0);
    }
    solve_spd(a, &b)
}

fn solve_item(
    u: &DMatrix<f64>,
    v: &DVector<f64>,
    eta_j: f64,
    obs: &[Observation],
    lambda_theta: f64,
) -> Option<DVector<f64>> {
    let k = u.nrows();
    let mut a = DMatrix::from_diagonal_element(k, k, lambda_theta);
    let mut b = DVector::zeros(k);
    for o in obs {
        let vi = v[o.idx];
        let col = u.column(o.idx);
        a.ger(o.confidence * vi * vi, &col, &col, 1.0);
        b.axpy(o.confidence * vi * (o.response - vi * eta_j), &col, 1.0);
    }
    solve_spd(a, &b)
}

fn solve_fitness(
    u: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    j: usize,
    v: &DVector<f64>,
    obs: &[Observation],
    lambda_eta: f64,
) -> f64 {
    let theta_j = theta.column(j);
    let mut num = 0.0;
    let mut den = lambda_eta;
    for o in obs {
        let vi = v[o.idx];
        let delta = u.column(o.idx).dot(&theta_j);
        num += o.confidence * vi * (o.response - vi * delta);
        den += o.confidence * vi * vi;
    }
    num / den
}

/// `None` signals a non-finite system, the only way the Cholesky of a
/// ridge-regularized Gram matrix can fail.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = Cholesky::new(a)?.solve(b);
    sol.iter().all(|x| x.is_finite()).then_some(sol)
}

/// Runs MAP coordinate ascent to convergence.
///
/// Visibility is an input, not a parameter: pass the per-user mixture values
/// for the full model, or unit visibility for the matrix-factorization
/// reduction. Each sweep applies the three block updates in
/// `opts.sweep_order` (`FitMode::Pmf` skips the fitness block, leaving eta at
/// zero) and stops once the relative log-likelihood change drops below
/// `hyper.tol` or `hyper.max_iters` sweeps have run.
pub fn fit(
    pairs: &TrainingPairs,
    visibility: &DVector<f64>,
    hyper: &HyperParams,
    opts: &FitOptions,
) -> Result<FitReport, ModelError> {
    hyper.validate()?;
    if pairs.n_observations() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if visibility.len() != pairs.n_users() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} visibility entries for {} users",
            visibility.len(),
            pairs.n_users()
        )));
    }
    if visibility.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return Err(ModelError::InvalidState(
            "visibility entries must lie in (0, 1]".into(),
        ));
    }

    let k = hyper.k;
    let n = pairs.n_users();
    let m = pairs.n_items();
    let (mut u, mut theta) = match &opts.init {
        Some((u0, theta0)) => {
            if u0.nrows() != k || u0.ncols() != n || theta0.nrows() != k || theta0.ncols() != m {
                return Err(ModelError::DimensionMismatch(format!(
                    "initial profiles are {}x{} and {}x{}, expected {k}x{n} and {k}x{m}",
                    u0.nrows(),
                    u0.ncols(),
                    theta0.nrows(),
                    theta0.ncols()
                )));
            }
            if !u0.iter().chain(theta0.iter()).all(|x| x.is_finite()) {
                return Err(ModelError::InvalidState(
                    "initial profiles contain non-finite entries".into(),
                ));
            }
            (u0.clone(), theta0.clone())
        }
        None => {
            let mut rng = substream(opts.seed, "init", 0);
            // Variance 0.01; users drawn before items, columns filled in order.
            let normal = Normal::new(0.0, 0.1).expect("valid normal parameters");
            let u_data: Vec<f64> = (0..k * n).map(|_| normal.sample(&mut rng)).collect();
            let theta_data: Vec<f64> = (0..k * m).map(|_| normal.sample(&mut rng)).collect();
            (
                DMatrix::from_column_slice(k, n, &u_data),
                DMatrix::from_column_slice(k, m, &theta_data),
            )
        }
    };
    let mut eta = DVector::zeros(m);
    let v = visibility.clone();

    let ll0 = ll_parts(&u, &theta, &eta, &v, pairs, hyper);
    if !ll0.is_finite() {
        return Err(ModelError::NonFinite {
            block: "likelihood",
            sweep: 0,
        });
    }
    let mut trace = vec![ll0];
    let mut prev = ll0;
    let mut converged = false;

    for sweep in 1..=hyper.max_iters {
        for phase in opts.sweep_order.phases() {
            match phase {
                Phase::Users => {
                    let (theta_ref, eta_ref, v_ref) = (&theta, &eta, &v);
                    u.as_mut_slice()
                        .par_chunks_exact_mut(k)
                        .enumerate()
                        .try_for_each(|(i, col)| {
                            let sol = solve_user(
                                theta_ref,
                                eta_ref,
                                v_ref[i],
                                pairs.user_observations(i),
                                hyper.lambda_u,
                            )
                            .ok_or(())?;
                            col.copy_from_slice(sol.as_slice());
                            Ok(())
                        })
                        .map_err(|()| ModelError::NonFinite {
                            block: phase.name(),
                            sweep,
                        })?;
                }
                Phase::Items => {
                    let (u_ref, eta_ref, v_ref) = (&u, &eta, &v);
                    theta
                        .as_mut_slice()
                        .par_chunks_exact_mut(k)
                        .enumerate()
                        .try_for_each(|(j, col)| {
                            let sol = solve_item(
                                u_ref,
                                v_ref,
                                eta_ref[j],
                                pairs.item_observations(j),
                                hyper.lambda_theta,
                            )
                            .ok_or(())?;
                            col.copy_from_slice(sol.as_slice());
                            Ok(())
                        })
                        .map_err(|()| ModelError::NonFinite {
                            block: phase.name(),
                            sweep,
                        })?;
                }
                Phase::Fitness => {
                    if opts.mode == FitMode::Pmf {
                        continue;
                    }
                    let (u_ref, theta_ref, v_ref) = (&u, &theta, &v);
                    eta.as_mut_slice()
                        .par_iter_mut()
                        .enumerate()
                        .try_for_each(|(j, e)| {
                            let val = solve_fitness(
                                u_ref,
                                theta_ref,
                                j,
                                v_ref,
                                pairs.item_observations(j),
                                hyper.lambda_eta,
                            );
                            if !val.is_finite() {
                                return Err(());
                            }
                            *e = val;
                            Ok(())
                        })
                        .map_err(|()| ModelError::NonFinite {
                            block: phase.name(),
                            sweep,
                        })?;
                }
            }
        }

        let ll = ll_parts(&u, &theta, &eta, &v, pairs, hyper);
        if !ll.is_finite() {
            return Err(ModelError::NonFinite {
                block: "likelihood",
                sweep,
            });
        }
        trace.push(ll);
        let rel = (ll - prev).abs() / prev.abs().max(1e-12);
        prev = ll;
        if rel < hyper.tol {
            converged = true;
            break;
        }
    }

    let state = ModelState { u, theta, eta, v };
    Ok(FitReport {
        state,
        trace,
        converged,
    })
}
