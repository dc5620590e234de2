//! Reference oracles shared by the test suites.
//!
//! Everything here is deliberately independent of the production code it is
//! used to check: integration is adaptive Simpson instead of closed forms,
//! gradients come from central differences instead of analytic solves, and
//! the linear solver is plain Gauss-Jordan elimination instead of Cholesky.
//! Slow and simple is the point.

/// Adaptive Simpson quadrature of `f` over the finite interval `[a, b]`.
///
/// `tol` is the absolute error target for the whole interval; the recursion
/// splits until the local Richardson estimate meets its share of the budget.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    assert!(a.is_finite() && b.is_finite() && b >= a);
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Like [`integrate`], but with caller-supplied interior anchor points the
/// integrator must visit. Use when the mass is concentrated in a region the
/// initial Simpson probes of a wide interval would step over. Anchors
/// outside `(a, b)` are ignored.
pub fn integrate_anchored(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    anchors: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = anchors.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup();
    let per = tol / (cuts.len() - 1) as f64;
    cuts.windows(2).map(|w| integrate(f, w[0], w[1], per)).sum()
}

/// Integral of `f` over `[a, +inf)` via the substitution x = a + t/(1-t),
/// which maps t in [0, 1) onto the half line.
pub fn integrate_to_inf(f: &dyn Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let g = move |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        f(a + t / u) / (u * u)
    };
    integrate(&g, 0.0, 1.0 - 1e-12, tol)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Central finite-difference gradient of `f` at `x` with the given step.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for d in 0..x.len() {
        probe[d] = x[d] + step;
        let hi = f(&probe);
        probe[d] = x[d] - step;
        let lo = f(&probe);
        probe[d] = x[d];
        g.push((hi - lo) / (2.0 * step));
    }
    g
}

/// Solve `A x = b` by Gauss-Jordan elimination with partial pivoting.
///
/// Panics on a numerically singular system; the oracles only ever feed it
/// ridge-regularized (hence positive definite) matrices.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        assert!(m[pivot][col].abs() > 1e-12, "singular system");
        m.swap(col, pivot);
        let scale = m[col][col];
        for v in m[col][col..].iter_mut() {
            *v /= scale;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                if factor != 0.0 {
                    for k in col..=n {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|row| row[n]).collect()
}

/// Pearson correlation coefficient; `None` when either side has no variance
/// or fewer than two points are given.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let rx = midranks(xs);
    let ry = midranks(ys);
    pearson(&rx, &ry)
}

fn midranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut stop = start + 1;
        while stop < n && xs[order[stop]] == xs[order[start]] {
            stop += 1;
        }
        let rank = (start + stop - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[start..stop] {
            ranks[idx] = rank;
        }
        start = stop;
    }
    ranks
}
