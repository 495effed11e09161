//! Small dense least-squares and simplex optimisers.
//!
//! Problems in this crate have at most a handful of parameters, so plain
//! `Vec<f64>` linear algebra is enough.

/// Box constraints, one `(lower, upper)` pair per parameter.
#[derive(Debug, Clone)]
pub struct Bounds(pub Vec<(f64, f64)>);

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds(vec![(f64::NEG_INFINITY, f64::INFINITY); n])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls
    /// below `f_tol * (|f_best| + f_floor)`.
    pub f_tol: f64,
    pub f_floor: f64,
    /// Stop when every vertex is within `x_tol[i]` of the best one.
    pub x_tol: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Bounded Nelder–Mead. Trial points are clamped into the box.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        bounds.clamp(x);
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p = x0.to_vec();
    let v = eval(&mut p, &mut evals);
    simplex.push((p, v));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        if bounds.0[i].1 < p[i] {
            p[i] = x0[i] - steps[i];
        }
        let v = eval(&mut p, &mut evals);
        simplex.push((p, v));
    }

    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let x_close = simplex[1..].iter().all(|(p, _)| {
            p.iter()
                .zip(&simplex[0].0)
                .zip(&opts.x_tol)
                .all(|((a, b), tol)| (a - b).abs() <= *tol)
        });
        if (worst - best).abs() <= opts.f_tol * (best.abs() + opts.f_floor) && x_close {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let mut xr = along(-1.0);
        let fr = eval(&mut xr, &mut evals);
        if fr < simplex[0].1 {
            let mut xe = along(-2.0);
            let fe = eval(&mut xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (mut xc, t) = if fr < simplex[n].1 {
            (along(-0.5), fr)
        } else {
            (along(0.5), simplex[n].1)
        };
        let fc = eval(&mut xc, &mut evals);
        if fc < t {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (p, v) in simplex.iter_mut().skip(1) {
            let mut q: Vec<f64> = x_best.iter().zip(p.iter()).map(|(b, x)| b + 0.5 * (x - b)).collect();
            *v = eval(&mut q, &mut evals);
            *p = q;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evaluations: evals, converged }
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative decrease of the cost below which an accepted step counts as
    /// converged.
    pub cost_tol: f64,
    /// Relative parameter step below which the iteration counts as converged.
    pub step_tol: f64,
    /// Absolute floor added to `|x|` when scaling finite-difference steps.
    pub fd_scale: Vec<f64>,
    pub initial_damping: f64,
}

impl LmOptions {
    pub fn new(n: usize) -> Self {
        LmOptions {
            max_iter: 100,
            cost_tol: 1e-12,
            step_tol: 1e-10,
            fd_scale: vec![1.0; n],
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted parameter vectors, starting from the initial guess.
    pub trace: Vec<Vec<f64>>,
}

/// Levenberg–Marquardt on `Σ r_i(x)^2` with a central-difference Jacobian.
pub fn levenberg_marquardt<F: FnMut(&[f64]) -> Vec<f64>>(
    mut residuals: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> LmReport {
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut r = residuals(&x);
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut trace = vec![x.clone()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(&mut residuals, &x, bounds, &opts.fd_scale);
        let m = r.len();
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            for a in 0..n {
                jtr[a] += jac[a][i] * r[i];
                for b in 0..=a {
                    jtj[a][b] += jac[a][i] * jac[b][i];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[b][a] = jtj[a][b];
            }
        }
        if jtr.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for a in 0..n {
                lhs[a][a] += lambda * jtj[a][a].max(1e-30);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(delta) = solve_dense(lhs, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            bounds.clamp(&mut trial);
            let r_trial = residuals(&trial);
            let c_trial = sum_sq(&r_trial);
            if c_trial.is_finite() && c_trial <= cost {
                let rel_decrease = (cost - c_trial) / cost.max(f64::MIN_POSITIVE);
                let rel_step = trial
                    .iter()
                    .zip(&x)
                    .zip(&opts.fd_scale)
                    .map(|((a, b), s)| (a - b).abs() / (b.abs() + s))
                    .fold(0.0, f64::max);
                x = trial;
                r = r_trial;
                cost = c_trial;
                trace.push(x.clone());
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_decrease < opts.cost_tol || rel_step < opts.step_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step even with heavy damping: at a minimum to
            // working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmReport { x, cost, iterations, converged, trace }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F: FnMut(&[f64]) -> Vec<f64>>(
    residuals: &mut F,
    x: &[f64],
    bounds: &Bounds,
    scale: &[f64],
) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|a| {
            let h = 1e-6 * (x[a].abs() + scale[a]);
            let (lo, hi) = bounds.0[a];
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[a] = (x[a] + h).min(hi);
            xm[a] = (x[a] - h).max(lo);
            let span = xp[a] - xm[a];
            let rp = residuals(&xp);
            let rm = residuals(&xm);
            rp.iter().zip(&rm).map(|(p, m)| (p - m) / span).collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Straight-line least squares fit `y = slope x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Weighted ordinary least squares for a line; `None` if all `x` coincide.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..x.len()).map(w).sum();
    let mx = (0..x.len()).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let my = (0..x.len()).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..x.len()).map(|i| w(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..x.len()).map(|i| w(i) * (x[i] - mx) * (y[i] - my)).sum();
    let spread = x.iter().fold(0.0f64, |m, v| m.max((v - mx).abs()));
    if sxx <= 1e-24 * sw * (mx * mx + spread * spread) || spread == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    Some(LineFit { slope, intercept, residuals })
}
