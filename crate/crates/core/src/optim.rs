//! Small dense least-squares toolkit: Nelder–Mead for the global approach and
//! Levenberg–Marquardt with a central-difference Jacobian for the finish.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Edge length of the starting simplex along each coordinate.
    pub initial_step: f64,
    /// Stop when the spread of simplex values drops below `f_tol · (|f_best| + tiny)`.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evaluations: 4000, initial_step: 0.2, f_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0` with the standard reflect/expand/contract/shrink moves.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutcome {
    let n = x0.len();
    if n == 0 {
        return NelderMeadOutcome { x: Vec::new(), value: f(x0), evaluations: 1 };
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= opts.f_tol * (best.abs() + 1e-300) || evaluations.get() >= opts.max_evaluations {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let reflected = toward(alpha, &simplex[n].0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = toward(gamma, &simplex[n].0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst {
                let c = toward(rho, &reflected);
                let v = eval(&c);
                (c, v)
            } else {
                let c = toward(-rho, &simplex[n].0);
                let v = eval(&c);
                (c, v)
            };
            if fc < worst.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadOutcome { x, value, evaluations: evaluations.get() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquaresOptions {
    pub max_iterations: usize,
    /// Converged when `|Δx| < step_tol · (|x| + step_tol)` ...
    pub step_tol: f64,
    /// ... and `|Δ SSR| < residual_tol · SSR`.
    pub residual_tol: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        LeastSquaresOptions { max_iterations: 200, step_tol: 1e-10, residual_tol: 1e-10, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Gauss–Newton curvature `JᵀJ` at `x`.
    pub jtj: DMatrix<f64>,
}

fn ssr(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

fn jacobian<R: Fn(&[f64], &mut [f64])>(residuals: &R, x: &[f64], m: usize, h_rel: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = h_rel * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        residuals(&xp, &mut plus);
        xp[j] = x[j] - h;
        residuals(&xp, &mut minus);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Damped Gauss–Newton on `residuals: (x, out) -> ()` with `m` outputs.
pub fn levenberg_marquardt<R: Fn(&[f64], &mut [f64])>(
    residuals: R,
    x0: &[f64],
    m: usize,
    opts: &LeastSquaresOptions,
) -> LeastSquaresOutcome {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut r = DVector::zeros(m);
    residuals(x.as_slice(), r.as_mut_slice());
    let mut cost = ssr(&r);
    let mut lambda = -1.0;
    let mut trial_r = DVector::zeros(m);

    let mut jac = jacobian(&residuals, x.as_slice(), m, opts.fd_step);
    let mut jtj = jac.transpose() * &jac;
    if n == 0 {
        return LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: 0, converged: true, jtj };
    }

    for iteration in 1..=opts.max_iterations {
        let grad = jac.transpose() * &r;
        if lambda < 0.0 {
            lambda = 1e-3 * jtj.diagonal().max().max(1e-300);
        }
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * jtj.diagonal().max());
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match a.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if !lambda.is_finite() {
                            return LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: iteration, converged: false, jtj };
                        }
                        continue;
                    }
                },
            };
            let step_small = step.norm() < opts.step_tol * (x.norm() + opts.step_tol);
            let trial = &x + &step;
            residuals(trial.as_slice(), trial_r.as_mut_slice());
            let trial_cost = ssr(&trial_r);
            if trial_cost.is_finite() && trial_cost <= cost {
                let drop = cost - trial_cost;
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-300);
                jac = jacobian(&residuals, x.as_slice(), m, opts.fd_step);
                jtj = jac.transpose() * &jac;
                if (step_small && drop <= opts.residual_tol * cost.max(f64::MIN_POSITIVE)) || cost == 0.0 {
                    return LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: iteration, converged: true, jtj };
                }
                break;
            }
            // Rejected: once the proposed step is negligible we are at the minimum
            // to working precision.
            if step_small {
                return LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: iteration, converged: true, jtj };
            }
            lambda *= 4.0;
            if !lambda.is_finite() {
                return LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: iteration, converged: false, jtj };
            }
        }
    }
    LeastSquaresOutcome { x: x.as_slice().to_vec(), ssr: cost, iterations: opts.max_iterations, converged: false, jtj }
}
