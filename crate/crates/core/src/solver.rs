//! Small numerical building blocks: a dense Levenberg-Marquardt loop,
//! robust-loss weighting, and polynomial root extraction.

use nalgebra::{Complex, DMatrix, DVector};

/// Levenberg-Marquardt configuration. Defaults: lambda0 = 1e-3 with a
/// x10 / /10 schedule, 50 iterations, gradient-norm stop 1e-10.
#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    pub gradient_tol: f64,
    pub cost_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_iters: 50,
            gradient_tol: 1e-10,
            cost_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
    /// Cost after each accepted step; non-increasing by construction.
    pub accepted_costs: Vec<f64>,
}

/// Dense Levenberg-Marquardt over a generic parameter vector.
///
/// `eval` returns stacked residuals and the Jacobian at the given parameters
/// (robust weighting is the caller's business: scale rows by sqrt(w)).
/// `retract` applies an additive-or-manifold update and returns the new
/// parameter vector; plain problems pass `|p, dp| p + dp`.
pub fn levenberg_marquardt<E, R>(
    initial: DVector<f64>,
    mut eval: E,
    mut retract: R,
    opts: &LmOptions,
) -> (DVector<f64>, LmReport)
where
    E: FnMut(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
    R: FnMut(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let mut params = initial;
    let (mut residuals, mut jacobian) = match eval(&params) {
        Some(rj) => rj,
        None => {
            let report = LmReport {
                iterations: 0,
                initial_cost: f64::INFINITY,
                final_cost: f64::INFINITY,
                converged: false,
                accepted_costs: Vec::new(),
            };
            return (params, report);
        }
    };
    let mut cost = residuals.norm_squared();
    let initial_cost = cost;
    let mut lambda = opts.lambda0;
    let mut accepted_costs = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let jt = jacobian.transpose();
        let h = &jt * &jacobian;
        let g = &jt * &residuals;
        if g.norm() < opts.gradient_tol {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = h.clone();
            for i in 0..damped.nrows() {
                let d = damped[(i, i)];
                damped[(i, i)] = d + lambda * d.max(1e-12);
            }
            let step = match damped.clone().cholesky() {
                Some(chol) => chol.solve(&-&g),
                None => match damped.lu().solve(&-&g) {
                    Some(s) => s,
                    None => {
                        lambda *= opts.lambda_up;
                        continue;
                    }
                },
            };
            let candidate = retract(&params, &step);
            if let Some((new_res, new_jac)) = eval(&candidate) {
                let new_cost = new_res.norm_squared();
                if new_cost < cost {
                    params = candidate;
                    residuals = new_res;
                    jacobian = new_jac;
                    let decrease = cost - new_cost;
                    cost = new_cost;
                    accepted_costs.push(cost);
                    lambda = (lambda / opts.lambda_down).max(1e-12);
                    accepted = true;
                    if decrease < opts.cost_tol * (1.0 + cost) {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= opts.lambda_up;
        }
        if !accepted {
            // No damping level made progress; we are at a local minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let report = LmReport {
        iterations,
        initial_cost,
        final_cost: cost,
        converged,
        accepted_costs,
    };
    (params, report)
}

/// IRLS weight of the Huber loss: 1 inside the inlier band, delta/|r| outside.
#[inline]
pub fn huber_weight(residual_norm: f64, delta: f64) -> f64 {
    if residual_norm <= delta {
        1.0
    } else {
        delta / residual_norm
    }
}

/// Real roots of the polynomial `c[0] + c[1] x + ... + c[n] x^n`.
///
/// Roots come from the eigenvalues of the companion matrix and are polished
/// with a few Newton steps; complex pairs are rejected with a tolerance
/// relative to the coefficient scale.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    // Trim negligible leading coefficients.
    let scale = coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut degree = coeffs.len() - 1;
    while degree > 0 && coeffs[degree].abs() < 1e-12 * scale {
        degree -= 1;
    }
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let n = degree;
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    let eigen: Vec<Complex<f64>> = companion.complex_eigenvalues().iter().copied().collect();

    let eval = |x: f64| -> (f64, f64) {
        // Horner value and derivative.
        let mut value = coeffs[degree];
        let mut deriv = 0.0;
        for i in (0..degree).rev() {
            deriv = deriv * x + value;
            value = value * x + coeffs[i];
        }
        (value, deriv)
    };

    let mut roots = Vec::new();
    for ev in eigen {
        let mag = ev.norm().max(1.0);
        if ev.im.abs() > 1e-8 * mag {
            continue;
        }
        let mut x = ev.re;
        for _ in 0..6 {
            let (f, df) = eval(x);
            if df.abs() < 1e-300 {
                break;
            }
            let dx = f / df;
            x -= dx;
            if dx.abs() < 1e-14 * x.abs().max(1.0) {
                break;
            }
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_solves_small_nonlinear_least_squares() {
        // Fit y = a * exp(b x) to exact data.
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let (a_true, b_true) = (2.0, -0.7);
        let ys: Vec<f64> = xs.iter().map(|x| a_true * (b_true * x).exp()).collect();
        let eval = |p: &DVector<f64>| {
            let (a, b) = (p[0], p[1]);
            let mut r = DVector::zeros(xs.len());
            let mut j = DMatrix::zeros(xs.len(), 2);
            for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
                let e = (b * x).exp();
                r[i] = a * e - y;
                j[(i, 0)] = e;
                j[(i, 1)] = a * x * e;
            }
            Some((r, j))
        };
        let (p, report) = levenberg_marquardt(
            DVector::from_vec(vec![1.0, 0.0]),
            eval,
            |p, dp| p + dp,
            &LmOptions::default(),
        );
        assert!(report.final_cost < 1e-16, "cost {}", report.final_cost);
        assert!((p[0] - a_true).abs() < 1e-7);
        assert!((p[1] - b_true).abs() < 1e-7);
        // Accepted-step costs never increase.
        for w in report.accepted_costs.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn roots_of_factored_polynomial() {
        // (x - 1)(x + 2)(x - 3.5) = x^3 - 2.5 x^2 - 5.5 x + 7
        let roots = real_roots(&[7.0, -5.5, -2.5, 1.0]);
        assert_eq!(roots.len(), 3);
        assert!((roots[0] + 2.0).abs() < 1e-10);
        assert!((roots[1] - 1.0).abs() < 1e-10);
        assert!((roots[2] - 3.5).abs() < 1e-10);
    }

    #[test]
    fn complex_roots_are_skipped() {
        // x^2 + 1 has no real roots.
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn huber_weights() {
        assert_eq!(huber_weight(0.5, 1.0), 1.0);
        assert!((huber_weight(4.0, 2.0) - 0.5).abs() < 1e-12);
    }
}
