//! Damped Newton steps for smooth concave maximization, with optional
//! linear equality constraints. Barrier homotopies in the saddle solvers
//! drive these primitives; certificates are produced elsewhere (cut
//! models, exact LP re-solves), never by the Newton iteration itself.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Value, gradient, Hessian triple of a smooth objective at a point.
#[derive(Debug, Clone)]
pub struct SmoothEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Oracle returning `None` outside the (open) domain.
pub type SmoothOracle<'a> = dyn FnMut(&DVector<f64>) -> Option<SmoothEval> + 'a;

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Stop when the Newton decrement `g' d` falls below this.
    pub decrement_tol: f64,
    pub max_iter: usize,
    pub min_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            decrement_tol: 1e-18,
            max_iter: 160,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: DVector<f64>,
    pub value: f64,
    /// Max-norm of the raw gradient at the final point.
    pub grad_norm: f64,
    /// Final Newton decrement `g' d` (zero at a constrained optimum).
    pub decrement: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes a smooth concave function with open domain by damped Newton
/// with Armijo backtracking. The start must lie inside the domain.
pub fn maximize_smooth(
    oracle: &mut SmoothOracle,
    x0: DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<NewtonResult> {
    maximize_smooth_eq(oracle, x0, None, cfg)
}

/// Equality-constrained variant: maximizes subject to `E x = e`. The
/// start must satisfy the constraints; KKT steps stay in the affine set.
pub fn maximize_smooth_eq(
    oracle: &mut SmoothOracle,
    x0: DVector<f64>,
    equalities: Option<(&DMatrix<f64>, &DVector<f64>)>,
    cfg: &NewtonConfig,
) -> Result<NewtonResult> {
    let n = x0.len();
    let mut x = x0;
    let mut ev = oracle(&x).ok_or_else(|| {
        CoreError::invariant("newton.start", "initial point outside the objective domain")
    })?;

    let mut iterations = 0usize;
    let mut last_decrement = f64::INFINITY;
    loop {
        // Newton direction, with diagonal damping retries if the solve
        // fails or fails to produce an ascent direction.
        let mut damping = 0.0f64;
        let mut direction: Option<DVector<f64>> = None;
        for _ in 0..14 {
            let step = match equalities {
                None => {
                    let mut h = ev.hess.clone();
                    if damping > 0.0 {
                        for i in 0..n {
                            h[(i, i)] -= damping;
                        }
                    }
                    h.lu().solve(&(-&ev.grad))
                }
                Some((e_mat, _)) => {
                    let m = e_mat.nrows();
                    let mut kkt = DMatrix::zeros(n + m, n + m);
                    for i in 0..n {
                        for j in 0..n {
                            kkt[(i, j)] = ev.hess[(i, j)];
                        }
                        if damping > 0.0 {
                            kkt[(i, i)] -= damping;
                        }
                    }
                    for r in 0..m {
                        for j in 0..n {
                            kkt[(n + r, j)] = e_mat[(r, j)];
                            kkt[(j, n + r)] = e_mat[(r, j)];
                        }
                    }
                    let mut rhs = DVector::zeros(n + m);
                    for i in 0..n {
                        rhs[i] = -ev.grad[i];
                    }
                    kkt.lu().solve(&rhs).map(|sol| sol.rows(0, n).into_owned())
                }
            };
            match step {
                Some(d) if ev.grad.dot(&d) >= 0.0 && d.iter().all(|v| v.is_finite()) => {
                    direction = Some(d);
                    break;
                }
                _ => {
                    damping = if damping == 0.0 {
                        1e-8 * (1.0 + ev.hess.amax())
                    } else {
                        damping * 100.0
                    };
                }
            }
        }
        let Some(d) = direction else {
            return Ok(NewtonResult {
                grad_norm: ev.grad.amax(),
                decrement: last_decrement,
                x,
                value: ev.value,
                iterations,
                converged: false,
            });
        };

        let slope = ev.grad.dot(&d);
        last_decrement = slope;
        if slope <= cfg.decrement_tol || iterations >= cfg.max_iter {
            return Ok(NewtonResult {
                grad_norm: ev.grad.amax(),
                decrement: slope,
                x,
                value: ev.value,
                iterations,
                converged: slope <= cfg.decrement_tol,
            });
        }
        iterations += 1;

        // Armijo backtracking with domain guard.
        let mut alpha = 1.0f64;
        let mut accepted = false;
        while alpha >= cfg.min_step {
            let cand = &x + alpha * &d;
            if let Some(cand_ev) = oracle(&cand) {
                if cand_ev.value >= ev.value + 1e-4 * alpha * slope {
                    x = cand;
                    ev = cand_ev;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok(NewtonResult {
                grad_norm: ev.grad.amax(),
                decrement: slope,
                x,
                value: ev.value,
                iterations,
                converged: false,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unconstrained_quadratic() {
        let mut oracle = |x: &DVector<f64>| {
            let d0 = x[0] - 1.0;
            let d1 = x[1] + 2.0;
            Some(SmoothEval {
                value: -(d0 * d0 + 3.0 * d1 * d1),
                grad: DVector::from_vec(vec![-2.0 * d0, -6.0 * d1]),
                hess: DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -6.0]),
            })
        };
        let r = maximize_smooth(
            &mut oracle,
            DVector::from_vec(vec![5.0, 5.0]),
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.x[1], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn log_barrier_domain_respected() {
        // maximize ln(x) + ln(1 - x) -> x = 1/2
        let mut oracle = |x: &DVector<f64>| {
            let v = x[0];
            if v <= 0.0 || v >= 1.0 {
                return None;
            }
            Some(SmoothEval {
                value: v.ln() + (1.0 - v).ln(),
                grad: DVector::from_vec(vec![1.0 / v - 1.0 / (1.0 - v)]),
                hess: DMatrix::from_row_slice(1, 1, &[-1.0 / (v * v) - 1.0 / ((1.0 - v) * (1.0 - v))]),
            })
        };
        let r = maximize_smooth(
            &mut oracle,
            DVector::from_vec(vec![0.9]),
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn equality_constrained_entropy() {
        // maximize sum ln(x_i) st sum x_i = 1 -> uniform
        let e = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let rhs = DVector::from_vec(vec![1.0]);
        let mut oracle = |x: &DVector<f64>| {
            if x.iter().any(|&v| v <= 0.0) {
                return None;
            }
            let value: f64 = x.iter().map(|v| v.ln()).sum();
            let grad = DVector::from_iterator(3, x.iter().map(|v| 1.0 / v));
            let mut hess = DMatrix::zeros(3, 3);
            for i in 0..3 {
                hess[(i, i)] = -1.0 / (x[i] * x[i]);
            }
            Some(SmoothEval { value, grad, hess })
        };
        let x0 = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let r = maximize_smooth_eq(&mut oracle, x0, Some((&e, &rhs)), &NewtonConfig::default()).unwrap();
        assert!(r.converged);
        for i in 0..3 {
            assert_abs_diff_eq!(r.x[i], 1.0 / 3.0, epsilon = 1e-9);
        }
        // stays on the constraint
        assert_abs_diff_eq!(r.x.sum(), 1.0, epsilon = 1e-12);
    }
}
