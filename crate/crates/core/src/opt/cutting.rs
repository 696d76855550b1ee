//! Certified convex minimization / concave maximization over polytopes
//! by cutting planes.
//!
//! The certificate is a bound from the polyhedral model built out of
//! subgradient cuts: for a convex objective the model minorizes the
//! function, so its minimum over the feasible set is a valid lower
//! bound; the incumbent supplies the upper bound. Solvers are
//! deterministic for fixed inputs.

use crate::error::{CoreError, Result};
use crate::opt::lp::{solve_lp, LinearProgram, LpOutcome, RowOp};
use crate::opt::tol;

/// Bounded feasible region: a finite box intersected with linear rows.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `a' x = b`
    pub eq: Vec<(Vec<f64>, f64)>,
    /// `a' x <= b`
    pub ineq: Vec<(Vec<f64>, f64)>,
}

impl Polytope {
    pub fn bounded_box(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Polytope {
            lower,
            upper,
            eq: Vec::new(),
            ineq: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.eq.push((coeffs, rhs));
        self
    }

    pub fn inequality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.ineq.push((coeffs, rhs));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(CoreError::invariant("polytope.box", "bound length mismatch"));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(CoreError::invariant(
                    "polytope.box",
                    "certification requires a finite box with lower <= upper",
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], feas_tol: f64) -> bool {
        for j in 0..self.dim() {
            if x[j] < self.lower[j] - feas_tol || x[j] > self.upper[j] + feas_tol {
                return false;
            }
        }
        for (a, b) in &self.eq {
            let lhs: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
            if (lhs - b).abs() > feas_tol {
                return false;
            }
        }
        for (a, b) in &self.ineq {
            let lhs: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
            if lhs > b + feas_tol {
                return false;
            }
        }
        true
    }

    /// A deterministic interior-leaning feasible point: maximize the
    /// minimum slack of the inequality rows and bounds within the
    /// equality subspace.
    pub fn feasible_center(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let d = self.dim();
        // variables: x (d) and slack margin m
        let mut obj = vec![0.0; d + 1];
        obj[d] = 1.0;
        let mut lp = LinearProgram::maximize(obj);
        for j in 0..d {
            lp.set_bounds(j, self.lower[j], self.upper[j]);
            let half = 0.5 * (self.upper[j] - self.lower[j]);
            if half > 0.0 {
                // x_j - m >= l_j  and  x_j + m <= u_j
                let mut r = vec![0.0; d + 1];
                r[j] = -1.0;
                r[d] = 1.0;
                lp.row(r.clone(), RowOp::Le, -self.lower[j]);
                let mut r2 = vec![0.0; d + 1];
                r2[j] = 1.0;
                r2[d] = 1.0;
                lp.row(r2, RowOp::Le, self.upper[j]);
            }
        }
        lp.set_bounds(d, 0.0, f64::INFINITY);
        for (a, b) in &self.eq {
            let mut r = a.clone();
            r.push(0.0);
            lp.row(r, RowOp::Eq, *b);
        }
        for (a, b) in &self.ineq {
            let norm1: f64 = a.iter().map(|c| c.abs()).sum();
            let mut r = a.clone();
            r.push(norm1.max(1e-12));
            lp.row(r, RowOp::Le, *b);
        }
        match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => Ok(sol.x[..d].to_vec()),
            LpOutcome::Infeasible(_) => Err(CoreError::Infeasible("polytope is empty".into())),
            LpOutcome::Unbounded(_) => Err(CoreError::invariant(
                "polytope.center",
                "center program cannot be unbounded on a finite box",
            )),
        }
    }
}

/// Value and (sub/super)gradient at a point.
#[derive(Debug, Clone)]
pub struct OracleEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Oracle signature for the cutting-plane solvers.
pub type Oracle<'a> = dyn FnMut(&[f64]) -> Result<OracleEval> + 'a;

#[derive(Debug, Clone)]
pub struct CutConfig {
    /// Target certified gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra evaluation points seeded before the loop (the polytope
    /// center is always included).
    pub initial_points: Vec<Vec<f64>>,
    /// Optional pre-built cuts `(point, value, gradient)`, e.g. from a
    /// PWL warm start.
    pub seeded_cuts: Vec<(Vec<f64>, f64, Vec<f64>)>,
    /// Model LP size cap; least-relevant cuts are dropped beyond it
    /// (dropping cuts weakens but never invalidates the bound).
    pub max_cuts: usize,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            tol: tol::SADDLE,
            max_iter: 600,
            initial_points: Vec::new(),
            seeded_cuts: Vec::new(),
            max_cuts: 220,
        }
    }
}

/// Certified optimization result. For minimization `bound <= true min <=
/// value`; for maximization `value <= true max <= bound`.
#[derive(Debug, Clone)]
pub struct CertifiedPoint {
    pub point: Vec<f64>,
    pub value: f64,
    pub bound: f64,
    pub certified_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes a convex function over a polytope with a cutting-plane
/// certificate. On iteration-cap exhaustion returns the best-so-far
/// point with `converged = false` and the achieved gap.
pub fn minimize_convex(
    oracle: &mut Oracle,
    polytope: &Polytope,
    cfg: &CutConfig,
) -> Result<CertifiedPoint> {
    polytope.validate()?;
    let d = polytope.dim();

    struct Cut {
        point: Vec<f64>,
        value: f64,
        grad: Vec<f64>,
    }
    let mut cuts: Vec<Cut> = cfg
        .seeded_cuts
        .iter()
        .map(|(p, v, g)| Cut {
            point: p.clone(),
            value: *v,
            grad: g.clone(),
        })
        .collect();

    let mut best_val = f64::INFINITY;
    let mut best_point: Option<Vec<f64>> = None;

    let mut eval_at = |x: &[f64], cuts: &mut Vec<Cut>, best_val: &mut f64, best_point: &mut Option<Vec<f64>>| -> Result<()> {
        let ev = oracle(x)?;
        if ev.value < *best_val {
            *best_val = ev.value;
            *best_point = Some(x.to_vec());
        }
        cuts.push(Cut {
            point: x.to_vec(),
            value: ev.value,
            grad: ev.gradient,
        });
        Ok(())
    };

    let mut starts = cfg.initial_points.clone();
    if starts.is_empty() {
        starts.push(polytope.feasible_center()?);
    }
    for s in &starts {
        eval_at(s, &mut cuts, &mut best_val, &mut best_point)?;
    }

    let mut lower_bound = f64::NEG_INFINITY;
    let mut iterations = 0usize;
    while iterations < cfg.max_iter {
        iterations += 1;

        // Keep the model LP small: drop the cuts with the largest slack
        // at the incumbent (least locally binding) beyond the cap.
        if cuts.len() > cfg.max_cuts {
            if let Some(bp) = &best_point {
                let mut slacks: Vec<(f64, usize)> = cuts
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let lin: f64 = c
                            .grad
                            .iter()
                            .zip(bp.iter().zip(&c.point))
                            .map(|(g, (x, p))| g * (x - p))
                            .sum();
                        (best_val - (c.value + lin), k)
                    })
                    .collect();
                slacks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let keep: std::collections::BTreeSet<usize> = slacks
                    .iter()
                    .take(cfg.max_cuts * 2 / 3)
                    .map(|&(_, k)| k)
                    .collect();
                let mut idx = 0usize;
                cuts.retain(|_| {
                    let k = idx;
                    idx += 1;
                    keep.contains(&k)
                });
            }
        }

        // Model LP: minimize t subject to t >= cut_j(x), x in polytope.
        let mut obj = vec![0.0; d + 1];
        obj[d] = 1.0;
        let mut lp = LinearProgram::minimize(obj);
        for j in 0..d {
            lp.set_bounds(j, polytope.lower[j], polytope.upper[j]);
        }
        lp.free_var(d);
        for (a, b) in &polytope.eq {
            let mut r = a.clone();
            r.push(0.0);
            lp.row(r, RowOp::Eq, *b);
        }
        for (a, b) in &polytope.ineq {
            let mut r = a.clone();
            r.push(0.0);
            lp.row(r, RowOp::Le, *b);
        }
        for c in &cuts {
            // f_j + g_j'(x - x_j) - t <= 0
            let mut r = c.grad.clone();
            r.push(-1.0);
            let rhs: f64 = c.grad.iter().zip(&c.point).map(|(g, p)| g * p).sum::<f64>() - c.value;
            lp.row(r, RowOp::Le, rhs);
        }
        let sol = match solve_lp(&lp)? {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible(_) => {
                return Err(CoreError::Infeasible("cutting-plane model infeasible".into()))
            }
            LpOutcome::Unbounded(_) => {
                return Err(CoreError::invariant(
                    "cutting.model",
                    "model LP unbounded despite finite box",
                ))
            }
        };
        lower_bound = lower_bound.max(sol.x[d]);
        let candidate = sol.x[..d].to_vec();

        if best_val - lower_bound <= cfg.tol {
            break;
        }
        let before = best_val;
        eval_at(&candidate, &mut cuts, &mut best_val, &mut best_point)?;
        if best_val - lower_bound <= cfg.tol {
            break;
        }
        // mild stabilization: when the model step did not improve, also
        // cut at the midpoint toward the incumbent
        if best_val >= before - 1e-16 {
            if let Some(bp) = best_point.clone() {
                let mid: Vec<f64> = bp
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                if polytope.contains(&mid, tol::FEASIBILITY) {
                    eval_at(&mid, &mut cuts, &mut best_val, &mut best_point)?;
                }
            }
        }
    }

    let point = best_point.ok_or_else(|| CoreError::Infeasible("no feasible evaluation".into()))?;
    let gap = best_val - lower_bound;
    Ok(CertifiedPoint {
        point,
        value: best_val,
        bound: lower_bound,
        certified_gap: gap,
        iterations,
        converged: gap <= cfg.tol,
    })
}

/// Maximizes a concave function over a polytope; mirror of
/// [`minimize_convex`].
pub fn maximize_concave(
    oracle: &mut Oracle,
    polytope: &Polytope,
    cfg: &CutConfig,
) -> Result<CertifiedPoint> {
    let mut flipped_cfg = cfg.clone();
    for (_, v, g) in flipped_cfg.seeded_cuts.iter_mut() {
        *v = -*v;
        for gi in g.iter_mut() {
            *gi = -*gi;
        }
    }
    let mut flipped = |x: &[f64]| -> Result<OracleEval> {
        let ev = oracle(x)?;
        Ok(OracleEval {
            value: -ev.value,
            gradient: ev.gradient.iter().map(|g| -g).collect(),
        })
    };
    let r = minimize_convex(&mut flipped, polytope, &flipped_cfg)?;
    Ok(CertifiedPoint {
        point: r.point,
        value: -r.value,
        bound: -r.bound,
        certified_gap: r.certified_gap,
        iterations: r.iterations,
        converged: r.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::utility::UtilityFamily;

    #[test]
    fn monotone_log_on_box_maximizes_at_right_end() {
        let poly = Polytope::bounded_box(vec![0.5], vec![2.0]);
        let mut oracle = |x: &[f64]| {
            Ok(OracleEval {
                value: x[0].ln(),
                gradient: vec![1.0 / x[0]],
            })
        };
        let r = maximize_concave(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 2f64.ln(), epsilon = 1e-7);
        assert_abs_diff_eq!(r.point[0], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn legendre_argmax_of_log_conjugate() {
        // maximize ln x - x over (0, 10]: max at x = 1, value -1 = V(1)
        let poly = Polytope::bounded_box(vec![1e-4], vec![10.0]);
        let mut oracle = |x: &[f64]| {
            Ok(OracleEval {
                value: x[0].ln() - x[0],
                gradient: vec![1.0 / x[0] - 1.0],
            })
        };
        let r = maximize_concave(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn quadratic_interior_max() {
        let poly = Polytope::bounded_box(vec![0.0], vec![1.0]);
        let mut oracle = |x: &[f64]| {
            let d = x[0] - 0.3;
            Ok(OracleEval {
                value: -d * d,
                gradient: vec![-2.0 * d],
            })
        };
        let r = maximize_concave(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.value.abs() <= 1e-7);
        assert_abs_diff_eq!(r.point[0], 0.3, epsilon = 1e-3);
    }

    #[test]
    fn kl_minimization_over_interval() {
        // minimize KL((p,1-p) || (1/3,2/3)) over p in [0.4, 0.6]
        let poly = Polytope::bounded_box(vec![0.4], vec![0.6]);
        let q = [1.0 / 3.0, 2.0 / 3.0];
        let mut oracle = |x: &[f64]| {
            let p = x[0];
            let value = p * (p / q[0]).ln() + (1.0 - p) * ((1.0 - p) / q[1]).ln();
            let gradient = vec![(p / q[0]).ln() - ((1.0 - p) / q[1]).ln()];
            Ok(OracleEval {
                value,
                gradient,
            })
        };
        let r = minimize_convex(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.point[0], 0.4, epsilon = 1e-6);
        assert_abs_diff_eq!(r.value, 0.0097123, epsilon = 1e-6);
    }

    #[test]
    fn linear_over_simplex_hits_vertex() {
        let poly = Polytope::bounded_box(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0])
            .equality(vec![1.0, 1.0, 1.0], 1.0);
        let c = [0.3, -0.2, 0.5];
        let mut oracle = |x: &[f64]| {
            Ok(OracleEval {
                value: c.iter().zip(x).map(|(a, b)| a * b).sum(),
                gradient: c.to_vec(),
            })
        };
        let r = minimize_convex(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, -0.2, epsilon = 1e-8);
        assert_abs_diff_eq!(r.point[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn convex_quadratic_interior_min_has_small_gradient() {
        let poly = Polytope::bounded_box(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let mut oracle = |x: &[f64]| {
            let g = vec![2.0 * (x[0] - 0.1), 4.0 * (x[1] + 0.2)];
            Ok(OracleEval {
                value: (x[0] - 0.1).powi(2) + 2.0 * (x[1] + 0.2).powi(2),
                gradient: g,
            })
        };
        let r = minimize_convex(&mut oracle, &poly, &CutConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.value <= 1e-7);
    }

    #[test]
    fn pwl_warm_start_seeds_cuts() {
        let u = UtilityFamily::log();
        let m = crate::opt::pwl::build_pwl_model(&u, (0.1, 10.0), 1e-4).unwrap();
        let y = 1.0;
        // chords under-estimate inside their segment by at most the
        // certified error, so lift them to stay valid over-estimators
        let lift = m.error_bound;
        let seeded: Vec<(Vec<f64>, f64, Vec<f64>)> = m
            .cuts()
            .into_iter()
            .map(|(x, v, s)| (vec![x], v + lift - y * x, vec![s - y]))
            .collect();
        let poly = Polytope::bounded_box(vec![0.1], vec![10.0]);
        let cfg = CutConfig {
            seeded_cuts: seeded,
            ..CutConfig::default()
        };
        let mut oracle = |x: &[f64]| {
            Ok(OracleEval {
                value: x[0].ln() - y * x[0],
                gradient: vec![1.0 / x[0] - y],
            })
        };
        let r = maximize_concave(&mut oracle, &poly, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 25, "warm start should converge quickly");
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-7);
    }
}
