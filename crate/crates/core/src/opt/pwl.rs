//! Piecewise-linear under-estimators of concave utilities with a
//! certified approximation error, used to warm-start cutting-plane
//! solvers.

use crate::error::{CoreError, Result};
use crate::utility::UtilityFamily;

/// Chord interpolant of a strictly concave function: never above the
/// function, never more than `error_bound` below it on the range.
#[derive(Debug, Clone)]
pub struct PwlUtilityModel {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// Chord slopes per segment, strictly decreasing.
    pub slopes: Vec<f64>,
    /// Certified max gap between the function and the interpolant.
    pub error_bound: f64,
}

impl PwlUtilityModel {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.breakpoints.len();
        if x <= self.breakpoints[0] {
            return self.values[0] + self.slopes[0] * (x - self.breakpoints[0]);
        }
        if x >= self.breakpoints[n - 1] {
            return self.values[n - 1] + self.slopes[n - 2] * (x - self.breakpoints[n - 1]);
        }
        let k = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        self.values[k] + self.slopes[k] * (x - self.breakpoints[k])
    }

    /// Tangent-style cuts `(x_k, value, slope)` for seeding concave
    /// maximization models.
    pub fn cuts(&self) -> Vec<(f64, f64, f64)> {
        (0..self.slopes.len())
            .map(|k| (self.breakpoints[k], self.values[k], self.slopes[k]))
            .collect()
    }
}

/// Builds a certified PWL model of a utility on `[lo, hi]` by adaptive
/// breakpoint insertion at the point of maximal chord gap.
pub fn build_pwl_model(
    utility: &UtilityFamily,
    range: (f64, f64),
    max_error: f64,
) -> Result<PwlUtilityModel> {
    build_pwl_from_fn(&|x| utility.u(x), range, max_error)
}

/// Same construction for an arbitrary concave function (used by tests to
/// exercise the strict-concavity contract).
pub fn build_pwl_from_fn(
    f: &dyn Fn(f64) -> f64,
    (lo, hi): (f64, f64),
    max_error: f64,
) -> Result<PwlUtilityModel> {
    if !(lo > 0.0) {
        return Err(CoreError::invariant(
            "pwl.range",
            "range must start strictly above 0 for Inada utilities",
        ));
    }
    if !(lo < hi) {
        return Err(CoreError::invariant("pwl.range", "range must be nondegenerate"));
    }
    if !(max_error > 0.0) {
        return Err(CoreError::invariant("pwl.eps", "max error must be positive"));
    }

    // Max gap between f and the chord over [a, b], by golden section.
    let seg_gap = |a: f64, b: f64| -> (f64, f64) {
        let fa = f(a);
        let slope = (f(b) - fa) / (b - a);
        let g = |x: f64| f(x) - (fa + slope * (x - a));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut l, mut r) = (a, b);
        let (mut c, mut d) = (r - phi * (r - l), l + phi * (r - l));
        for _ in 0..120 {
            if g(c) > g(d) {
                r = d;
            } else {
                l = c;
            }
            c = r - phi * (r - l);
            d = l + phi * (r - l);
            if r - l <= 1e-14 * (1.0 + r.abs()) {
                break;
            }
        }
        let xm = 0.5 * (l + r);
        (xm, g(xm))
    };

    let mut points = vec![lo, hi];
    let mut queue = vec![(lo, hi)];
    while let Some((a, b)) = queue.pop() {
        let (xm, gap) = seg_gap(a, b);
        if gap > max_error && points.len() < 100_000 {
            // guard against stagnating splits on near-flat segments
            let xm = if xm <= a + 1e-13 * (1.0 + a.abs()) || xm >= b - 1e-13 * (1.0 + b.abs()) {
                0.5 * (a + b)
            } else {
                xm
            };
            points.push(xm);
            queue.push((a, xm));
            queue.push((xm, b));
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();

    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let mut slopes = Vec::with_capacity(points.len() - 1);
    for k in 0..points.len() - 1 {
        slopes.push((values[k + 1] - values[k]) / (points[k + 1] - points[k]));
    }
    for w in slopes.windows(2) {
        if !(w[1] < w[0]) {
            return Err(CoreError::invariant(
                "pwl.concavity",
                "chord slopes must strictly decrease; function is not strictly concave on the range",
            ));
        }
    }

    // Certify the residual gap on the final segmentation; a segment whose
    // midpoint does not lie strictly above the chord betrays a function
    // that is not strictly concave there.
    let mut error_bound: f64 = 0.0;
    for k in 0..points.len() - 1 {
        let (a, b) = (points[k], points[k + 1]);
        let mid = 0.5 * (a + b);
        let chord_mid = 0.5 * (f(a) + f(b));
        if !(f(mid) > chord_mid) {
            return Err(CoreError::invariant(
                "pwl.concavity",
                "function is not strictly concave on the range",
            ));
        }
        let (_, gap) = seg_gap(a, b);
        error_bound = error_bound.max(gap);
    }
    if error_bound > max_error {
        return Err(CoreError::NonConvergence {
            context: "pwl refinement hit the breakpoint cap".into(),
            gap: error_bound,
        });
    }

    Ok(PwlUtilityModel {
        breakpoints: points,
        values,
        slopes,
        error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_model_meets_error_bound() {
        let u = UtilityFamily::log();
        let m = build_pwl_model(&u, (0.1, 10.0), 1e-4).unwrap();
        assert!(m.error_bound <= 1e-4);
        for w in m.slopes.windows(2) {
            assert!(w[1] < w[0]);
        }
        // dense probe: under-estimates by at most eps, never over-estimates
        for k in 0..=5000 {
            let x = 0.1 + (10.0 - 0.1) * k as f64 / 5000.0;
            let gap = u.u(x) - m.eval(x);
            assert!(gap >= -1e-12, "overestimate at {x}: {gap}");
            assert!(gap <= 1e-4 + 1e-12, "underestimate too large at {x}: {gap}");
        }
    }

    #[test]
    fn linear_function_is_rejected() {
        let err = build_pwl_from_fn(&|x| 2.0 * x + 1.0, (0.5, 2.0), 1e-3);
        assert!(err.is_err());
    }

    #[test]
    fn loose_tolerance_needs_two_breakpoints() {
        let u = UtilityFamily::log();
        let m = build_pwl_model(&u, (1.0, 2.0), 10.0).unwrap();
        assert_eq!(m.breakpoints.len(), 2);
    }

    #[test]
    fn range_touching_zero_is_rejected() {
        let u = UtilityFamily::log();
        assert!(build_pwl_model(&u, (0.0, 1.0), 1e-3).is_err());
    }
}
