//! Utility families with their convex conjugates and inverse marginal
//! maps.
//!
//! Three families are supported: `log`, `power(p)` with `U(x) = x^p / p`,
//! and the bounded family `bexp(p)` with `U(x) = 1 - exp(-x^p)`. All are
//! strictly increasing, strictly concave and satisfy both Inada
//! conditions; only `bexp` is bounded above.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::opt::tol;

/// A parametric utility on `(0, inf)` with analytic or certified-numeric
/// conjugate `V(y) = sup_x (U(x) - x y)` and inverse marginal
/// `I = (U')^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityFamily {
    Log,
    Power { exponent: f64 },
    BoundedExp { exponent: f64 },
}

impl UtilityFamily {
    pub fn log() -> Self {
        UtilityFamily::Log
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(CoreError::UtilityDomain(format!(
                "power exponent must lie in (0,1), got {p}"
            )));
        }
        Ok(UtilityFamily::Power { exponent: p })
    }

    pub fn bounded_exp(p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(CoreError::UtilityDomain(format!(
                "bounded-exp exponent must lie in (0,1), got {p}"
            )));
        }
        Ok(UtilityFamily::BoundedExp { exponent: p })
    }

    /// Whether `U` is bounded above (so `V(0) = sup U` is finite).
    pub fn is_bounded(&self) -> bool {
        matches!(self, UtilityFamily::BoundedExp { .. })
    }

    /// `U(x)` for `x > 0`. Arguments below the clamp floor are evaluated
    /// at the floor (callers detect that through `clamped`).
    pub fn u(&self, x: f64) -> f64 {
        let x = clamp_domain(x);
        match self {
            UtilityFamily::Log => x.ln(),
            UtilityFamily::Power { exponent } => x.powf(*exponent) / exponent,
            UtilityFamily::BoundedExp { exponent } => 1.0 - (-x.powf(*exponent)).exp(),
        }
    }

    /// `U'(x)`, strictly decreasing and positive.
    pub fn u_prime(&self, x: f64) -> f64 {
        let x = clamp_domain(x);
        match self {
            UtilityFamily::Log => 1.0 / x,
            UtilityFamily::Power { exponent } => x.powf(exponent - 1.0),
            UtilityFamily::BoundedExp { exponent } => {
                let xp = x.powf(*exponent);
                exponent * x.powf(exponent - 1.0) * (-xp).exp()
            }
        }
    }

    /// `U''(x) < 0`.
    pub fn u_second(&self, x: f64) -> f64 {
        let x = clamp_domain(x);
        match self {
            UtilityFamily::Log => -1.0 / (x * x),
            UtilityFamily::Power { exponent } => (exponent - 1.0) * x.powf(exponent - 2.0),
            UtilityFamily::BoundedExp { exponent } => {
                let p = *exponent;
                let xp = x.powf(p);
                p * x.powf(p - 2.0) * (-xp).exp() * ((p - 1.0) - p * xp)
            }
        }
    }

    /// True if `x` would be clamped before evaluation.
    pub fn clamped(&self, x: f64) -> bool {
        x < tol::XMIN
    }

    /// Convex conjugate `V(y)`. Closed forms for log/power; root-based
    /// evaluation for the bounded family. `y = 0` is allowed only for
    /// bounded families and returns `sup U`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(CoreError::UtilityDomain(format!("conjugate needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return match self {
                UtilityFamily::BoundedExp { .. } => Ok(1.0),
                _ => Err(CoreError::UtilityDomain(
                    "conjugate at y = 0 requires a bounded utility".into(),
                )),
            };
        }
        Ok(match self {
            UtilityFamily::Log => -y.ln() - 1.0,
            UtilityFamily::Power { exponent } => {
                let p = *exponent;
                (1.0 - p) / p * y.powf(p / (p - 1.0))
            }
            UtilityFamily::BoundedExp { .. } => {
                let x = self.inverse_marginal(y)?;
                self.u(x) - x * y
            }
        })
    }

    /// `V'(y) = -I(y)`.
    pub fn conjugate_prime(&self, y: f64) -> Result<f64> {
        Ok(-self.inverse_marginal(y)?)
    }

    /// `V''(y) = -1 / U''(I(y)) > 0`.
    pub fn conjugate_second(&self, y: f64) -> Result<f64> {
        let x = self.inverse_marginal(y)?;
        Ok(-1.0 / self.u_second(x))
    }

    /// Inverse marginal utility `I(y) = (U')^{-1}(y)` for `y > 0`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(CoreError::UtilityDomain(format!(
                "inverse marginal needs y > 0, got {y}"
            )));
        }
        Ok(match self {
            UtilityFamily::Log => 1.0 / y,
            UtilityFamily::Power { exponent } => y.powf(1.0 / (exponent - 1.0)),
            UtilityFamily::BoundedExp { exponent } => bexp_inverse_marginal(*exponent, y),
        })
    }
}

fn clamp_domain(x: f64) -> f64 {
    if x < tol::XMIN {
        tol::XMIN
    } else {
        x
    }
}

/// Solves `p x^{p-1} exp(-x^p) = y` for `x` in log coordinates, where the
/// left side is strictly decreasing. Safeguarded Newton to relative
/// tolerance well below `tol::INVERSE_MARGINAL`.
fn bexp_inverse_marginal(p: f64, y: f64) -> f64 {
    // h(t) = ln p + (p-1) t - exp(p t) - ln y, t = ln x; h strictly decreasing.
    let h = |t: f64| p.ln() + (p - 1.0) * t - (p * t).exp() - y.ln();
    let h_prime = |t: f64| (p - 1.0) - p * (p * t).exp();

    // Bracket from the two asymptotic regimes.
    let t_small = (p.ln() - y.ln()) / (1.0 - p); // exp(pt) negligible
    let big = (1.0f64).max(-y.ln() + p.ln());
    let t_big = big.ln() / p; // exp(pt) dominant
    let mut lo = t_small.min(t_big) - 5.0;
    let mut hi = t_small.max(t_big) + 5.0;
    while h(lo) < 0.0 {
        lo -= 10.0;
    }
    while h(hi) > 0.0 {
        hi += 10.0;
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = h(t);
        if v > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dv = h_prime(t);
        let newton = t - v / dv;
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-14 * (1.0 + t.abs()) {
            break;
        }
    }
    t.exp()
}

/// Numeric diagnostics for the standing utility assumptions: Inada slopes
/// at the probe extremes, an asymptotic-elasticity proxy on the upper
/// probes, and boundedness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityReport {
    /// `U'` at the smallest probe (should be large).
    pub slope_at_zero: f64,
    /// `U'` at the largest probe (should be small).
    pub slope_at_infinity: f64,
    /// Max of `x U'(x) / U(x)` over upper probes with `U > 0`.
    pub ae_proxy: f64,
    /// Tail samples `(x, x U'(x)/U(x))` used for the proxy.
    pub ae_samples: Vec<(f64, f64)>,
    pub bounded: bool,
    /// Set for unbounded families admitted only as test oracles.
    pub boundedness_warning: bool,
}

/// Probes the Inada conditions, asymptotic elasticity and boundedness on
/// a grid spanning at least six orders of magnitude.
pub fn validate_utility(utility: &UtilityFamily, probes: &[f64]) -> Result<UtilityReport> {
    if probes.len() < 2 {
        return Err(CoreError::invariant("utility.probes", "need at least two probes"));
    }
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = *sorted.last().unwrap();
    if !(lo > 0.0) || hi / lo < 1e6 {
        return Err(CoreError::invariant(
            "utility.probes",
            "probe grid must be positive and span >= 6 orders of magnitude",
        ));
    }

    // Upper probes: the top geometric third of the grid.
    let cut = lo * (hi / lo).powf(2.0 / 3.0);
    let mut ae_samples = Vec::new();
    for &x in sorted.iter().filter(|&&x| x >= cut) {
        let u = utility.u(x);
        if u > 0.0 {
            ae_samples.push((x, x * utility.u_prime(x) / u));
        }
    }
    let ae_proxy = ae_samples
        .iter()
        .map(|&(_, e)| e)
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(UtilityReport {
        slope_at_zero: utility.u_prime(lo),
        slope_at_infinity: utility.u_prime(hi),
        ae_proxy,
        ae_samples,
        bounded: utility.is_bounded(),
        boundedness_warning: !utility.is_bounded(),
    })
}

/// Standard probe grid for `validate_utility`: log-spaced over
/// `[1e-4, 1e4]`.
pub fn default_probe_grid() -> Vec<f64> {
    (0..33).map(|k| 1e-4 * 10f64.powf(k as f64 / 4.0)).collect()
}
