//! Superhedging LP, calibrated-expectation duality, and executable polar
//! checks for the claim cone: membership by hedging witness or rejecting
//! density, boundedness-in-probability inequalities, and scope handling
//! for measure-restricted domination.

use crate::error::{CoreError, Result};
use crate::market::{payoff_matrix, PathSpace, TradingStrategy};
use crate::measures::{MartingaleSystem, Measure};
use crate::opt::lp::{solve_lp, LinearProgram, LpOutcome, RowOp};
use crate::opt::tol;

/// A nonnegative terminal claim with its domination scope.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimVector {
    pub values: Vec<f64>,
    /// Paths on which domination is required; `None` means the whole
    /// grid.
    pub scope: Option<Vec<bool>>,
}

impl ClaimVector {
    pub fn on_grid(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    pub fn on_support(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        Self::new(values, Some(mask))
    }

    fn new(values: Vec<f64>, scope: Option<Vec<bool>>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invariant(
                "claim.values",
                "claims live in the nonnegative cone",
            ));
        }
        if let Some(mask) = &scope {
            if mask.len() != values.len() {
                return Err(CoreError::invariant("claim.scope", "scope length mismatch"));
            }
        }
        Ok(ClaimVector { values, scope })
    }

    fn mask(&self, n: usize) -> Vec<bool> {
        self.scope.clone().unwrap_or_else(|| vec![true; n])
    }
}

/// Superhedging result: least initial capital and a witness strategy
/// dominating the claim on the scope.
#[derive(Debug, Clone)]
pub struct SuperhedgeResult {
    pub price: f64,
    pub strategy: TradingStrategy,
}

/// Minimal `x` such that `x + (stock trading) + (option positions)`
/// dominates the claim pathwise on its scope.
pub fn superhedge_price(
    claim: &ClaimVector,
    space: &PathSpace,
    system: &MartingaleSystem,
) -> Result<SuperhedgeResult> {
    let n = space.path_count();
    if claim.values.len() != n {
        return Err(CoreError::invariant("claim.len", "claim length mismatch"));
    }
    let mask = claim.mask(n);
    let a = payoff_matrix(space, &system.instruments, system.time_zero);
    let d = a.ncols();

    // variables: x, z_0..z_{d-1} (all free)
    let mut lp = LinearProgram::minimize({
        let mut c = vec![0.0; d + 1];
        c[0] = 1.0;
        c
    });
    for j in 0..=d {
        lp.free_var(j);
    }
    for w in 0..n {
        if !mask[w] {
            continue;
        }
        let mut r = vec![0.0; d + 1];
        r[0] = 1.0;
        for j in 0..d {
            r[j + 1] = a[(w, j)];
        }
        lp.row(r, RowOp::Ge, claim.values[w]);
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => {
            let trading = space.trading_nodes(system.time_zero);
            let strategy = TradingStrategy {
                initial: sol.x[0],
                stock_holdings: sol.x[1..1 + trading.len()].to_vec(),
                option_holdings: sol.x[1 + trading.len()..].to_vec(),
                time_zero: system.time_zero,
            };
            Ok(SuperhedgeResult {
                price: sol.objective,
                strategy,
            })
        }
        LpOutcome::Unbounded(_) => Err(CoreError::Unbounded(
            "superhedging price diverges: the scope admits an arbitrage direction".into(),
        )),
        LpOutcome::Infeasible(_) => Err(CoreError::invariant(
            "superhedge.lp",
            "domination is always feasible for bounded claims",
        )),
    }
}

/// Maximal expectation of the claim over calibrated measures charged
/// only inside the scope. Errors if the restricted polytope is empty.
pub fn max_calibrated_expectation(
    claim: &ClaimVector,
    system: &MartingaleSystem,
) -> Result<(f64, Measure)> {
    let n = system.n_paths;
    if claim.values.len() != n {
        return Err(CoreError::invariant("claim.len", "claim length mismatch"));
    }
    let mask = claim.mask(n);
    let mut lp = LinearProgram::maximize(claim.values.clone());
    for (j, &on) in mask.iter().enumerate() {
        if on {
            lp.set_bounds(j, 0.0, f64::INFINITY);
        } else {
            lp.set_bounds(j, 0.0, 0.0);
        }
    }
    for (coeffs, rhs) in &system.rows {
        lp.row(coeffs.clone(), RowOp::Eq, *rhs);
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => Ok((sol.objective, Measure::new(sol.x)?)),
        LpOutcome::Infeasible(cert) => Err(CoreError::Infeasible(format!(
            "no calibrated measure inside the scope (violation {:.3e})",
            cert.certified_violation
        ))),
        LpOutcome::Unbounded(_) => Err(CoreError::invariant(
            "calibrated.lp",
            "expectation over a probability polytope is bounded",
        )),
    }
}

/// Two-sided duality check: the superhedging price must equal the
/// maximal calibrated expectation, each side solved as its own LP.
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub price: f64,
    pub expectation: f64,
    pub gap: f64,
    pub pass: bool,
}

pub fn duality_gap(
    claim: &ClaimVector,
    space: &PathSpace,
    system: &MartingaleSystem,
) -> Result<DualityReport> {
    let hedge = superhedge_price(claim, space, system)?;
    let (expectation, _) = max_calibrated_expectation(claim, system)?;
    let gap = (hedge.price - expectation).abs();
    Ok(DualityReport {
        price: hedge.price,
        expectation,
        gap,
        pass: gap <= tol::DUALITY_GAP,
    })
}

/// Outcome of the polar membership test for the unit-capital claim cone
/// under a measure `P`.
#[derive(Debug, Clone)]
pub enum PolarMembership {
    /// `sup_Q E_Q[c] <= 1`: a strategy from capital 1 dominates `c` on
    /// the support of `P`.
    Member {
        strategy: TradingStrategy,
        max_expectation: f64,
    },
    /// A calibrated `Q` charged inside `supp(P)` with `E_P[c dQ/dP] > 1`.
    Rejected {
        witness_q: Measure,
        /// `dQ/dP` on the support of `P`, zero elsewhere.
        density: Vec<f64>,
        product: f64,
    },
}

/// Tests `c` for membership in the unit-capital claim cone under `P`:
/// either returns a superhedging witness from wealth 1 or the rejecting
/// calibrated density.
pub fn polar_membership(
    claim_values: &[f64],
    p: &Measure,
    space: &PathSpace,
    system: &MartingaleSystem,
) -> Result<PolarMembership> {
    let n = space.path_count();
    if claim_values.len() != n || p.len() != n {
        return Err(CoreError::invariant("polar.len", "length mismatch"));
    }
    let mask = p.support_mask();
    let claim = ClaimVector::on_support(claim_values.to_vec(), mask.clone())?;
    let (max_expectation, q_star) = max_calibrated_expectation(&claim, system)?;
    if max_expectation <= 1.0 + tol::FEASIBILITY {
        let hedge = superhedge_price(&claim, space, system)?;
        let mut strategy = hedge.strategy;
        // domination from exactly one unit of capital
        strategy.initial = 1.0;
        Ok(PolarMembership::Member {
            strategy,
            max_expectation,
        })
    } else {
        let density: Vec<f64> = (0..n)
            .map(|w| {
                if p.weight(w) > 0.0 {
                    q_star.weight(w) / p.weight(w)
                } else {
                    0.0
                }
            })
            .collect();
        let product: f64 = (0..n)
            .map(|w| p.weight(w) * claim_values[w] * density[w])
            .sum();
        Ok(PolarMembership::Rejected {
            witness_q: q_star,
            density,
            product,
        })
    }
}

/// Boundedness-in-probability inequality for certified claims: with `d =
/// dQ/dP`, `P(c > K) <= P(d <= 1/sqrt(K)) + E_P[d c] / sqrt(K)` computed
/// by direct summation.
#[derive(Debug, Clone)]
pub struct L0BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn l0_bound_check(p: &Measure, q: &Measure, claim_values: &[f64], k: f64) -> Result<L0BoundReport> {
    if p.len() != q.len() || claim_values.len() != p.len() {
        return Err(CoreError::invariant("l0.len", "length mismatch"));
    }
    if p.support_mask() != q.support_mask() {
        return Err(CoreError::invariant(
            "l0.equivalence",
            "the inequality requires equivalent measures",
        ));
    }
    if !(k > 0.0) {
        return Err(CoreError::invariant("l0.k", "threshold must be positive"));
    }
    let rk = k.sqrt();
    let mut lhs = 0.0;
    let mut tail = 0.0;
    let mut product = 0.0;
    for w in 0..p.len() {
        let pw = p.weight(w);
        if pw == 0.0 {
            continue;
        }
        let d = q.weight(w) / pw;
        if claim_values[w] > k {
            lhs += pw;
        }
        if d <= 1.0 / rk {
            tail += pw;
        }
        product += pw * d * claim_values[w];
    }
    let rhs = tail + product / rk;
    Ok(L0BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{build_path_space, MarketGrid};
    use crate::measures::{build_martingale_system, CalibrationSpec};
    use approx::assert_abs_diff_eq;

    fn binomial() -> (PathSpace, MartingaleSystem) {
        let space =
            build_path_space(&MarketGrid::new(1.0, vec![vec![0.5, 2.0]], None).unwrap()).unwrap();
        let system =
            build_martingale_system(&space, &CalibrationSpec::Options(vec![]), true).unwrap();
        (space, system)
    }

    #[test]
    fn call_replication_price() {
        let (space, system) = binomial();
        // call payoff: 0 on the down path, 1 on the up path
        let claim = ClaimVector::on_grid(vec![0.0, 1.0]).unwrap();
        let r = superhedge_price(&claim, &space, &system).unwrap();
        assert_abs_diff_eq!(r.price, 1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.strategy.stock_holdings[0], 2.0 / 3.0, epsilon = 1e-9);

        let scaled = ClaimVector::on_grid(vec![0.0, 4.0]).unwrap();
        let r4 = superhedge_price(&scaled, &space, &system).unwrap();
        assert_abs_diff_eq!(r4.price, 4.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_claim_costs_itself() {
        let (space, system) = binomial();
        let claim = ClaimVector::on_grid(vec![1.0, 1.0]).unwrap();
        let r = superhedge_price(&claim, &space, &system).unwrap();
        assert_abs_diff_eq!(r.price, 1.0, epsilon = 1e-10);
        assert!(r.strategy.stock_holdings[0].abs() <= 1e-9);
    }

    #[test]
    fn calibrated_expectation_examples() {
        let (_, system) = binomial();
        let call = ClaimVector::on_grid(vec![0.0, 1.0]).unwrap();
        let (v, q) = max_calibrated_expectation(&call, &system).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q.weight(1), 1.0 / 3.0, epsilon = 1e-9);

        let wealth = ClaimVector::on_grid(vec![0.9, 1.2]).unwrap();
        let (vw, _) = max_calibrated_expectation(&wealth, &system).unwrap();
        assert_abs_diff_eq!(vw, 1.0, epsilon = 1e-10);

        let one = ClaimVector::on_grid(vec![1.0, 1.0]).unwrap();
        let (v1, _) = max_calibrated_expectation(&one, &system).unwrap();
        assert_abs_diff_eq!(v1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn duality_gap_on_binomial_call() {
        let (space, system) = binomial();
        let call = ClaimVector::on_grid(vec![0.0, 1.0]).unwrap();
        let rep = duality_gap(&call, &space, &system).unwrap();
        assert!(rep.pass);
        assert!(rep.gap <= 1e-10);
    }

    #[test]
    fn polar_membership_cases() {
        let (space, system) = binomial();
        let p = Measure::new(vec![0.6, 0.4]).unwrap();

        // wealth (0.9, 1.2): max calibrated expectation exactly 1
        match polar_membership(&[0.9, 1.2], &p, &space, &system).unwrap() {
            PolarMembership::Member {
                strategy,
                max_expectation,
            } => {
                assert_abs_diff_eq!(max_expectation, 1.0, epsilon = 1e-9);
                // witness dominates from wealth 1
                let w0 = 1.0 + strategy.stock_holdings[0] * (0.5 - 1.0);
                let w1 = 1.0 + strategy.stock_holdings[0] * (2.0 - 1.0);
                assert!(w0 >= 0.9 - 1e-9 && w1 >= 1.2 - 1e-9);
            }
            other => panic!("expected member, got {other:?}"),
        }

        match polar_membership(&[0.0, 2.0], &p, &space, &system).unwrap() {
            PolarMembership::Member { max_expectation, .. } => {
                assert_abs_diff_eq!(max_expectation, 2.0 / 3.0, epsilon = 1e-9);
            }
            other => panic!("expected member, got {other:?}"),
        }

        match polar_membership(&[0.0, 4.0], &p, &space, &system).unwrap() {
            PolarMembership::Rejected { density, product, .. } => {
                assert_abs_diff_eq!(product, 4.0 / 3.0, epsilon = 1e-9);
                assert_abs_diff_eq!(density[0], (2.0 / 3.0) / 0.6, epsilon = 1e-9);
                assert_abs_diff_eq!(density[1], (1.0 / 3.0) / 0.4, epsilon = 1e-9);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn l0_bound_examples() {
        let p = Measure::new(vec![0.6, 0.4]).unwrap();
        let q = Measure::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let c = vec![0.9, 1.2];

        let r4 = l0_bound_check(&p, &q, &c, 4.0).unwrap();
        assert_abs_diff_eq!(r4.lhs, 0.0, epsilon = 1e-15);
        assert!(r4.holds);

        let r1 = l0_bound_check(&p, &q, &c, 1.0).unwrap();
        assert_abs_diff_eq!(r1.lhs, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r1.rhs, 0.4 + 1.0, epsilon = 1e-9);
        assert!(r1.holds);
    }

    #[test]
    fn solidity_of_membership() {
        let (space, system) = binomial();
        let p = Measure::new(vec![0.5, 0.5]).unwrap();
        // certified c and a smaller claim
        let c = [0.9, 1.2];
        let smaller = [0.5, 1.0];
        assert!(matches!(
            polar_membership(&c, &p, &space, &system).unwrap(),
            PolarMembership::Member { .. }
        ));
        assert!(matches!(
            polar_membership(&smaller, &p, &space, &system).unwrap(),
            PolarMembership::Member { .. }
        ));
    }
}
