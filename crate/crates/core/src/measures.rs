//! Probability measures on the path space, the calibrated martingale
//! polytope (option and marginal calibration), and ambiguity sets
//! (finite hulls and density bands around the martingale polytope).

use crate::error::{CoreError, Result};
use crate::market::{payoff_matrix, Instrument, OptionContract, PathSpace};
use crate::opt::lp::{solve_lp, LinearProgram, LpOutcome, RowOp};
use crate::opt::tol;

/// A probability measure on the enumerated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    /// Validates and sanitizes weights: tiny negatives and dust below
    /// `tol::SUPPORT_EPS` are clamped to exact zeros, then the vector is
    /// renormalized so the stored invariant `|sum - 1| <= 1e-12` holds.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let mut w = weights;
        for v in w.iter_mut() {
            if !v.is_finite() {
                return Err(CoreError::invariant("measure.weights", "non-finite weight"));
            }
            if *v < -1e-10 {
                return Err(CoreError::invariant(
                    "measure.weights",
                    format!("negative weight {v}"),
                ));
            }
            if v.abs() <= tol::SUPPORT_EPS {
                *v = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::invariant(
                "measure.normalization",
                format!("weights sum to {sum}"),
            ));
        }
        for v in w.iter_mut() {
            *v /= sum;
        }
        Ok(Measure { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, path: usize) -> f64 {
        self.weights[path]
    }

    /// Paths with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.weights.iter().map(|&w| w > 0.0).collect()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Convex combination of two measures on the same path space.
    pub fn mix(lambda: f64, a: &Measure, b: &Measure) -> Result<Measure> {
        Measure::new(
            a.weights
                .iter()
                .zip(&b.weights)
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                .collect(),
        )
    }
}

/// Calibration data defining the martingale polytope.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationSpec {
    /// Quoted options; rows force zero expected net payoff.
    Options(Vec<OptionContract>),
    /// Per-period marginal masses over the grid levels
    /// (`marginals[t][level_index]`); rows pin every level probability.
    Marginals(Vec<Vec<f64>>),
}

/// Linear equality system whose nonnegative solutions are exactly the
/// calibrated martingale measures: one row per trading node (conditional
/// martingale property), one per calibration instrument, and one
/// normalization row.
#[derive(Debug, Clone)]
pub struct MartingaleSystem {
    /// `(coefficients over paths, rhs)`.
    pub rows: Vec<(Vec<f64>, f64)>,
    pub n_paths: usize,
    pub node_row_count: usize,
    pub calibration_row_count: usize,
    /// Strategy instruments matching the calibration rows one-to-one.
    pub instruments: Vec<Instrument>,
    pub time_zero: bool,
}

/// Builds the martingale system for a calibration spec.
///
/// Marginal mode checks that each marginal is a probability vector with
/// mean equal to the spot before emitting rows.
pub fn build_martingale_system(
    space: &PathSpace,
    calibration: &CalibrationSpec,
    time_zero: bool,
) -> Result<MartingaleSystem> {
    let n = space.path_count();
    let instruments: Vec<Instrument> = match calibration {
        CalibrationSpec::Options(opts) => {
            for o in opts {
                o.validate(space)?;
            }
            opts.iter().cloned().map(Instrument::Quoted).collect()
        }
        CalibrationSpec::Marginals(marginals) => {
            if marginals.len() != space.grid.periods {
                return Err(CoreError::invariant(
                    "marginals.periods",
                    format!(
                        "{} marginals for {} periods",
                        marginals.len(),
                        space.grid.periods
                    ),
                ));
            }
            let mut digitals = Vec::new();
            for (t, masses) in marginals.iter().enumerate() {
                let levels = &space.grid.levels[t];
                if masses.len() != levels.len() {
                    return Err(CoreError::invariant(
                        "marginals.levels",
                        format!("period {} has {} masses for {} levels", t + 1, masses.len(), levels.len()),
                    ));
                }
                if masses.iter().any(|&m| m < 0.0) {
                    return Err(CoreError::invariant("marginals.mass", "negative marginal mass"));
                }
                let total: f64 = masses.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(CoreError::invariant(
                        "marginals.normalization",
                        format!("period {} marginal sums to {total}", t + 1),
                    ));
                }
                let mean: f64 = masses.iter().zip(levels).map(|(m, l)| m * l).sum();
                if (mean - space.grid.spot).abs() > 1e-9 {
                    return Err(CoreError::invariant(
                        "marginals.mean",
                        format!(
                            "period {} marginal mean {} differs from spot {}",
                            t + 1,
                            mean,
                            space.grid.spot
                        ),
                    ));
                }
                for li in 0..levels.len() {
                    digitals.push(Instrument::Digital {
                        time: t + 1,
                        level_index: li,
                        mass: masses[li],
                    });
                }
            }
            digitals
        }
    };

    // Node and calibration rows are the transposed columns of the
    // semi-static payoff matrix; calibrated measures annihilate them all.
    let a = payoff_matrix(space, &instruments, time_zero);
    let node_count = space.trading_nodes(time_zero).len();
    let mut rows = Vec::with_capacity(a.ncols() + 1);
    for j in 0..a.ncols() {
        rows.push((a.column(j).iter().copied().collect::<Vec<f64>>(), 0.0));
    }
    rows.push((vec![1.0; n], 1.0));

    Ok(MartingaleSystem {
        rows,
        n_paths: n,
        node_row_count: node_count,
        calibration_row_count: instruments.len(),
        instruments,
        time_zero,
    })
}

/// Result of a calibrated-measure search.
#[derive(Debug, Clone)]
pub enum CalibrationOutcome {
    Feasible {
        measure: Measure,
        /// Achieved max-min weight over the required support.
        min_weight: f64,
    },
    Infeasible {
        /// Positive certified violation, or the equivalence shortfall.
        violation: f64,
    },
}

impl CalibrationOutcome {
    pub fn feasible(self) -> Result<(Measure, f64)> {
        match self {
            CalibrationOutcome::Feasible { measure, min_weight } => Ok((measure, min_weight)),
            CalibrationOutcome::Infeasible { violation } => Err(CoreError::Infeasible(format!(
                "no calibrated measure on the required support (violation {violation:.3e})"
            ))),
        }
    }
}

impl MartingaleSystem {
    /// Max residual of the equality rows at a candidate weight vector.
    pub fn residual(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(coeffs, rhs)| {
                (coeffs.iter().zip(q).map(|(c, w)| c * w).sum::<f64>() - rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Finds a calibrated measure maximizing the minimum weight over the
    /// required support (all paths when `support` is `None`); weights off
    /// the support are pinned to zero.
    pub fn find_calibrated_measure(&self, support: Option<&[bool]>) -> Result<CalibrationOutcome> {
        let n = self.n_paths;
        let mask: Vec<bool> = match support {
            Some(m) => {
                if m.len() != n {
                    return Err(CoreError::invariant("support.len", "mask length mismatch"));
                }
                m.to_vec()
            }
            None => vec![true; n],
        };
        // variables: q_0..q_{n-1}, m
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::maximize(obj);
        for (j, &on) in mask.iter().enumerate() {
            if on {
                lp.set_bounds(j, 0.0, f64::INFINITY);
            } else {
                lp.set_bounds(j, 0.0, 0.0);
            }
        }
        lp.set_bounds(n, 0.0, 1.0);
        for (coeffs, rhs) in &self.rows {
            let mut r = coeffs.clone();
            r.push(0.0);
            lp.row(r, RowOp::Eq, *rhs);
        }
        for (j, &on) in mask.iter().enumerate() {
            if on {
                let mut r = vec![0.0; n + 1];
                r[j] = 1.0;
                r[n] = -1.0;
                lp.row(r, RowOp::Ge, 0.0);
            }
        }
        match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => {
                let measure = Measure::new(sol.x[..n].to_vec())?;
                Ok(CalibrationOutcome::Feasible {
                    measure,
                    min_weight: sol.x[n],
                })
            }
            LpOutcome::Infeasible(cert) => Ok(CalibrationOutcome::Infeasible {
                violation: cert.certified_violation.max(0.0),
            }),
            LpOutcome::Unbounded(_) => Err(CoreError::invariant(
                "calibration.lp",
                "bounded feasibility program cannot be unbounded",
            )),
        }
    }

    /// Finds a calibrated measure with support exactly equal to the
    /// support of `p` (the equivalence required of reasonable beliefs).
    /// Feasible solutions whose minimum on-support weight falls below the
    /// certification threshold are reported as infeasible-as-equivalent.
    pub fn equivalent_martingale_for(&self, p: &Measure) -> Result<CalibrationOutcome> {
        if p.len() != self.n_paths {
            return Err(CoreError::invariant("measure.len", "path count mismatch"));
        }
        let mask = p.support_mask();
        match self.find_calibrated_measure(Some(&mask))? {
            CalibrationOutcome::Feasible { measure, min_weight } => {
                if min_weight >= tol::EQUIV_MIN_WEIGHT {
                    Ok(CalibrationOutcome::Feasible { measure, min_weight })
                } else {
                    Ok(CalibrationOutcome::Infeasible {
                        violation: tol::EQUIV_MIN_WEIGHT - min_weight,
                    })
                }
            }
            infeasible => Ok(infeasible),
        }
    }

    /// Paths chargeable by some calibrated measure. Computed by max-min
    /// search plus per-path probes for the forced zeros.
    pub fn polar_support(&self) -> Result<Vec<bool>> {
        let n = self.n_paths;
        let mut mask = vec![true; n];
        loop {
            match self.find_calibrated_measure(Some(&mask))? {
                CalibrationOutcome::Infeasible { violation } => {
                    return Err(CoreError::Infeasible(format!(
                        "martingale polytope is empty (violation {violation:.3e})"
                    )));
                }
                CalibrationOutcome::Feasible { measure, min_weight } => {
                    if min_weight > tol::EQUIV_MIN_WEIGHT {
                        return Ok(mask);
                    }
                    // probe the currently-zero paths for forced zeros
                    let mut changed = false;
                    for j in 0..n {
                        if mask[j] && measure.weight(j) <= tol::EQUIV_MIN_WEIGHT {
                            let mut obj = vec![0.0; n];
                            obj[j] = 1.0;
                            let mut lp = LinearProgram::maximize(obj);
                            for k in 0..n {
                                if mask[k] {
                                    lp.set_bounds(k, 0.0, 1.0);
                                } else {
                                    lp.set_bounds(k, 0.0, 0.0);
                                }
                            }
                            for (coeffs, rhs) in &self.rows {
                                lp.row(coeffs.clone(), RowOp::Eq, *rhs);
                            }
                            match solve_lp(&lp)? {
                                LpOutcome::Optimal(sol) if sol.objective <= 1e-11 => {
                                    mask[j] = false;
                                    changed = true;
                                }
                                LpOutcome::Infeasible(_) => {
                                    mask[j] = false;
                                    changed = true;
                                }
                                _ => {}
                            }
                        }
                    }
                    if !changed {
                        // every zero-weight path admits positive mass
                        // individually; accept the current mask
                        return Ok(mask);
                    }
                }
            }
        }
    }
}

/// Convex ambiguity set of physical measures.
#[derive(Debug, Clone)]
pub enum AmbiguityModel {
    /// Finite hull of explicit vertices.
    Hull { vertices: Vec<Measure> },
    /// Measures `p` with `alpha q <= p <= beta q` pathwise for some
    /// calibrated `q`; kept in lifted `(p, q)` form.
    DensityBand {
        alpha: f64,
        beta: f64,
        system: MartingaleSystem,
        /// Paths chargeable by some calibrated measure.
        polar: Vec<bool>,
    },
}

impl AmbiguityModel {
    pub fn hull(vertices: Vec<Measure>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(CoreError::invariant("ambiguity.hull", "need at least one vertex"));
        }
        let n = vertices[0].len();
        if vertices.iter().any(|v| v.len() != n) {
            return Err(CoreError::invariant("ambiguity.hull", "vertex length mismatch"));
        }
        Ok(AmbiguityModel::Hull { vertices })
    }

    /// Density band around the calibrated polytope. Requires a price cap
    /// on the grid (all levels bounded) and a nonempty reference
    /// polytope.
    pub fn density_band(
        alpha: f64,
        beta: f64,
        system: &MartingaleSystem,
        cap_present: bool,
    ) -> Result<Self> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(CoreError::invariant(
                "ambiguity.alpha",
                format!("alpha must lie in (0,1), got {alpha}"),
            ));
        }
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(CoreError::invariant(
                "ambiguity.beta",
                format!("beta must lie in (1,inf), got {beta}"),
            ));
        }
        if !cap_present {
            return Err(CoreError::invariant(
                "ambiguity.cap",
                "density band requires a capped grid",
            ));
        }
        let polar = system.polar_support()?;
        Ok(AmbiguityModel::DensityBand {
            alpha,
            beta,
            system: system.clone(),
            polar,
        })
    }

    pub fn n_paths(&self) -> usize {
        match self {
            AmbiguityModel::Hull { vertices } => vertices[0].len(),
            AmbiguityModel::DensityBand { system, .. } => system.n_paths,
        }
    }

    /// Paths charged by at least one member of the set.
    pub fn union_support(&self) -> Vec<bool> {
        match self {
            AmbiguityModel::Hull { vertices } => {
                let n = vertices[0].len();
                let mut mask = vec![false; n];
                for v in vertices {
                    for (m, &w) in mask.iter_mut().zip(v.weights()) {
                        *m = *m || w > 0.0;
                    }
                }
                mask
            }
            AmbiguityModel::DensityBand { polar, .. } => polar.clone(),
        }
    }

    /// Whether all members share one support (admissibility scopes are
    /// unambiguous exactly in this case).
    pub fn supports_agree(&self) -> bool {
        match self {
            AmbiguityModel::Hull { vertices } => {
                let first = vertices[0].support_mask();
                vertices.iter().all(|v| v.support_mask() == first)
            }
            // band members inherit the support of their reference q,
            // which can vary across the polytope
            AmbiguityModel::DensityBand { system, polar, .. } => {
                match system.find_calibrated_measure(Some(polar)) {
                    Ok(CalibrationOutcome::Feasible { min_weight, .. }) => {
                        min_weight > tol::EQUIV_MIN_WEIGHT
                    }
                    _ => false,
                }
            }
        }
    }

    /// Minimizes a path payoff over the ambiguity set. Returns the value
    /// and a minimizer (a vertex for hulls, the lifted LP optimum for
    /// bands; ties broken deterministically by vertex order / the fixed
    /// pivot rule).
    pub fn worst_case_expectation(&self, f: &[f64]) -> Result<(f64, Measure)> {
        if f.len() != self.n_paths() {
            return Err(CoreError::invariant("payoff.len", "payoff length mismatch"));
        }
        match self {
            AmbiguityModel::Hull { vertices } => {
                let mut best_val = f64::INFINITY;
                let mut best = None;
                for v in vertices {
                    let e = v.expectation(f);
                    if e < best_val {
                        best_val = e;
                        best = Some(v.clone());
                    }
                }
                Ok((best_val, best.expect("hull has a vertex")))
            }
            AmbiguityModel::DensityBand { alpha, beta, system, .. } => {
                let (value, p, _q) = band_minimize(system, *alpha, *beta, f)?;
                Ok((value, Measure::new(p)?))
            }
        }
    }
}

/// Minimizes `sum_w p_w f_w` over the lifted band polytope, returning
/// `(value, p, q)`.
pub fn band_minimize(
    system: &MartingaleSystem,
    alpha: f64,
    beta: f64,
    f: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = system.n_paths;
    // variables: p (n), q (n)
    let mut obj = f.to_vec();
    obj.extend(std::iter::repeat(0.0).take(n));
    let mut lp = LinearProgram::minimize(obj);
    for j in 0..2 * n {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    // sum p = 1
    let mut row = vec![0.0; 2 * n];
    for j in 0..n {
        row[j] = 1.0;
    }
    lp.row(row, RowOp::Eq, 1.0);
    // martingale + calibration + normalization rows on q
    for (coeffs, rhs) in &system.rows {
        let mut r = vec![0.0; 2 * n];
        r[n..].copy_from_slice(coeffs);
        lp.row(r, RowOp::Eq, *rhs);
    }
    // alpha q <= p <= beta q
    for j in 0..n {
        let mut lo = vec![0.0; 2 * n];
        lo[j] = 1.0;
        lo[n + j] = -alpha;
        lp.row(lo, RowOp::Ge, 0.0);
        let mut hi = vec![0.0; 2 * n];
        hi[j] = 1.0;
        hi[n + j] = -beta;
        lp.row(hi, RowOp::Le, 0.0);
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => Ok((
            sol.objective,
            sol.x[..n].to_vec(),
            sol.x[n..].to_vec(),
        )),
        LpOutcome::Infeasible(cert) => Err(CoreError::Infeasible(format!(
            "density band is empty (violation {:.3e})",
            cert.certified_violation
        ))),
        LpOutcome::Unbounded(_) => Err(CoreError::invariant(
            "band.lp",
            "band program is bounded by construction",
        )),
    }
}

/// Deterministically samples a vertex of the lifted band polytope by
/// minimizing a caller-supplied objective over `p`.
pub fn sample_band_member(
    system: &MartingaleSystem,
    alpha: f64,
    beta: f64,
    tilt: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, p, q) = band_minimize(system, alpha, beta, tilt)?;
    Ok((p, q))
}

/// Checks lifted band feasibility of a pair to a tolerance.
pub fn band_pair_feasible(
    system: &MartingaleSystem,
    alpha: f64,
    beta: f64,
    p: &[f64],
    q: &[f64],
    feas_tol: f64,
) -> bool {
    let sum_p: f64 = p.iter().sum();
    if (sum_p - 1.0).abs() > feas_tol {
        return false;
    }
    if system.residual(q) > feas_tol {
        return false;
    }
    p.iter()
        .zip(q)
        .all(|(&pi, &qi)| pi >= alpha * qi - feas_tol && pi <= beta * qi + feas_tol)
}
