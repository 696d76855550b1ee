//! Central tolerance registry. Acceptance tests reference these named
//! constants; individual solvers must not invent their own thresholds.

/// Max |residual| for equality rows and LP primal/dual feasibility.
pub const FEASIBILITY: f64 = 1e-9;

/// Max |primal - dual| on any solved LP instance.
pub const DUALITY_GAP: f64 = 1e-8;

/// Max complementary slackness violation on LP certificates.
pub const COMPLEMENTARITY: f64 = 1e-8;

/// Default certified gap for concave maximization / convex minimization.
pub const SADDLE: f64 = 1e-7;

/// Default piecewise-linear utility approximation error.
pub const PWL_EPS: f64 = 1e-6;

/// Relative tolerance for the numeric inverse marginal utility.
pub const INVERSE_MARGINAL: f64 = 1e-10;

/// Smallest wealth at which Inada utilities are evaluated; values below
/// are clamped with a diagnostic.
pub const XMIN: f64 = 1e-8;

/// Minimum on-support weight certifying measure equivalence.
pub const EQUIV_MIN_WEIGHT: f64 = 1e-9;

/// Weights with magnitude below this are treated as exact zeros when
/// deriving supports from solver output.
pub const SUPPORT_EPS: f64 = 1e-12;
