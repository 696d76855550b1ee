//! Optimization plumbing: exact-tolerance LP solving, certified concave
//! maximization / convex minimization over polytopes, damped Newton
//! solvers, and piecewise-linear utility models.

pub mod cutting;
pub mod lp;
pub mod newton;
pub mod pwl;
pub mod tol;

pub use cutting::{maximize_concave, minimize_convex, CertifiedPoint, Polytope};
pub use lp::{solve_lp, LinearProgram, LpOutcome, LpSolution, RowOp, Sense};
pub use pwl::{build_pwl_model, PwlUtilityModel};
