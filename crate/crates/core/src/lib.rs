//! Robust expected-utility maximization with semi-static strategies on
//! finite path spaces.
//!
//! The market is a discrete grid of price levels per period. Strategies
//! combine buy-and-hold option positions with predictable stock rebalancing
//! on the prefix tree. The library computes
//!
//! * the robust primal value `û(x) = sup_strategy inf_P E_P U(wealth)`,
//! * the worst-case value `u(x) = inf_P u_P(x)` by direct minimization
//!   over the ambiguity set,
//! * the dual value `v(y) = inf_{P,Q} E_P V(y dQ/dP)` over calibrated
//!   martingale measures, and the conjugate point `ŷ`,
//! * superhedging prices and their LP duals,
//!
//! and cross-checks the minimax exchange, the conjugacy of `u` and `v`,
//! and the first-order conditions linking optimal wealth to the inverse
//! marginal utility. All solvers carry explicit certificates (LP duals,
//! cutting-plane gaps) against a central tolerance registry.

pub mod dual;
pub mod error;
pub mod generator;
pub mod instance;
pub mod market;
pub mod measures;
pub mod opt;
pub mod primal;
pub mod report;
pub mod superhedge;
pub mod utility;

pub use error::CoreError;
pub use market::{MarketGrid, OptionContract, OptionKind, PathSpace, TradingStrategy};
pub use measures::{AmbiguityModel, CalibrationSpec, MartingaleSystem, Measure};
pub use utility::UtilityFamily;
