//! Discrete market model: price grid, enumerated path space with its
//! prefix-node tree, option contracts, and semi-static trading strategies.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};

/// Price levels per period plus the spot. All paths draw coordinate `t`
/// from `levels[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketGrid {
    /// Number of trading periods `T >= 1`.
    pub periods: usize,
    /// Spot price `s0 > 0`.
    pub spot: f64,
    /// Strictly increasing positive price levels, one list per period.
    pub levels: Vec<Vec<f64>>,
    /// Optional uniform bound on all levels.
    pub cap: Option<f64>,
}

impl MarketGrid {
    pub fn new(spot: f64, levels: Vec<Vec<f64>>, cap: Option<f64>) -> Result<Self> {
        let grid = MarketGrid {
            periods: levels.len(),
            spot,
            levels,
            cap,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(CoreError::invariant("grid.periods", "need at least one period"));
        }
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return Err(CoreError::invariant("grid.spot", "spot must be positive and finite"));
        }
        for (t, lv) in self.levels.iter().enumerate() {
            if lv.is_empty() {
                return Err(CoreError::invariant(
                    "grid.levels",
                    format!("empty level list at period {}", t + 1),
                ));
            }
            for w in lv.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(CoreError::invariant(
                        "grid.levels",
                        format!("levels not strictly increasing at period {}", t + 1),
                    ));
                }
            }
            if lv[0] <= 0.0 || !lv.iter().all(|v| v.is_finite()) {
                return Err(CoreError::invariant(
                    "grid.levels",
                    format!("levels must be positive finite at period {}", t + 1),
                ));
            }
            if let Some(cap) = self.cap {
                if *lv.last().unwrap() > cap {
                    return Err(CoreError::invariant(
                        "grid.cap",
                        format!("level {} exceeds cap {} at period {}", lv.last().unwrap(), cap, t + 1),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of paths = product of per-period level counts.
    pub fn path_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).product()
    }
}

/// A prefix node of the path tree: the market state after `time` observed
/// prices. Paths passing through a node form a contiguous lexicographic
/// block.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Number of observed prices (0 = root).
    pub time: usize,
    /// Level indices of the observed prefix.
    pub prefix: Vec<usize>,
    /// Price at this node (`spot` at the root).
    pub price: f64,
    /// Half-open range of path indices passing through this node.
    pub path_range: (usize, usize),
}

/// Full enumeration of the grid's paths (lexicographic by level index) and
/// of all prefix nodes at times `0..T-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpace {
    pub grid: MarketGrid,
    /// Level-index tuples, lexicographic order.
    pub paths: Vec<Vec<usize>>,
    /// Nodes grouped by increasing time; the root is `nodes[0]`.
    pub nodes: Vec<TreeNode>,
}

/// Enumerates the path space of a grid with its prefix-node index.
///
/// Ordering is deterministic: paths are lexicographic in the per-period
/// level indices, nodes are listed by increasing time then lexicographic
/// prefix.
pub fn build_path_space(grid: &MarketGrid) -> Result<PathSpace> {
    grid.validate()?;
    let counts: Vec<usize> = grid.levels.iter().map(|l| l.len()).collect();
    let n_paths: usize = counts.iter().product();

    let mut paths = Vec::with_capacity(n_paths);
    let mut idx = vec![0usize; grid.periods];
    loop {
        paths.push(idx.clone());
        // lexicographic increment, most significant coordinate first
        let mut t = grid.periods;
        loop {
            if t == 0 {
                break;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < counts[t] {
                break;
            }
            idx[t] = 0;
            if t == 0 {
                t = usize::MAX; // done
                break;
            }
        }
        if t == usize::MAX || paths.len() == n_paths {
            break;
        }
    }
    debug_assert_eq!(paths.len(), n_paths);

    let mut nodes = Vec::new();
    for time in 0..grid.periods {
        let prefix_count: usize = counts[..time].iter().product();
        let block: usize = counts[time..].iter().product();
        for rank in 0..prefix_count {
            // decode the rank into a prefix of level indices
            let mut prefix = vec![0usize; time];
            let mut r = rank;
            for t in (0..time).rev() {
                prefix[t] = r % counts[t];
                r /= counts[t];
            }
            let price = if time == 0 {
                grid.spot
            } else {
                grid.levels[time - 1][prefix[time - 1]]
            };
            nodes.push(TreeNode {
                time,
                prefix,
                price,
                path_range: (rank * block, (rank + 1) * block),
            });
        }
    }

    Ok(PathSpace {
        grid: grid.clone(),
        paths,
        nodes,
    })
}

impl PathSpace {
    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Price of path `p` at time `t` (1-based; `t = 0` returns the spot).
    pub fn price(&self, path: usize, t: usize) -> f64 {
        if t == 0 {
            self.grid.spot
        } else {
            self.grid.levels[t - 1][self.paths[path][t - 1]]
        }
    }

    /// Ids of nodes where stock rebalancing happens. With time-zero
    /// trading the root is included, otherwise trading starts after the
    /// first price is revealed.
    pub fn trading_nodes(&self, time_zero: bool) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| if time_zero { true } else { n.time >= 1 })
            .map(|(i, _)| i)
            .collect()
    }

    /// Price increment earned on `path` by a unit stock position held at
    /// `node` over one period. Zero if the path does not pass the node.
    pub fn increment(&self, node: &TreeNode, path: usize) -> f64 {
        if path < node.path_range.0 || path >= node.path_range.1 {
            return 0.0;
        }
        self.price(path, node.time + 1) - node.price
    }
}

/// Payoff shape of a hedging instrument.
#[derive(Debug, Clone, PartialEq)]
pub enum OptionKind {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Arbitrary payoff listed per path in lexicographic order.
    Table { values: Vec<f64> },
}

/// A statically held contract quoted at time zero. Net payoffs subtract
/// the quote, so the stored contract always has zero price.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionContract {
    pub kind: OptionKind,
    /// Payoff observation time (1-based). Ignored for `Table`.
    pub maturity: usize,
    pub quoted_price: f64,
}

impl OptionContract {
    pub fn call(maturity: usize, strike: f64, quoted_price: f64) -> Self {
        OptionContract {
            kind: OptionKind::Call { strike },
            maturity,
            quoted_price,
        }
    }

    pub fn put(maturity: usize, strike: f64, quoted_price: f64) -> Self {
        OptionContract {
            kind: OptionKind::Put { strike },
            maturity,
            quoted_price,
        }
    }

    pub fn validate(&self, space: &PathSpace) -> Result<()> {
        match &self.kind {
            OptionKind::Call { strike } | OptionKind::Put { strike } => {
                if *strike < 0.0 || !strike.is_finite() {
                    return Err(CoreError::invariant("option.strike", "strike must be nonnegative"));
                }
                if self.maturity == 0 || self.maturity > space.grid.periods {
                    return Err(CoreError::invariant(
                        "option.maturity",
                        format!("maturity {} outside 1..={}", self.maturity, space.grid.periods),
                    ));
                }
            }
            OptionKind::Table { values } => {
                if values.len() != space.path_count() {
                    return Err(CoreError::invariant(
                        "option.table",
                        format!(
                            "table has {} entries for {} paths",
                            values.len(),
                            space.path_count()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn raw_payoff(&self, space: &PathSpace, path: usize) -> f64 {
        match &self.kind {
            OptionKind::Call { strike } => (space.price(path, self.maturity) - strike).max(0.0),
            OptionKind::Put { strike } => (strike - space.price(path, self.maturity)).max(0.0),
            OptionKind::Table { values } => values[path],
        }
    }
}

/// Net payoff of a contract on one path: raw payoff minus the quote.
pub fn evaluate_net_option(contract: &OptionContract, space: &PathSpace, path: usize) -> Result<f64> {
    contract.validate(space)?;
    Ok(contract.raw_payoff(space, path) - contract.quoted_price)
}

/// A calibration instrument: either a quoted option or the digital claim
/// `1{S_time = level} - mass` arising from a discretized marginal law.
/// Both have zero quote by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Instrument {
    Quoted(OptionContract),
    Digital {
        /// Observation time, 1-based.
        time: usize,
        /// Index into `grid.levels[time-1]`.
        level_index: usize,
        /// Marginal mass assigned to that level.
        mass: f64,
    },
}

impl Instrument {
    /// Zero-quote payoff on a path.
    pub fn net_payoff(&self, space: &PathSpace, path: usize) -> f64 {
        match self {
            Instrument::Quoted(c) => c.raw_payoff(space, path) - c.quoted_price,
            Instrument::Digital {
                time,
                level_index,
                mass,
            } => {
                let hit = space.paths[path][time - 1] == *level_index;
                (if hit { 1.0 } else { 0.0 }) - mass
            }
        }
    }
}

/// Semi-static strategy: initial wealth, static option holdings, and a
/// stock position per trading node.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingStrategy {
    pub initial: f64,
    /// One holding per instrument, in instrument order.
    pub option_holdings: Vec<f64>,
    /// One stock position per trading node, aligned with
    /// `PathSpace::trading_nodes(time_zero)`.
    pub stock_holdings: Vec<f64>,
    pub time_zero: bool,
}

impl TradingStrategy {
    pub fn cash_only(x: f64, n_instruments: usize, space: &PathSpace, time_zero: bool) -> Self {
        TradingStrategy {
            initial: x,
            option_holdings: vec![0.0; n_instruments],
            stock_holdings: vec![0.0; space.trading_nodes(time_zero).len()],
            time_zero,
        }
    }
}

/// Terminal wealth of a strategy on one path:
/// `x + sum_i h_i g_i + sum_nodes delta * (next price - node price)`.
pub fn terminal_wealth(
    strategy: &TradingStrategy,
    space: &PathSpace,
    instruments: &[Instrument],
    path: usize,
) -> Result<f64> {
    if strategy.option_holdings.len() != instruments.len() {
        return Err(CoreError::invariant(
            "strategy.holdings",
            format!(
                "{} option holdings for {} instruments",
                strategy.option_holdings.len(),
                instruments.len()
            ),
        ));
    }
    let trading = space.trading_nodes(strategy.time_zero);
    if strategy.stock_holdings.len() != trading.len() {
        return Err(CoreError::invariant(
            "strategy.stock",
            format!(
                "{} stock positions for {} trading nodes",
                strategy.stock_holdings.len(),
                trading.len()
            ),
        ));
    }
    let mut w = strategy.initial;
    for (h, inst) in strategy.option_holdings.iter().zip(instruments) {
        w += h * inst.net_payoff(space, path);
    }
    for (delta, &nid) in strategy.stock_holdings.iter().zip(&trading) {
        w += delta * space.increment(&space.nodes[nid], path);
    }
    Ok(w)
}

/// Dense payoff matrix of the semi-static instrument set: one row per
/// path, one column per trading node (price increments) followed by one
/// column per instrument (net payoffs). Calibrated martingale measures
/// are exactly the probability vectors annihilating every column.
pub fn payoff_matrix(space: &PathSpace, instruments: &[Instrument], time_zero: bool) -> DMatrix<f64> {
    let trading = space.trading_nodes(time_zero);
    let n = space.path_count();
    let d = trading.len() + instruments.len();
    let mut a = DMatrix::zeros(n, d);
    for (j, &nid) in trading.iter().enumerate() {
        let node = &space.nodes[nid];
        for p in node.path_range.0..node.path_range.1 {
            a[(p, j)] = space.increment(node, p);
        }
    }
    for (k, inst) in instruments.iter().enumerate() {
        let j = trading.len() + k;
        for p in 0..n {
            a[(p, j)] = inst.net_payoff(space, p);
        }
    }
    a
}

/// Terminal wealth vector of a strategy across all paths.
pub fn wealth_vector(
    strategy: &TradingStrategy,
    space: &PathSpace,
    instruments: &[Instrument],
) -> Result<Vec<f64>> {
    (0..space.path_count())
        .map(|p| terminal_wealth(strategy, space, instruments, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn binomial_grid() -> MarketGrid {
        MarketGrid::new(1.0, vec![vec![0.5, 2.0]], None).unwrap()
    }

    #[test]
    fn path_counts_match_products() {
        let g = binomial_grid();
        let s = build_path_space(&g).unwrap();
        assert_eq!(s.path_count(), 2);
        assert_eq!(s.nodes.len(), 1);

        let g2 = MarketGrid::new(
            1.0,
            vec![vec![0.5, 1.0, 2.0], vec![0.25, 0.5, 1.0, 2.0, 4.0]],
            None,
        )
        .unwrap();
        let s2 = build_path_space(&g2).unwrap();
        assert_eq!(s2.path_count(), 15);
        assert_eq!(s2.nodes.len(), 1 + 3);

        let g3 = MarketGrid::new(1.0, vec![vec![1.0], vec![1.0]], None).unwrap();
        assert_eq!(build_path_space(&g3).unwrap().path_count(), 1);
    }

    #[test]
    fn empty_level_list_is_rejected() {
        assert!(MarketGrid::new(1.0, vec![vec![0.5, 2.0], vec![]], None).is_err());
        assert!(MarketGrid::new(1.0, vec![vec![2.0, 0.5]], None).is_err());
        assert!(MarketGrid::new(1.0, vec![vec![0.5, 2.0]], Some(1.0)).is_err());
    }

    #[test]
    fn enumeration_is_deterministic_and_lexicographic() {
        let g = MarketGrid::new(1.0, vec![vec![0.5, 2.0], vec![0.5, 1.0, 2.0]], None).unwrap();
        let a = build_path_space(&g).unwrap();
        let b = build_path_space(&g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.paths[0], vec![0, 0]);
        assert_eq!(a.paths[1], vec![0, 1]);
        assert_eq!(a.paths[5], vec![1, 2]);
        // node blocks partition the paths
        for n in &a.nodes {
            assert!(n.path_range.0 < n.path_range.1);
        }
    }

    #[test]
    fn net_option_values() {
        let s = build_path_space(&binomial_grid()).unwrap();
        let call = OptionContract::call(1, 1.0, 1.0 / 3.0);
        // path 1 is the up path (levels sorted ascending)
        assert_abs_diff_eq!(
            evaluate_net_option(&call, &s, 1).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            evaluate_net_option(&call, &s, 0).unwrap(),
            -1.0 / 3.0,
            epsilon = 1e-15
        );
        let put = OptionContract::put(1, 1.0, 0.0);
        assert_abs_diff_eq!(evaluate_net_option(&put, &s, 1).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn table_option_requires_full_entries() {
        let s = build_path_space(&binomial_grid()).unwrap();
        let table = OptionContract {
            kind: OptionKind::Table { values: vec![1.0] },
            maturity: 1,
            quoted_price: 0.0,
        };
        assert!(evaluate_net_option(&table, &s, 0).is_err());
    }

    #[test]
    fn replication_wealth_on_binomial() {
        let s = build_path_space(&binomial_grid()).unwrap();
        let strat = TradingStrategy {
            initial: 1.0 / 3.0,
            option_holdings: vec![],
            stock_holdings: vec![2.0 / 3.0],
            time_zero: true,
        };
        let up = terminal_wealth(&strat, &s, &[], 1).unwrap();
        let down = terminal_wealth(&strat, &s, &[], 0).unwrap();
        assert_abs_diff_eq!(up, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(down, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn option_position_adds_net_payoff() {
        let s = build_path_space(&binomial_grid()).unwrap();
        let call = Instrument::Quoted(OptionContract::call(1, 1.0, 1.0 / 3.0));
        let strat = TradingStrategy {
            initial: 1.0,
            option_holdings: vec![1.0],
            stock_holdings: vec![0.0],
            time_zero: true,
        };
        assert_abs_diff_eq!(
            terminal_wealth(&strat, &s, &[call], 1).unwrap(),
            5.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn time_zero_flag_controls_root_trading() {
        let s = build_path_space(&binomial_grid()).unwrap();
        assert_eq!(s.trading_nodes(true).len(), 1);
        assert_eq!(s.trading_nodes(false).len(), 0);
    }

    proptest! {
        // terminal wealth is affine in (x, h, delta)
        #[test]
        fn wealth_is_affine(
            x1 in 0.1f64..5.0, x2 in 0.1f64..5.0,
            h1 in -2.0f64..2.0, h2 in -2.0f64..2.0,
            d1 in -2.0f64..2.0, d2 in -2.0f64..2.0,
            lam in 0.0f64..1.0,
        ) {
            let s = build_path_space(&binomial_grid()).unwrap();
            let call = Instrument::Quoted(OptionContract::call(1, 1.0, 1.0 / 3.0));
            let mk = |x: f64, h: f64, d: f64| TradingStrategy {
                initial: x,
                option_holdings: vec![h],
                stock_holdings: vec![d],
                time_zero: true,
            };
            let a = mk(x1, h1, d1);
            let b = mk(x2, h2, d2);
            let mix = mk(
                lam * x1 + (1.0 - lam) * x2,
                lam * h1 + (1.0 - lam) * h2,
                lam * d1 + (1.0 - lam) * d2,
            );
            for p in 0..2 {
                let wa = terminal_wealth(&a, &s, std::slice::from_ref(&call), p).unwrap();
                let wb = terminal_wealth(&b, &s, std::slice::from_ref(&call), p).unwrap();
                let wm = terminal_wealth(&mix, &s, std::slice::from_ref(&call), p).unwrap();
                prop_assert!((wm - (lam * wa + (1.0 - lam) * wb)).abs() <= 1e-12);
            }
        }
    }
}
