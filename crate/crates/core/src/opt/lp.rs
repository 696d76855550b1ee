//! Dense two-phase simplex with dual, infeasibility and unboundedness
//! certificates.
//!
//! Determinism: entering columns use most-negative reduced cost with
//! lowest-index tie break, switching to Bland's rule after a run of
//! degenerate pivots; the ratio test prefers driving artificials out and
//! then the lowest basis index. No randomization anywhere. All
//! certificates are recomputed in user space against the original rows,
//! with the final basis refined through an LU solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::opt::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

/// A dense linear program over bounded variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    /// `(coefficients, op, rhs)`, coefficient length = variable count.
    pub rows: Vec<(Vec<f64>, RowOp, f64)>,
    /// Per-variable `(lower, upper)`; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn row(&mut self, coeffs: Vec<f64>, op: RowOp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "row dimension mismatch");
        self.rows.push((coeffs, op, rhs));
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn free_var(&mut self, var: usize) -> &mut Self {
        self.bounds[var] = (f64::NEG_INFINITY, f64::INFINITY);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(CoreError::invariant("lp.bounds", "bounds length mismatch"));
        }
        for (coeffs, _, rhs) in &self.rows {
            if coeffs.len() != n {
                return Err(CoreError::invariant("lp.rows", "row dimension mismatch"));
            }
            if !coeffs.iter().all(|c| c.is_finite()) || !rhs.is_finite() {
                return Err(CoreError::invariant("lp.rows", "non-finite coefficient"));
            }
        }
        if !self.objective.iter().all(|c| c.is_finite()) {
            return Err(CoreError::invariant("lp.objective", "non-finite coefficient"));
        }
        for &(l, u) in &self.bounds {
            if l > u {
                return Err(CoreError::invariant("lp.bounds", "lower > upper"));
            }
        }
        Ok(())
    }
}

/// Optimal solution with duals and residual diagnostics.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per user row, oriented for the user's sense.
    pub duals: Vec<f64>,
    /// `c_j - y' A_j` per user variable (user rows only).
    pub reduced_costs: Vec<f64>,
    pub max_primal_residual: f64,
    pub duality_gap: f64,
    pub complementarity: f64,
}

/// Multipliers certifying an empty feasible set: `y' A x` is bounded away
/// from `y' b` over the whole bound box by `certified_violation > 0`.
#[derive(Debug, Clone)]
pub struct InfeasibleCertificate {
    pub row_multipliers: Vec<f64>,
    pub certified_violation: f64,
}

/// An improving ray: feasible direction with nonzero objective rate.
#[derive(Debug, Clone)]
pub struct UnboundedCertificate {
    pub direction: Vec<f64>,
    pub objective_rate: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(InfeasibleCertificate),
    Unbounded(UnboundedCertificate),
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible(_) => Err(CoreError::Infeasible("lp".into())),
            LpOutcome::Unbounded(_) => Err(CoreError::Unbounded("lp".into())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// user x = l + std col
    Shift { col: usize, lower: f64 },
    /// user x = u - std col
    Flip { col: usize, upper: f64 },
    /// user x = pos - neg
    Split { pos: usize, neg: usize },
}

const ENTER_EPS: f64 = 1e-11;
const PIVOT_EPS: f64 = 1e-9;

struct Standard {
    a: Vec<Vec<f64>>, // m x n_total
    b: Vec<f64>,
    c: Vec<f64>,
    n_struct: usize,
    n_slack: usize,
    maps: Vec<VarMap>,
    /// user row index per standard row (bound rows map to usize::MAX)
    user_row: Vec<usize>,
    /// +1 / -1 sign applied when the row was normalized to b >= 0
    row_sign: Vec<f64>,
    /// variable whose synthetic upper-bound row this is, if any
    bound_row_var: Vec<Option<usize>>,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let n = lp.objective.len();
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    // Assign standard columns to user variables.
    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0usize;
    for &(l, u) in &lp.bounds {
        if l.is_finite() {
            maps.push(VarMap::Shift { col: n_struct, lower: l });
            n_struct += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Flip { col: n_struct, upper: u });
            n_struct += 1;
        } else {
            maps.push(VarMap::Split {
                pos: n_struct,
                neg: n_struct + 1,
            });
            n_struct += 2;
        }
    }

    // Standard objective (constant shifts drop out; the user objective is
    // recomputed in user space at the end).
    let mut c = vec![0.0; n_struct];
    for j in 0..n {
        let cj = sign * lp.objective[j];
        match maps[j] {
            VarMap::Shift { col, .. } => c[col] = cj,
            VarMap::Flip { col, .. } => c[col] = -cj,
            VarMap::Split { pos, neg } => {
                c[pos] = cj;
                c[neg] = -cj;
            }
        }
    }

    // Rows: user rows then synthetic upper-bound rows for box variables.
    let mut rows: Vec<(Vec<f64>, RowOp, f64, usize, Option<usize>)> = Vec::new();
    for (i, (coeffs, op, rhs)) in lp.rows.iter().enumerate() {
        let mut r = vec![0.0; n_struct];
        let mut rr = *rhs;
        for (j, &aij) in coeffs.iter().enumerate() {
            if aij == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    r[col] += aij;
                    rr -= aij * lower;
                }
                VarMap::Flip { col, upper } => {
                    r[col] -= aij;
                    rr -= aij * upper;
                }
                VarMap::Split { pos, neg } => {
                    r[pos] += aij;
                    r[neg] -= aij;
                }
            }
        }
        rows.push((r, *op, rr, i, None));
    }
    for (j, &(l, u)) in lp.bounds.iter().enumerate() {
        if l.is_finite() && u.is_finite() && u > l {
            if let VarMap::Shift { col, .. } = maps[j] {
                let mut r = vec![0.0; n_struct];
                r[col] = 1.0;
                rows.push((r, RowOp::Le, u - l, usize::MAX, Some(j)));
            }
        } else if l.is_finite() && u.is_finite() && u == l {
            // fixed variable: equality row
            if let VarMap::Shift { col, .. } = maps[j] {
                let mut r = vec![0.0; n_struct];
                r[col] = 1.0;
                rows.push((r, RowOp::Eq, 0.0, usize::MAX, Some(j)));
            }
        }
    }

    // Normalize b >= 0, then append slacks.
    let m = rows.len();
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut user_row = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    let mut bound_row_var = Vec::with_capacity(m);
    let mut ops = Vec::with_capacity(m);
    for (mut r, mut op, mut rhs, uidx, bvar) in rows {
        let mut s = 1.0;
        if rhs < 0.0 {
            for v in r.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            s = -1.0;
            op = match op {
                RowOp::Le => RowOp::Ge,
                RowOp::Ge => RowOp::Le,
                RowOp::Eq => RowOp::Eq,
            };
        }
        a.push(r);
        b.push(rhs);
        user_row.push(uidx);
        row_sign.push(s);
        bound_row_var.push(bvar);
        ops.push(op);
    }

    let n_slack = ops
        .iter()
        .filter(|o| matches!(o, RowOp::Le | RowOp::Ge))
        .count();
    let total = n_struct + n_slack;
    let mut slack_col_of_row = vec![None; m];
    let mut next = n_struct;
    for i in 0..m {
        match ops[i] {
            RowOp::Le => {
                slack_col_of_row[i] = Some((next, 1.0));
                next += 1;
            }
            RowOp::Ge => {
                slack_col_of_row[i] = Some((next, -1.0));
                next += 1;
            }
            RowOp::Eq => {}
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row.resize(total, 0.0);
        if let Some((col, coef)) = slack_col_of_row[i] {
            row[col] = coef;
        }
    }
    let mut c_full = c;
    c_full.resize(total, 0.0);

    Standard {
        a,
        b,
        c: c_full,
        n_struct,
        n_slack,
        maps,
        user_row,
        row_sign,
        bound_row_var,
    }
}

struct Tableau {
    t: Vec<Vec<f64>>, // m x (n_total + 1), rhs last
    basis: Vec<usize>,
    z1: Vec<f64>, // phase-1 reduced costs per column
    z2: Vec<f64>, // phase-2 reduced costs per column
    n_total: usize,
    n_real: usize, // columns excluding artificials
    art_start: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        let inv = 1.0 / piv;
        for v in self.t[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        for z in [&mut self.z1, &mut self.z2] {
            let f = z[col];
            if f != 0.0 {
                // reduced-cost update over the columns; the objective
                // value is recomputed on demand, not carried here
                for (v, pv) in z.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                z[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Current objective value of a cost vector at the basic solution.
    fn objective_of(&self, c: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &bj)| c[bj] * self.t[i][self.n_total])
            .sum()
    }

    /// Returns Ok(()) on optimality, Err(col) on an unbounded column.
    fn run(&mut self, phase1: bool, allow_artificial: bool) -> std::result::Result<(), usize> {
        let m = self.t.len();
        let mut degenerate_run = 0usize;
        let bland_after = 50 + 10 * m;
        loop {
            let z = if phase1 { &self.z1 } else { &self.z2 };
            let limit = if allow_artificial { self.n_total } else { self.n_real };
            let bland = degenerate_run > bland_after;
            let mut enter = None;
            let mut best = -ENTER_EPS;
            for j in 0..limit {
                let zj = z[j];
                if zj < -ENTER_EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if zj < best {
                        best = zj;
                        enter = Some(j);
                    }
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };

            // ratio test
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                let aij = self.t[i][col];
                if aij > PIVOT_EPS {
                    let ratio = self.t[i][self.n_total] / aij;
                    let better = match leave {
                        None => true,
                        Some(cur) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                // prefer kicking artificials, then lowest basis index
                                let cur_art = self.basis[cur] >= self.art_start;
                                let new_art = self.basis[i] >= self.art_start;
                                if new_art != cur_art {
                                    new_art
                                } else {
                                    self.basis[i] < self.basis[cur]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio.max(0.0);
                    }
                }
            }
            let Some(row) = leave else {
                return Err(col);
            };
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
        }
    }
}

/// Solves a linear program, returning an optimal solution with dual
/// certificates, or an infeasibility/unboundedness certificate.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let std_form = standardize(lp);
    let m = std_form.a.len();
    let n_real = std_form.n_struct + std_form.n_slack;
    let n_total = n_real + m; // artificial per row (unused ones never enter)
    let mut t = vec![vec![0.0; n_total + 1]; m];
    for i in 0..m {
        t[i][..n_real].copy_from_slice(&std_form.a[i]);
        t[i][n_real + i] = 1.0;
        t[i][n_total] = std_form.b[i];
    }

    // Initial basis: slack column when it enters positively, else artificial.
    let mut basis = vec![0usize; m];
    let mut phase1_needed = false;
    for i in 0..m {
        let slack = (std_form.n_struct..n_real).find(|&j| std_form.a[i][j] == 1.0);
        match slack {
            Some(j) => basis[i] = j,
            None => {
                basis[i] = n_real + i;
                phase1_needed = true;
            }
        }
    }

    // Reduced-cost rows. z_j = c_j - c_B' T_j; objective value in last slot
    // is stored as c_B' b.
    let mut c1 = vec![0.0; n_total];
    for j in n_real..n_total {
        c1[j] = 1.0;
    }
    let mut c2 = std_form.c.clone();
    c2.resize(n_total, 0.0);

    let build_z = |c: &[f64], t: &Vec<Vec<f64>>, basis: &[usize]| -> Vec<f64> {
        let mut z = vec![0.0; n_total];
        for j in 0..n_total {
            let mut cb_t = 0.0;
            for i in 0..m {
                cb_t += c[basis[i]] * t[i][j];
            }
            z[j] = c[j] - cb_t;
        }
        z
    };
    let z1 = build_z(&c1, &t, &basis);
    let z2 = build_z(&c2, &t, &basis);

    let mut tab = Tableau {
        t,
        basis,
        z1,
        z2,
        n_total,
        n_real,
        art_start: n_real,
    };

    if phase1_needed {
        tab.run(true, false).map_err(|_| {
            CoreError::invariant("lp.phase1", "phase-1 objective cannot be unbounded")
        })?;
        let infeas = tab.objective_of(&c1);
        if infeas > tol::FEASIBILITY {
            return Ok(LpOutcome::Infeasible(farkas_certificate(lp, &std_form, &tab)));
        }
        // Drive basic artificials out or accept their rows as redundant.
        for i in 0..m {
            if tab.basis[i] >= tab.art_start {
                if let Some(j) = (0..n_real).find(|&j| tab.t[i][j].abs() > PIVOT_EPS) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    match tab.run(false, false) {
        Ok(()) => {}
        Err(col) => {
            return Ok(LpOutcome::Unbounded(unbounded_certificate(
                lp, &std_form, &tab, col,
            )));
        }
    }

    Ok(LpOutcome::Optimal(extract_solution(lp, &std_form, &tab)?))
}

fn farkas_certificate(lp: &LinearProgram, sf: &Standard, tab: &Tableau) -> InfeasibleCertificate {
    // y_i = c1_j - z1_j at the unit column of row i (the artificial).
    let m = tab.t.len();
    let mut y_std = vec![0.0; m];
    for i in 0..m {
        y_std[i] = 1.0 - tab.z1[tab.art_start + i];
    }
    let mut row_multipliers = vec![0.0; lp.rows.len()];
    for i in 0..m {
        if sf.user_row[i] != usize::MAX {
            row_multipliers[sf.user_row[i]] = y_std[i] * sf.row_sign[i];
        }
    }
    // Certified violation: y'b minus the box-supremum of y'Ax, accounting
    // for synthetic bound rows through interval arithmetic.
    let n = lp.objective.len();
    let mut lin = vec![0.0; n];
    let mut rhs_combo = 0.0;
    for (i, (coeffs, _op, rhs)) in lp.rows.iter().enumerate() {
        let yi = row_multipliers[i];
        rhs_combo += yi * rhs;
        for j in 0..n {
            lin[j] += yi * coeffs[j];
        }
    }
    // include synthetic bound rows in the standard-space multipliers
    for i in 0..tab.t.len() {
        if let Some(j) = sf.bound_row_var[i] {
            let yi = y_std[i] * sf.row_sign[i];
            // bound row is x_j <= u_j (shifted); express in user space
            rhs_combo += yi * lp.bounds[j].1;
            lin[j] += yi;
        }
    }
    let mut sup = 0.0;
    for j in 0..n {
        let (l, u) = lp.bounds[j];
        let c = lin[j];
        if c > 0.0 {
            sup += if u.is_finite() { c * u } else { f64::INFINITY };
        } else if c < 0.0 {
            sup += if l.is_finite() { c * l } else { f64::INFINITY };
        }
    }
    InfeasibleCertificate {
        row_multipliers,
        certified_violation: rhs_combo - sup,
    }
}

fn unbounded_certificate(
    lp: &LinearProgram,
    sf: &Standard,
    tab: &Tableau,
    col: usize,
) -> UnboundedCertificate {
    let m = tab.t.len();
    let mut d_std = vec![0.0; tab.n_real];
    d_std[col] = 1.0;
    for i in 0..m {
        let bj = tab.basis[i];
        if bj < tab.n_real {
            d_std[bj] = -tab.t[i][col];
        }
    }
    let n = lp.objective.len();
    let mut direction = vec![0.0; n];
    for (j, map) in sf.maps.iter().enumerate() {
        direction[j] = match *map {
            VarMap::Shift { col, .. } => d_std[col],
            VarMap::Flip { col, .. } => -d_std[col],
            VarMap::Split { pos, neg } => d_std[pos] - d_std[neg],
        };
    }
    // entering reduced cost is the per-unit objective change along the ray
    let std_rate = tab.z2[col];
    let rate = match lp.sense {
        Sense::Minimize => std_rate,
        Sense::Maximize => -std_rate,
    };
    UnboundedCertificate {
        direction,
        objective_rate: rate,
    }
}

fn extract_solution(lp: &LinearProgram, sf: &Standard, tab: &Tableau) -> Result<LpSolution> {
    let m = tab.t.len();

    // Refine the basic solution and duals through an LU solve on the
    // original basis columns to remove pivot drift.
    let mut bmat = DMatrix::zeros(m, m);
    let mut cb = DVector::zeros(m);
    for (i, &bj) in tab.basis.iter().enumerate() {
        for r in 0..m {
            bmat[(r, i)] = if bj < tab.n_real {
                sf.a[r][bj]
            } else {
                // stuck artificial on a redundant row: identity column
                if r == bj - tab.art_start {
                    1.0
                } else {
                    0.0
                }
            };
        }
        cb[i] = if bj < tab.n_real {
            sf.c[bj]
        } else {
            0.0
        };
    }
    let lu = bmat.clone().lu();
    let b_vec = DVector::from_column_slice(&sf.b);
    let xb = lu
        .solve(&b_vec)
        .unwrap_or_else(|| DVector::from_iterator(m, (0..m).map(|i| tab.t[i][tab.n_total])));
    let y_std = bmat
        .transpose()
        .lu()
        .solve(&cb)
        .map(|v| v.iter().copied().collect::<Vec<f64>>())
        .unwrap_or_else(|| {
            (0..m)
                .map(|i| {
                    let j = tab.art_start + i;
                    -tab.z2[j]
                })
                .collect()
        });

    let mut x_std = vec![0.0; tab.n_real];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < tab.n_real {
            x_std[bj] = xb[i];
        }
    }

    // Map back to user variables.
    let n = lp.objective.len();
    let mut x = vec![0.0; n];
    for (j, map) in sf.maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift { col, lower } => lower + x_std[col],
            VarMap::Flip { col, upper } => upper - x_std[col],
            VarMap::Split { pos, neg } => x_std[pos] - x_std[neg],
        };
    }

    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut duals = vec![0.0; lp.rows.len()];
    for i in 0..m {
        if sf.user_row[i] != usize::MAX {
            duals[sf.user_row[i]] = sense_sign * y_std[i] * sf.row_sign[i];
        }
    }
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Residuals in user space.
    let mut max_primal_residual: f64 = 0.0;
    for (coeffs, op, rhs) in &lp.rows {
        let lhs: f64 = coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let viol = match op {
            RowOp::Le => (lhs - rhs).max(0.0),
            RowOp::Ge => (rhs - lhs).max(0.0),
            RowOp::Eq => (lhs - rhs).abs(),
        };
        max_primal_residual = max_primal_residual.max(viol);
    }
    for (j, &(l, u)) in lp.bounds.iter().enumerate() {
        if l.is_finite() {
            max_primal_residual = max_primal_residual.max(l - x[j]);
        }
        if u.is_finite() {
            max_primal_residual = max_primal_residual.max(x[j] - u);
        }
    }

    // Reduced costs against user rows, and the dual objective with bound
    // contributions.
    let mut reduced_costs = vec![0.0; n];
    for j in 0..n {
        let mut ya = 0.0;
        for (i, (coeffs, _, _)) in lp.rows.iter().enumerate() {
            ya += duals[i] * coeffs[j];
        }
        reduced_costs[j] = lp.objective[j] - ya;
    }
    let mut dual_obj: f64 = lp
        .rows
        .iter()
        .enumerate()
        .map(|(i, (_, _, rhs))| duals[i] * rhs)
        .sum();
    for j in 0..n {
        let (l, u) = lp.bounds[j];
        let rc = reduced_costs[j];
        // at optimum, rc > 0 binds the lower bound for Minimize (upper for Maximize)
        let toward_lower = match lp.sense {
            Sense::Minimize => rc > 0.0,
            Sense::Maximize => rc < 0.0,
        };
        if rc.abs() > 1e-13 {
            dual_obj += if toward_lower {
                if l.is_finite() {
                    rc * l
                } else {
                    0.0
                }
            } else if u.is_finite() {
                rc * u
            } else {
                0.0
            };
        }
    }
    let duality_gap = (objective - dual_obj).abs();

    // Complementary slackness: row slack times dual, variable gap times
    // reduced cost.
    let mut complementarity: f64 = 0.0;
    for (i, (coeffs, op, rhs)) in lp.rows.iter().enumerate() {
        if matches!(op, RowOp::Eq) {
            continue;
        }
        let lhs: f64 = coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        complementarity = complementarity.max((duals[i] * (lhs - rhs)).abs());
    }
    for (j, &(l, u)) in lp.bounds.iter().enumerate() {
        let rc = reduced_costs[j];
        if rc.abs() > 1e-13 {
            let gap = if match lp.sense {
                Sense::Minimize => rc > 0.0,
                Sense::Maximize => rc < 0.0,
            } {
                if l.is_finite() {
                    x[j] - l
                } else {
                    f64::INFINITY
                }
            } else if u.is_finite() {
                u - x[j]
            } else {
                f64::INFINITY
            };
            if gap.is_finite() {
                complementarity = complementarity.max((rc * gap).abs());
            }
        }
    }

    Ok(LpSolution {
        x,
        objective,
        duals,
        reduced_costs,
        max_primal_residual,
        duality_gap,
        complementarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binomial_system_lp(objective: Vec<f64>, sense: Sense) -> LinearProgram {
        // variables q = (q_down, q_up) on levels (0.5, 2.0), spot 1.0
        let mut lp = LinearProgram::new(sense, objective);
        lp.row(vec![-0.5, 1.0], RowOp::Eq, 0.0);
        lp.row(vec![1.0, 1.0], RowOp::Eq, 1.0);
        lp
    }

    #[test]
    fn binomial_feasibility_point() {
        let lp = binomial_system_lp(vec![0.0, 0.0], Sense::Minimize);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.x[1], 1.0 / 3.0, epsilon = 1e-10);
        assert!(sol.max_primal_residual <= tol::FEASIBILITY);
        assert!(sol.duality_gap <= tol::DUALITY_GAP);
    }

    #[test]
    fn maximize_up_weight() {
        let lp = binomial_system_lp(vec![0.0, 1.0], Sense::Maximize);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0 / 3.0, epsilon = 1e-10);
        assert!(sol.duality_gap <= tol::DUALITY_GAP);
        assert!(sol.complementarity <= tol::COMPLEMENTARITY);
    }

    #[test]
    fn free_scale_is_unbounded() {
        // maximize total mass with only the martingale row
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.row(vec![-0.5, 1.0], RowOp::Eq, 0.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Unbounded(cert) => {
                assert!(cert.objective_rate > 0.0);
                // direction satisfies the equality row and improves
                let d = &cert.direction;
                assert_abs_diff_eq!(-0.5 * d[0] + d[1], 0.0, epsilon = 1e-9);
                assert!(d[0] + d[1] > 0.0);
            }
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn restricted_support_is_infeasible() {
        // forcing q_down = 0 contradicts the martingale + normalization rows
        let mut lp = binomial_system_lp(vec![0.0, 0.0], Sense::Minimize);
        lp.set_bounds(0, 0.0, 0.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Infeasible(cert) => {
                assert!(cert.certified_violation > 1e-10);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = binomial_system_lp(vec![1.0, 2.0], Sense::Minimize);
        lp.row(vec![1.0, 1.0], RowOp::Eq, 1.0); // duplicate normalization
        lp.row(vec![-1.0, -1.0], RowOp::Eq, -1.0); // negated duplicate
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0 / 3.0, epsilon = 1e-9);
        assert!(sol.max_primal_residual <= tol::FEASIBILITY);
    }

    #[test]
    fn bounded_box_lp_with_free_vars() {
        // min x + y st x + y >= 1, x - y = 0.25, y in [0, 10], x free
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.row(vec![1.0, 1.0], RowOp::Ge, 1.0);
        lp.row(vec![1.0, -1.0], RowOp::Eq, 0.25);
        lp.free_var(0);
        lp.set_bounds(1, 0.0, 10.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 0.625, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 0.375, epsilon = 1e-9);
        assert!(sol.duality_gap <= tol::DUALITY_GAP);
    }

    #[test]
    fn maximize_with_upper_bounds() {
        // max 3x + 2y st x + y <= 4, x <= 2.5, y <= 3
        let mut lp = LinearProgram::maximize(vec![3.0, 2.0]);
        lp.row(vec![1.0, 1.0], RowOp::Le, 4.0);
        lp.set_bounds(0, 0.0, 2.5);
        lp.set_bounds(1, 0.0, 3.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0 * 2.5 + 2.0 * 1.5, epsilon = 1e-9);
        assert!(sol.duality_gap <= tol::DUALITY_GAP);
        assert!(sol.complementarity <= tol::COMPLEMENTARITY);
    }

    #[test]
    fn determinism_same_bytes() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0, 0.5]);
        lp.row(vec![1.0, 1.0, 1.0], RowOp::Eq, 1.0);
        lp.row(vec![1.0, -1.0, 0.0], RowOp::Le, 0.3);
        let a = solve_lp(&lp).unwrap().optimal().unwrap();
        let b = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.duals, b.duals);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // multiple identical ratios force degenerate pivots
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        for _ in 0..4 {
            lp.row(vec![1.0, 0.0], RowOp::Le, 1.0);
        }
        lp.row(vec![0.0, 1.0], RowOp::Le, 1.0);
        lp.row(vec![1.0, 1.0], RowOp::Le, 2.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-9);
    }
}
