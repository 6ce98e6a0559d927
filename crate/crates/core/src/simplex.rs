//! Dense-tableau two-phase simplex over exact rationals.
//!
//! Standard form gives every row `i` its own slack column `num_vars + i`
//! (`+1` for `<=` rows, `-1` for `>=` rows). Rows whose slack cannot start
//! basic at a non-negative value receive an artificial column for phase 1.
//! Artificial columns are dropped before phase 2, so reported bases and
//! reduced costs only refer to structural and slack columns.
//!
//! [`certify`] re-derives primal values, duals and reduced costs from the
//! final basis and the original LP data, without touching the tableau.

use std::fmt;

use thiserror::Error;

use crate::grid::{GridError, NBox};
use crate::lp::{ExtremalLayout, LinearProgram, LpError, Relation, Sense, VertexAssignment};
use crate::numeric::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("malformed LP: {0}")]
    InvalidLp(#[from] LpError),
    #[error("solution status is {0}, expected optimal")]
    NotOptimal(Status),
    #[error("layout expects {expected} variables, solution has {actual}")]
    LayoutMismatch { expected: usize, actual: usize },
    #[error("extracted box is invalid: {0}")]
    InvalidBox(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index entering column, lowest-index leaving variable among
    /// ratio ties. Never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, ties by lowest index. May cycle on
    /// degenerate problems; not used for reference outputs.
    Dantzig,
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub rule: PivotRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexSolution {
    pub status: Status,
    /// Objective in the LP's own sense (`Some` iff optimal).
    pub objective: Option<Rational>,
    /// Values of the structural variables.
    pub assignment: Vec<Rational>,
    /// Basic standard-form column for each row, in row order.
    pub basis: Vec<usize>,
    /// `c_j - y^T A_j` for every structural and slack column, in terms of
    /// the original objective (non-negative at a minimum, non-positive at a
    /// maximum).
    pub reduced_costs: Vec<Rational>,
    pub phase1_pivots: usize,
    pub phase2_pivots: usize,
    /// Largest numerator/denominator bit length seen in the tableau.
    pub peak_bits: u64,
}

impl SimplexSolution {
    pub fn pivots(&self) -> usize {
        self.phase1_pivots + self.phase2_pivots
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    /// Reduced costs of the current phase.
    cost: Vec<Rational>,
    /// Negated objective value of the current phase.
    neg_obj: Rational,
    basis: Vec<usize>,
    peak_bits: u64,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cost.len()
    }

    fn pivot(&mut self, prow: usize, pcol: usize) {
        let mut pivot_row = std::mem::take(&mut self.rows[prow]);
        let inv = pivot_row[pcol].recip();
        let nonzero: Vec<usize> = (0..pivot_row.len())
            .filter(|&j| !pivot_row[j].is_zero())
            .collect();
        for &j in &nonzero {
            pivot_row[j] *= &inv;
        }
        self.rhs[prow] *= &inv;
        let pivot_rhs = self.rhs[prow].clone();
        let mut peak = self.peak_bits;

        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == prow || row[pcol].is_zero() {
                continue;
            }
            let factor = row[pcol].clone();
            for &j in &nonzero {
                row[j] -= &factor * &pivot_row[j];
                peak = peak.max(row[j].bit_size());
            }
            self.rhs[i] -= &factor * &pivot_rhs;
            peak = peak.max(self.rhs[i].bit_size());
        }
        if !self.cost[pcol].is_zero() {
            let factor = self.cost[pcol].clone();
            for &j in &nonzero {
                self.cost[j] -= &factor * &pivot_row[j];
            }
            self.neg_obj -= &factor * &pivot_rhs;
        }
        self.rows[prow] = pivot_row;
        self.basis[prow] = pcol;
        self.peak_bits = peak;
    }

    fn entering(&self, allowed: usize, rule: PivotRule) -> Option<usize> {
        let candidates = (0..allowed).filter(|&j| self.cost[j].is_negative());
        match rule {
            PivotRule::Bland => candidates.min(),
            PivotRule::Dantzig => candidates.fold(None, |best: Option<usize>, j| match best {
                Some(b) if self.cost[b] <= self.cost[j] => Some(b),
                _ => Some(j),
            }),
        }
    }

    /// Minimum-ratio row; ties go to the lowest basic column index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, Rational)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[col].is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / &row[col];
            let better = match &best {
                None => true,
                Some((b, best_ratio)) => {
                    ratio < *best_ratio || (ratio == *best_ratio && self.basis[i] < self.basis[*b])
                }
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    fn run(&mut self, allowed: usize, rule: PivotRule, pivots: &mut usize) -> Outcome {
        loop {
            let Some(col) = self.entering(allowed, rule) else {
                return Outcome::Optimal;
            };
            let Some(row) = self.leaving(col) else {
                return Outcome::Unbounded;
            };
            self.pivot(row, col);
            *pivots += 1;
        }
    }

    /// Sets reduced costs for cost vector `c` against the current basis.
    fn price(&mut self, c: &[Rational]) {
        let mut cost = c.to_vec();
        cost.resize(self.width(), Rational::zero());
        let mut neg_obj = Rational::zero();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &c[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in row.iter().enumerate() {
                if !a.is_zero() {
                    cost[j] -= cb * a;
                }
            }
            neg_obj -= cb * &self.rhs[i];
        }
        self.cost = cost;
        self.neg_obj = neg_obj;
    }
}

/// Solves `lp` with Bland's rule.
pub fn solve(lp: &LinearProgram) -> Result<SimplexSolution, SolveError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, options: &SolverOptions) -> Result<SimplexSolution, SolveError> {
    lp.validate()?;
    let nv = lp.num_vars();
    let m = lp.rows.len();
    let base_width = nv + m;

    // Normalize each row so that its right-hand side is non-negative.
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut needs_artificial = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let mut dense = vec![Rational::zero(); base_width];
        for (j, c) in &row.coeffs {
            dense[*j] = c.clone();
        }
        dense[nv + i] = match row.relation {
            Relation::LessEq => Rational::one(),
            Relation::GreaterEq => -Rational::one(),
        };
        let mut b = row.rhs.clone();
        let flip = b.is_negative() || (b.is_zero() && dense[nv + i].is_negative());
        if flip {
            for x in dense.iter_mut().filter(|x| !x.is_zero()) {
                *x = -&*x;
            }
            b = -b;
        }
        needs_artificial.push(dense[nv + i].is_negative());
        rows.push(dense);
        rhs.push(b);
    }

    let artificial_rows: Vec<usize> = (0..m).filter(|&i| needs_artificial[i]).collect();
    let width = base_width + artificial_rows.len();
    let mut basis: Vec<usize> = (0..m).map(|i| nv + i).collect();
    for row in rows.iter_mut() {
        row.resize(width, Rational::zero());
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        rows[i][base_width + k] = Rational::one();
        basis[i] = base_width + k;
    }

    let mut tab = Tableau {
        rows,
        rhs,
        cost: vec![Rational::zero(); width],
        neg_obj: Rational::zero(),
        basis,
        peak_bits: 0,
    };
    let mut phase1_pivots = 0;

    if !artificial_rows.is_empty() {
        let mut c1 = vec![Rational::zero(); width];
        for c in c1.iter_mut().skip(base_width) {
            *c = Rational::one();
        }
        tab.price(&c1);
        // Phase 1 is bounded below by zero.
        let _ = tab.run(width, options.rule, &mut phase1_pivots);
        if !tab.neg_obj.is_zero() {
            return Ok(SimplexSolution {
                status: Status::Infeasible,
                objective: None,
                assignment: vec![Rational::zero(); nv],
                basis: Vec::new(),
                reduced_costs: Vec::new(),
                phase1_pivots,
                phase2_pivots: 0,
                peak_bits: tab.peak_bits,
            });
        }
        // Degenerate artificials still basic at zero: pivot them out. Some
        // non-artificial entry is always non-zero because [A | S] has full
        // row rank.
        for i in 0..m {
            if tab.basis[i] >= base_width {
                let col = (0..base_width)
                    .find(|&j| !tab.rows[i][j].is_zero())
                    .expect("standard form has full row rank");
                tab.pivot(i, col);
                phase1_pivots += 1;
            }
        }
        for row in tab.rows.iter_mut() {
            row.truncate(base_width);
        }
        tab.cost.truncate(base_width);
    }

    let flip_objective = lp.sense == Sense::Maximize;
    let mut c2 = vec![Rational::zero(); base_width];
    for (j, c) in &lp.objective {
        c2[*j] = if flip_objective { -c } else { c.clone() };
    }
    tab.price(&c2);
    let mut phase2_pivots = 0;
    let outcome = tab.run(base_width, options.rule, &mut phase2_pivots);

    let mut assignment = vec![Rational::zero(); nv];
    for (i, &col) in tab.basis.iter().enumerate() {
        if col < nv {
            assignment[col] = tab.rhs[i].clone();
        }
    }
    let (status, objective) = match outcome {
        Outcome::Unbounded => (Status::Unbounded, None),
        Outcome::Optimal => (Status::Optimal, Some(lp.objective_value(&assignment))),
    };
    let reduced_costs = if flip_objective {
        tab.cost.iter().map(|d| -d).collect()
    } else {
        tab.cost.clone()
    };
    Ok(SimplexSolution {
        status,
        objective,
        assignment,
        basis: tab.basis,
        reduced_costs,
        phase1_pivots,
        phase2_pivots,
        peak_bits: tab.peak_bits,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("pass"),
            Verdict::Fail(reasons) => write!(f, "fail: {}", reasons.join("; ")),
        }
    }
}

/// Solves `M z = b` exactly by Gauss-Jordan elimination on a dense copy.
/// Returns `None` when `M` is singular.
fn gauss_solve(mut mat: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let k = mat.len();
    for col in 0..k {
        let p = (col..k).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, p);
        b.swap(col, p);
        let inv = mat[col][col].recip();
        let nonzero: Vec<usize> = (col..k).filter(|&j| !mat[col][j].is_zero()).collect();
        for &j in &nonzero {
            mat[col][j] *= &inv;
        }
        b[col] *= &inv;
        let (pivot_row, pivot_b) = (mat[col].clone(), b[col].clone());
        for r in 0..k {
            if r == col || mat[r][col].is_zero() {
                continue;
            }
            let factor = mat[r][col].clone();
            for &j in &nonzero {
                mat[r][j] -= &factor * &pivot_row[j];
            }
            b[r] -= &factor * &pivot_b;
        }
    }
    Some(b)
}

/// Independently re-checks an optimal solution against the raw LP.
///
/// Primal feasibility and the objective are evaluated row by row. The basis
/// matrix is rebuilt from the original coefficients; the basic values and
/// the duals `y` with `B^T y = c_B` are recomputed by exact elimination, and
/// every nonbasic reduced cost `c_j - y^T A_j` must have the sign required
/// by the objective sense. The dual objective `y^T b` must equal the primal
/// one.
pub fn certify(lp: &LinearProgram, sol: &SimplexSolution) -> Result<Verdict, SolveError> {
    if sol.status != Status::Optimal {
        return Err(SolveError::NotOptimal(sol.status));
    }
    let nv = lp.num_vars();
    let m = lp.rows.len();
    let mut reasons = Vec::new();

    if sol.assignment.len() != nv {
        return Ok(Verdict::Fail(vec![format!(
            "assignment has {} values for {} variables",
            sol.assignment.len(),
            nv
        )]));
    }
    let x = &sol.assignment;
    for (j, v) in x.iter().enumerate() {
        if v.is_negative() {
            reasons.push(format!("variable {} is negative ({v})", lp.var_names[j]));
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let lhs: Rational = row.coeffs.iter().map(|(j, c)| c * &x[*j]).sum();
        if !row.relation.holds(&lhs, &row.rhs) {
            reasons.push(format!(
                "row {i} ({}) violated: {lhs} {} {} fails",
                row.family, row.relation, row.rhs
            ));
        }
    }
    let primal: Rational = lp.objective.iter().map(|(j, c)| c * &x[*j]).sum();
    match &sol.objective {
        Some(obj) if *obj == primal => {}
        Some(obj) => reasons.push(format!("reported objective {obj} but assignment gives {primal}")),
        None => reasons.push("optimal solution without objective".to_string()),
    }

    // Standard-form column j of the original data, as (row, coefficient).
    let column = |j: usize| -> Vec<(usize, Rational)> {
        if j < nv {
            lp.rows
                .iter()
                .enumerate()
                .filter_map(|(i, row)| {
                    row.coeffs
                        .iter()
                        .find(|(k, _)| *k == j)
                        .map(|(_, c)| (i, c.clone()))
                })
                .collect()
        } else {
            let i = j - nv;
            let s = match lp.rows[i].relation {
                Relation::LessEq => Rational::one(),
                Relation::GreaterEq => -Rational::one(),
            };
            vec![(i, s)]
        }
    };
    let mut cost = vec![Rational::zero(); nv + m];
    for (j, c) in &lp.objective {
        cost[*j] = c.clone();
    }

    let mut in_basis = vec![false; nv + m];
    if sol.basis.len() != m {
        reasons.push(format!("basis has {} columns for {m} rows", sol.basis.len()));
    } else if let Some(&bad) = sol.basis.iter().find(|&&j| j >= nv + m) {
        reasons.push(format!("basis column {bad} out of range"));
    } else {
        for &j in &sol.basis {
            if std::mem::replace(&mut in_basis[j], true) {
                reasons.push(format!("basis column {j} repeated"));
            }
        }
    }
    if !reasons.is_empty() {
        return Ok(Verdict::Fail(reasons));
    }

    // B (row-major) and its transpose.
    let mut b_mat = vec![vec![Rational::zero(); m]; m];
    for (k, &j) in sol.basis.iter().enumerate() {
        for (i, c) in column(j) {
            b_mat[i][k] = c;
        }
    }
    let b_t: Vec<Vec<Rational>> = (0..m)
        .map(|k| (0..m).map(|i| b_mat[i][k].clone()).collect())
        .collect();
    let rhs: Vec<Rational> = lp.rows.iter().map(|row| row.rhs.clone()).collect();

    let Some(x_basic) = gauss_solve(b_mat, rhs.clone()) else {
        return Ok(Verdict::Fail(vec!["basis matrix is singular".to_string()]));
    };
    let mut full = vec![Rational::zero(); nv + m];
    for (k, &j) in sol.basis.iter().enumerate() {
        full[j] = x_basic[k].clone();
    }
    for j in 0..nv {
        if full[j] != x[j] {
            reasons.push(format!(
                "variable {} is {} but the basis implies {}",
                lp.var_names[j], x[j], full[j]
            ));
        }
    }
    for (k, v) in x_basic.iter().enumerate() {
        if v.is_negative() {
            reasons.push(format!("basic column {} is negative ({v})", sol.basis[k]));
        }
    }

    let c_basic: Vec<Rational> = sol.basis.iter().map(|&j| cost[j].clone()).collect();
    let Some(y) = gauss_solve(b_t, c_basic) else {
        return Ok(Verdict::Fail(vec!["basis matrix is singular".to_string()]));
    };
    for j in (0..nv + m).filter(|&j| !in_basis[j]) {
        let d = &cost[j] - column(j).iter().map(|(i, a)| a * &y[*i]).sum::<Rational>();
        let wrong_sign = match lp.sense {
            Sense::Minimize => d.is_negative(),
            Sense::Maximize => d.is_positive(),
        };
        if wrong_sign {
            reasons.push(format!("reduced cost of column {j} is {d} ({} problem)", lp.sense));
        }
    }
    let dual: Rational = y.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    if dual != primal {
        reasons.push(format!("dual objective {dual} differs from primal {primal}"));
    }

    Ok(if reasons.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(reasons)
    })
}

/// Reads the box and vertex values out of an optimal extremal-LP solution.
pub fn solution_to_assignment(
    layout: &ExtremalLayout,
    sol: &SimplexSolution,
) -> Result<VertexAssignment, SolveError> {
    if sol.status != Status::Optimal {
        return Err(SolveError::NotOptimal(sol.status));
    }
    if sol.assignment.len() != layout.num_vars() {
        return Err(SolveError::LayoutMismatch {
            expected: layout.num_vars(),
            actual: sol.assignment.len(),
        });
    }
    let x = &sol.assignment;
    let intervals = (0..layout.dimension)
        .map(|i| {
            let lo = x[layout.corner_vars[i]].clone();
            let hi = &lo + &x[layout.length_vars[i]];
            (lo, hi)
        })
        .collect();
    let bx = NBox::new(intervals)?;
    let values = layout.vertex_vars.iter().map(|&j| x[j].clone()).collect();
    Ok(VertexAssignment::new(bx, values)?)
}
