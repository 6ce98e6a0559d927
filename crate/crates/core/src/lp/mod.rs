//! Sparse exact linear programs and the extremal box-volume LP.
//!
//! [`build_extremal_lp`] encodes, for an n-box `B` in the unit cube and a
//! function `Q` known only at the `2^n` vertices of `B`, every linear
//! condition a quasi-copula imposes on those vertex values:
//!
//! * `D` rows: `a_i + l_i <= 1` (corner plus edge length stays in `[0,1]`);
//! * `E` rows: along each box edge, `Q` grows by at least 0 and at most the
//!   edge length;
//! * `F` rows: the lower and upper Fréchet–Hoeffding bounds at each vertex.
//!
//! The objective is the signed vertex sum `V_Q(B)`. All variables carry an
//! implicit lower bound of zero.

mod format;

use std::fmt;

use thiserror::Error;

use crate::grid::{NBox, VertexPattern};
use crate::numeric::{r, Rational};

pub use format::{export_lp, parse_lp};

/// Dimensions above this are accepted but the LP grows as `n * 2^n` rows.
pub const LARGE_DIMENSION_WARNING: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("reported solutions exist only for n = 4, got {0}")]
    UnsupportedDimension(usize),
    #[error("row {row}: variable index {index} out of range ({num_vars} variables)")]
    BadVariable { row: usize, index: usize, num_vars: usize },
    #[error("row {row}: variable {index} appears twice")]
    DuplicateVariable { row: usize, index: usize },
    #[error("objective: variable index {index} out of range")]
    BadObjectiveVariable { index: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("negative edge length {length} on axis {axis}")]
    NegativeLength { axis: usize, length: Rational },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    pub fn token(self) -> &'static str {
        match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    LessEq,
    GreaterEq,
}

impl Relation {
    pub fn token(self) -> &'static str {
        match self {
            Relation::LessEq => "<=",
            Relation::GreaterEq => ">=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::LessEq => lhs <= rhs,
            Relation::GreaterEq => lhs >= rhs,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Constraint family tag carried on every row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Box stays inside the unit cube.
    Domain,
    /// Monotone / Lipschitz condition along a box edge.
    Edge,
    /// Fréchet–Hoeffding bound at a box vertex.
    Frechet,
    /// Rows of hand-built LPs.
    General,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Domain => "D",
            Family::Edge => "E",
            Family::Frechet => "F",
            Family::General => "G",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Family> {
        match tag {
            "D" => Some(Family::Domain),
            "E" => Some(Family::Edge),
            "F" => Some(Family::Frechet),
            "G" => Some(Family::General),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub family: Family,
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Row {
    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.coeffs.iter().map(|(j, c)| c * &values[*j]).sum()
    }
}

/// Sparse LP over non-negative variables with `<=` / `>=` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    /// Quasi-copula dimension this LP was built for; 0 for hand-built LPs.
    pub dimension: usize,
    pub var_names: Vec<String>,
    pub objective: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(var_names: Vec<String>, sense: Sense) -> Self {
        LinearProgram {
            dimension: 0,
            var_names,
            objective: Vec::new(),
            sense,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    fn check_coeffs(&self, row: usize, coeffs: &[(usize, Rational)]) -> Result<(), LpError> {
        let mut seen = vec![false; self.num_vars()];
        for &(index, _) in coeffs {
            if index >= self.num_vars() {
                return Err(LpError::BadVariable {
                    row,
                    index,
                    num_vars: self.num_vars(),
                });
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(LpError::DuplicateVariable { row, index });
            }
        }
        Ok(())
    }

    pub fn add_row(
        &mut self,
        family: Family,
        coeffs: Vec<(usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) -> Result<(), LpError> {
        self.check_coeffs(self.rows.len(), &coeffs)?;
        self.rows.push(Row {
            family,
            coeffs,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, objective: Vec<(usize, Rational)>) -> Result<(), LpError> {
        for &(index, _) in &objective {
            if index >= self.num_vars() {
                return Err(LpError::BadObjectiveVariable { index });
            }
        }
        self.objective = objective;
        Ok(())
    }

    /// Checks index ranges and duplicate entries in every row.
    pub fn validate(&self) -> Result<(), LpError> {
        for (i, row) in self.rows.iter().enumerate() {
            self.check_coeffs(i, &row.coeffs)?;
        }
        for &(index, _) in &self.objective {
            if index >= self.num_vars() {
                return Err(LpError::BadObjectiveVariable { index });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[Rational]) -> Rational {
        self.objective.iter().map(|(j, c)| c * &values[*j]).sum()
    }

    /// Evaluates every row at `values`.
    pub fn check_point(&self, values: &[Rational]) -> FeasibilityReport {
        let violated_rows = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| {
                let lhs = row.lhs(values);
                (!row.relation.holds(&lhs, &row.rhs)).then(|| RowViolation {
                    row: i,
                    family: row.family,
                    lhs,
                    relation: row.relation,
                    rhs: row.rhs.clone(),
                })
            })
            .collect::<Vec<_>>();
        FeasibilityReport {
            feasible: violated_rows.is_empty(),
            objective_value: self.objective_value(values),
            violated_rows,
        }
    }

    /// Row counts per family, in `D, E, F, G` order.
    pub fn family_counts(&self) -> [(Family, usize); 4] {
        [Family::Domain, Family::Edge, Family::Frechet, Family::General]
            .map(|f| (f, self.rows.iter().filter(|row| row.family == f).count()))
    }
}

/// Where each symbol of the extremal problem lives in the variable vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremalLayout {
    pub dimension: usize,
    /// Lower corner `a_i` of the box on each axis.
    pub corner_vars: Vec<usize>,
    /// Edge length `b_i - a_i` on each axis.
    pub length_vars: Vec<usize>,
    /// Value of `Q` at each vertex, indexed by [`VertexPattern::index`].
    pub vertex_vars: Vec<usize>,
}

impl ExtremalLayout {
    pub fn new(n: usize) -> Self {
        ExtremalLayout {
            dimension: n,
            corner_vars: (0..n).collect(),
            length_vars: (n..2 * n).collect(),
            vertex_vars: (2 * n..2 * n + (1 << n)).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        2 * self.dimension + (1 << self.dimension)
    }

    pub fn vertex_var(&self, pattern: &VertexPattern) -> usize {
        self.vertex_vars[pattern.index()]
    }

    pub fn var_names(&self) -> Vec<String> {
        let n = self.dimension;
        (1..=n)
            .map(|i| format!("a{i}"))
            .chain((1..=n).map(|i| format!("l{i}")))
            .chain(VertexPattern::all(n).map(|p| format!("q{}", p.label())))
            .collect()
    }
}

/// Builds the extremal LP for n-boxes in `[0,1]^n`.
///
/// Row order: `D` rows by axis; `E` rows by axis, then by lower vertex index,
/// monotone row before Lipschitz row; `F` rows by vertex, lower bound first
/// and then one upper bound per axis.
pub fn build_extremal_lp(n: usize, sense: Sense) -> Result<(LinearProgram, ExtremalLayout), LpError> {
    if n < 2 {
        return Err(LpError::DimensionTooSmall(n));
    }
    let layout = ExtremalLayout::new(n);
    let mut lp = LinearProgram::new(layout.var_names(), sense);
    lp.dimension = n;
    let one = Rational::one();

    for i in 0..n {
        lp.add_row(
            Family::Domain,
            vec![(layout.corner_vars[i], one.clone()), (layout.length_vars[i], one.clone())],
            Relation::LessEq,
            one.clone(),
        )?;
    }

    for i in 0..n {
        for lower in VertexPattern::all(n).filter(|p| !p.is_upper(i)) {
            let upper = lower.with_flag(i, true);
            let (qu, ql) = (layout.vertex_var(&upper), layout.vertex_var(&lower));
            lp.add_row(
                Family::Edge,
                vec![(qu, one.clone()), (ql, -&one)],
                Relation::GreaterEq,
                Rational::zero(),
            )?;
            lp.add_row(
                Family::Edge,
                vec![(qu, one.clone()), (ql, -&one), (layout.length_vars[i], -&one)],
                Relation::LessEq,
                Rational::zero(),
            )?;
        }
    }

    for v in VertexPattern::all(n) {
        let qv = layout.vertex_var(&v);
        // Coordinates of v: a_i, plus l_i on upper axes.
        let coord = |i: usize| {
            let mut terms = vec![(layout.corner_vars[i], -&one)];
            if v.is_upper(i) {
                terms.push((layout.length_vars[i], -&one));
            }
            terms
        };
        let mut lower = vec![(qv, one.clone())];
        for i in 0..n {
            lower.extend(coord(i));
        }
        lp.add_row(
            Family::Frechet,
            lower,
            Relation::GreaterEq,
            -Rational::from_integer(n as i64 - 1),
        )?;
        for i in 0..n {
            let mut upper = vec![(qv, one.clone())];
            upper.extend(coord(i));
            lp.add_row(Family::Frechet, upper, Relation::LessEq, Rational::zero())?;
        }
    }

    let objective = VertexPattern::all(n)
        .map(|v| (layout.vertex_var(&v), Rational::from_integer(v.sign().into())))
        .collect();
    lp.set_objective(objective)?;
    Ok((lp, layout))
}

/// A box together with the values of `Q` at its vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexAssignment {
    pub bx: NBox,
    /// Indexed by [`VertexPattern::index`].
    pub values: Vec<Rational>,
}

impl VertexAssignment {
    pub fn new(bx: NBox, values: Vec<Rational>) -> Result<Self, LpError> {
        let expected = 1usize << bx.dimension();
        if values.len() != expected {
            return Err(LpError::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(VertexAssignment { bx, values })
    }

    pub fn dimension(&self) -> usize {
        self.bx.dimension()
    }

    pub fn value(&self, pattern: &VertexPattern) -> &Rational {
        &self.values[pattern.index()]
    }

    /// `sum_v sgn(v) Q(v)`.
    pub fn signed_sum(&self) -> Rational {
        VertexPattern::all(self.dimension())
            .map(|v| {
                let q = self.value(&v);
                if v.sign() > 0 {
                    q.clone()
                } else {
                    -q
                }
            })
            .sum()
    }

    /// Fills a variable vector laid out by `layout`.
    pub fn to_variables(&self, layout: &ExtremalLayout) -> Result<Vec<Rational>, LpError> {
        let n = layout.dimension;
        if self.dimension() != n {
            return Err(LpError::DimensionMismatch {
                expected: n,
                actual: self.dimension(),
            });
        }
        let mut values = vec![Rational::zero(); layout.num_vars()];
        for i in 0..n {
            let length = self.bx.length(i);
            if length.is_negative() {
                return Err(LpError::NegativeLength { axis: i, length });
            }
            values[layout.corner_vars[i]] = self.bx.lo(i).clone();
            values[layout.length_vars[i]] = length;
        }
        for (idx, q) in self.values.iter().enumerate() {
            values[layout.vertex_vars[idx]] = q.clone();
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowViolation {
    pub row: usize,
    pub family: Family,
    pub lhs: Rational,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub objective_value: Rational,
    pub violated_rows: Vec<RowViolation>,
}

/// Evaluates `asg` against every row of `lp`.
pub fn check_assignment(
    lp: &LinearProgram,
    layout: &ExtremalLayout,
    asg: &VertexAssignment,
) -> Result<FeasibilityReport, LpError> {
    if lp.num_vars() != layout.num_vars() {
        return Err(LpError::DimensionMismatch {
            expected: lp.num_vars(),
            actual: layout.num_vars(),
        });
    }
    let values = asg.to_variables(layout)?;
    Ok(lp.check_point(&values))
}

/// The two solutions reported for the four-dimensional problem.
pub fn reported_witness(n: usize, sense: Sense) -> Result<VertexAssignment, LpError> {
    if n != 4 {
        return Err(LpError::UnsupportedDimension(n));
    }
    match sense {
        Sense::Minimize => candidate_pattern(4),
        Sense::Maximize => {
            let bx = NBox::cube(r(1, 2), r(1, 1), 4).expect("valid box");
            let values = VertexPattern::all(4)
                .map(|v| match v.upper_count() {
                    0 | 1 => Rational::zero(),
                    2 | 3 => r(1, 2),
                    _ => Rational::one(),
                })
                .collect();
            VertexAssignment::new(bx, values)
        }
    }
}

/// Conjectured minimizer: box `[(n-1)/(2n-1), (2n-2)/(2n-1)]^n` with value
/// `(n-1)/(2n-1)` on every vertex that has at least `n-1` upper coordinates.
pub fn candidate_pattern(n: usize) -> Result<VertexAssignment, LpError> {
    if n < 2 {
        return Err(LpError::DimensionTooSmall(n));
    }
    let (n_i, d) = (n as i64, 2 * n as i64 - 1);
    let level = r(n_i - 1, d);
    let bx = NBox::cube(level.clone(), r(2 * n_i - 2, d), n).expect("valid box");
    let values = VertexPattern::all(n)
        .map(|v| {
            if v.upper_count() + 1 >= n {
                level.clone()
            } else {
                Rational::zero()
            }
        })
        .collect();
    VertexAssignment::new(bx, values)
}

/// `-(n-1)^2 / (2n-1)`.
pub fn conjectured_minimum(n: usize) -> Rational {
    let n = n as i64;
    r(-(n - 1) * (n - 1), 2 * n - 1)
}
