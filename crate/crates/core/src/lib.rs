//! Exact tools for quasi-copula mass distributions.
//!
//! * [`numeric`]: canonical arbitrary-precision rationals.
//! * [`grid`]: piecewise-uniform signed mass grids, their induced functions,
//!   box volumes, axiom checks and margins.
//! * [`lp`]: the linear program over box corners, edge lengths and vertex
//!   values whose optimum bounds the mass any quasi-copula can put on a box.
//! * [`simplex`]: an exact two-phase simplex solver and an independent
//!   optimality certificate check.

#![allow(clippy::result_large_err)]

pub mod grid;
pub mod lp;
pub mod numeric;
pub mod simplex;

pub use grid::{
    builtin_example, builtin_grid, make_grid_qc, AxiomKind, AxiomReport, AxiomViolation,
    AxisPartition, BuiltinExample, EnvelopeBound, EnvelopeViolation, GridError, GridQuasiCopula,
    MassGrid, NBox, VertexPattern,
};
pub use lp::{
    build_extremal_lp, candidate_pattern, check_assignment, conjectured_minimum, export_lp,
    reported_witness, parse_lp, ExtremalLayout, Family, FeasibilityReport, LinearProgram, LpError,
    Relation, Row, RowViolation, Sense, VertexAssignment,
};
pub use numeric::{compare, parse_rational, ParseRationalError, Rational};
pub use simplex::{
    certify, solution_to_assignment, solve, solve_with, PivotRule, SimplexSolution, SolveError,
    SolverOptions, Status, Verdict,
};
