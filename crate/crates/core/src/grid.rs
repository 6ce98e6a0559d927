//! Piecewise-uniform signed mass on rectilinear grids over `[0,1]^n`.
//!
//! A [`MassGrid`] stores a signed mass per grid cell. Spreading each cell's
//! mass uniformly over the cell induces a function `Q(u)` = mass of the
//! orthant `[0,u_1] x ... x [0,u_n]`, which is multilinear inside every cell.
//! [`GridQuasiCopula`] caches that function at the grid nodes and answers
//! evaluation, box-volume, axiom and envelope queries exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{r, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("partition must start at 0, end at 1 and be strictly increasing: {0}")]
    BadPartition(String),
    #[error("a grid needs at least one axis")]
    NoAxes,
    #[error("cell {cell:?} is outside the grid shape {shape:?}")]
    CellOutOfRange { cell: Vec<usize>, shape: Vec<usize> },
    #[error("duplicate cell {0:?}")]
    DuplicateCell(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coordinate {value} on axis {axis} lies outside [0,1]")]
    OutOfUnitInterval { axis: usize, value: Rational },
    #[error("interval [{lo},{hi}] on axis {axis} is not a subinterval of [0,1]")]
    BadInterval { axis: usize, lo: Rational, hi: Rational },
    #[error("axis {axis} out of range for a {dimension}-dimensional grid")]
    AxisOutOfRange { axis: usize, dimension: usize },
    #[error("cannot marginalize a one-dimensional grid")]
    CannotMarginalize,
    #[error("refinement on axis {0} does not contain every original breakpoint")]
    NotARefinement(usize),
    #[error("unknown builtin example {0:?} (expected q1 or q2)")]
    UnknownExample(String),
    #[error("grid file: {0}")]
    Format(String),
    #[error("malformed box {0:?} (expected lo:hi,lo:hi,...)")]
    BadBox(String),
}

fn render_point(point: &[Rational]) -> String {
    let parts: Vec<String> = point.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Breakpoints `0 = t_0 < t_1 < ... < t_k = 1` of one axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisPartition {
    breakpoints: Vec<Rational>,
}

impl AxisPartition {
    pub fn new(breakpoints: Vec<Rational>) -> Result<Self, GridError> {
        let render = || {
            let parts: Vec<String> = breakpoints.iter().map(|b| b.to_string()).collect();
            format!("[{}]", parts.join(","))
        };
        if breakpoints.len() < 2
            || !breakpoints[0].is_zero()
            || breakpoints[breakpoints.len() - 1] != Rational::one()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(GridError::BadPartition(render()));
        }
        Ok(AxisPartition { breakpoints })
    }

    /// `k` slabs of width `1/k`.
    pub fn uniform(slabs: usize) -> Self {
        assert!(slabs > 0);
        let k = slabs as i64;
        AxisPartition {
            breakpoints: (0..=k).map(|j| r(j, k)).collect(),
        }
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn num_slabs(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn width(&self, slab: usize) -> Rational {
        &self.breakpoints[slab + 1] - &self.breakpoints[slab]
    }

    /// Slab containing `p` and the fraction of that slab lying below `p`.
    /// `p = 1` maps to the last slab with fraction 1.
    fn locate(&self, p: &Rational) -> (usize, Rational) {
        let k = self.num_slabs();
        // first breakpoint strictly greater than p, minus one
        let upper = self.breakpoints.partition_point(|t| t <= p);
        let slab = upper.saturating_sub(1).min(k - 1);
        let frac = (p - &self.breakpoints[slab]) / self.width(slab);
        (slab, frac)
    }
}

/// Axis-aligned box `[lo_1,hi_1] x ... x [lo_n,hi_n]` inside the unit cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NBox {
    intervals: Vec<(Rational, Rational)>,
}

impl NBox {
    pub fn new(intervals: Vec<(Rational, Rational)>) -> Result<Self, GridError> {
        if intervals.is_empty() {
            return Err(GridError::NoAxes);
        }
        for (axis, (lo, hi)) in intervals.iter().enumerate() {
            if lo.is_negative() || lo > hi || *hi > Rational::one() {
                return Err(GridError::BadInterval {
                    axis,
                    lo: lo.clone(),
                    hi: hi.clone(),
                });
            }
        }
        Ok(NBox { intervals })
    }

    /// `[lo,hi]^n`.
    pub fn cube(lo: Rational, hi: Rational, n: usize) -> Result<Self, GridError> {
        NBox::new(vec![(lo, hi); n])
    }

    pub fn unit(n: usize) -> Self {
        NBox::cube(Rational::zero(), Rational::one(), n).expect("unit cube is valid")
    }

    pub fn dimension(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(Rational, Rational)] {
        &self.intervals
    }

    pub fn lo(&self, axis: usize) -> &Rational {
        &self.intervals[axis].0
    }

    pub fn hi(&self, axis: usize) -> &Rational {
        &self.intervals[axis].1
    }

    pub fn length(&self, axis: usize) -> Rational {
        self.hi(axis) - self.lo(axis)
    }

    pub fn vertex(&self, pattern: &VertexPattern) -> Vec<Rational> {
        assert_eq!(pattern.dimension(), self.dimension());
        self.intervals
            .iter()
            .zip(pattern.upper_flags())
            .map(|((lo, hi), &up)| if up { hi.clone() } else { lo.clone() })
            .collect()
    }

    /// Splits along `axis` at `at`, which must lie inside that interval.
    pub fn split(&self, axis: usize, at: &Rational) -> Option<(NBox, NBox)> {
        let (lo, hi) = self.intervals.get(axis)?;
        if at < lo || at > hi {
            return None;
        }
        let mut below = self.clone();
        let mut above = self.clone();
        below.intervals[axis].1 = at.clone();
        above.intervals[axis].0 = at.clone();
        Some((below, above))
    }
}

impl fmt::Display for NBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(lo, hi)| format!("{lo}:{hi}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for NBox {
    type Err = GridError;

    /// Parses the [`Display`](fmt::Display) form `lo:hi,lo:hi,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GridError::BadBox(s.to_string());
        let intervals = s
            .split(',')
            .map(|part| {
                let (lo, hi) = part.trim().split_once(':').ok_or_else(bad)?;
                Ok((lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<(Rational, Rational)>, GridError>>()?;
        NBox::new(intervals)
    }
}

/// Selects one vertex of an n-box: `upper_flags[i]` picks `hi_i` over `lo_i`.
///
/// Vertices are indexed with axis 0 as the most significant bit, so index
/// `0` is the all-lower vertex and `2^n - 1` the all-upper one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexPattern {
    upper_flags: Vec<bool>,
    sign: i8,
}

impl VertexPattern {
    pub fn new(upper_flags: Vec<bool>) -> Self {
        let lower = upper_flags.iter().filter(|&&u| !u).count();
        let sign = if lower % 2 == 0 { 1 } else { -1 };
        VertexPattern { upper_flags, sign }
    }

    pub fn from_index(n: usize, index: usize) -> Self {
        assert!(n < usize::BITS as usize && index < (1usize << n));
        VertexPattern::new((0..n).map(|i| index >> (n - 1 - i) & 1 == 1).collect())
    }

    /// All `2^n` vertices in index order.
    pub fn all(n: usize) -> impl Iterator<Item = VertexPattern> {
        (0..1usize << n).map(move |idx| VertexPattern::from_index(n, idx))
    }

    pub fn index(&self) -> usize {
        self.upper_flags
            .iter()
            .fold(0, |acc, &up| (acc << 1) | usize::from(up))
    }

    pub fn dimension(&self) -> usize {
        self.upper_flags.len()
    }

    pub fn upper_flags(&self) -> &[bool] {
        &self.upper_flags
    }

    pub fn is_upper(&self, axis: usize) -> bool {
        self.upper_flags[axis]
    }

    pub fn upper_count(&self) -> usize {
        self.upper_flags.iter().filter(|&&u| u).count()
    }

    /// `+1` when an even number of coordinates take the lower endpoint.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn with_flag(&self, axis: usize, upper: bool) -> VertexPattern {
        let mut flags = self.upper_flags.clone();
        flags[axis] = upper;
        VertexPattern::new(flags)
    }

    /// Binary label such as `0110` (1 = upper).
    pub fn label(&self) -> String {
        self.upper_flags
            .iter()
            .map(|&u| if u { '1' } else { '0' })
            .collect()
    }
}

/// Signed cell masses on a rectilinear partition of the unit cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassGrid {
    partitions: Vec<AxisPartition>,
    masses: BTreeMap<Vec<usize>, Rational>,
}

impl MassGrid {
    pub fn new(partitions: Vec<AxisPartition>) -> Result<Self, GridError> {
        if partitions.is_empty() {
            return Err(GridError::NoAxes);
        }
        Ok(MassGrid {
            partitions,
            masses: BTreeMap::new(),
        })
    }

    /// Same partition `breakpoints` on each of `n` axes.
    pub fn symmetric(n: usize, breakpoints: &[Rational]) -> Result<Self, GridError> {
        let partition = AxisPartition::new(breakpoints.to_vec())?;
        MassGrid::new(vec![partition; n])
    }

    pub fn dimension(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[AxisPartition] {
        &self.partitions
    }

    /// Number of slabs per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.partitions.iter().map(|p| p.num_slabs()).collect()
    }

    fn check_cell(&self, cell: &[usize]) -> Result<(), GridError> {
        if cell.len() != self.dimension()
            || cell
                .iter()
                .zip(&self.partitions)
                .any(|(&c, p)| c >= p.num_slabs())
        {
            return Err(GridError::CellOutOfRange {
                cell: cell.to_vec(),
                shape: self.shape(),
            });
        }
        Ok(())
    }

    /// Sets the mass of one cell; a zero mass removes the entry.
    pub fn set_mass(&mut self, cell: Vec<usize>, mass: Rational) -> Result<(), GridError> {
        self.check_cell(&cell)?;
        if mass.is_zero() {
            self.masses.remove(&cell);
        } else {
            self.masses.insert(cell, mass);
        }
        Ok(())
    }

    pub fn add_mass(&mut self, cell: Vec<usize>, mass: &Rational) -> Result<(), GridError> {
        let current = self.mass(&cell);
        self.set_mass(cell, current + mass)
    }

    pub fn mass(&self, cell: &[usize]) -> Rational {
        self.masses.get(cell).cloned().unwrap_or_default()
    }

    /// Non-zero cells in lexicographic cell order.
    pub fn cells(&self) -> impl Iterator<Item = (&Vec<usize>, &Rational)> {
        self.masses.iter()
    }

    pub fn total_mass(&self) -> Rational {
        self.masses.values().sum()
    }

    /// Bounds of a cell as a box.
    pub fn cell_box(&self, cell: &[usize]) -> Result<NBox, GridError> {
        self.check_cell(cell)?;
        NBox::new(
            cell.iter()
                .zip(&self.partitions)
                .map(|(&c, p)| (p.breakpoints[c].clone(), p.breakpoints[c + 1].clone()))
                .collect(),
        )
    }

    /// Sums out `axis` (0-based). Equivalent to fixing that argument of `Q` at 1.
    pub fn marginalize(&self, axis: usize) -> Result<MassGrid, GridError> {
        let n = self.dimension();
        if n < 2 {
            return Err(GridError::CannotMarginalize);
        }
        if axis >= n {
            return Err(GridError::AxisOutOfRange { axis, dimension: n });
        }
        let mut partitions = self.partitions.clone();
        partitions.remove(axis);
        let mut out = MassGrid::new(partitions)?;
        for (cell, mass) in &self.masses {
            let mut reduced = cell.clone();
            reduced.remove(axis);
            out.add_mass(reduced, mass)?;
        }
        Ok(out)
    }

    /// Re-expresses the grid on finer partitions, splitting each cell's mass
    /// in proportion to the volume of its sub-cells. The induced function is
    /// unchanged.
    pub fn refine(&self, partitions: Vec<AxisPartition>) -> Result<MassGrid, GridError> {
        let n = self.dimension();
        if partitions.len() != n {
            return Err(GridError::DimensionMismatch {
                expected: n,
                actual: partitions.len(),
            });
        }
        // For each axis, old slab -> list of (new slab, share of old width).
        let mut pieces: Vec<Vec<Vec<(usize, Rational)>>> = Vec::with_capacity(n);
        for (axis, (old, new)) in self.partitions.iter().zip(&partitions).enumerate() {
            let mut per_slab = vec![Vec::new(); old.num_slabs()];
            for t in &old.breakpoints {
                if new.breakpoints.binary_search(t).is_err() {
                    return Err(GridError::NotARefinement(axis));
                }
            }
            for j in 0..new.num_slabs() {
                let (slab, _) = old.locate(&new.breakpoints[j]);
                per_slab[slab].push((j, new.width(j) / old.width(slab)));
            }
            pieces.push(per_slab);
        }
        let mut out = MassGrid::new(partitions)?;
        for (cell, mass) in &self.masses {
            let mut stack: Vec<(Vec<usize>, Rational)> = vec![(Vec::new(), mass.clone())];
            for (axis, &c) in cell.iter().enumerate() {
                let mut next = Vec::new();
                for (prefix, m) in &stack {
                    for (j, share) in &pieces[axis][c] {
                        let mut idx = prefix.clone();
                        idx.push(*j);
                        next.push((idx, m * share));
                    }
                }
                stack = next;
            }
            for (idx, m) in stack {
                out.add_mass(idx, &m)?;
            }
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<MassGrid, GridError> {
        let file: GridFile =
            serde_json::from_str(text).map_err(|e| GridError::Format(e.to_string()))?;
        file.into_grid()
    }

    /// Grid file JSON. Cells appear in lexicographic order, so the output
    /// is deterministic.
    pub fn to_json(&self) -> String {
        let file = GridFile::from_grid(self);
        serde_json::to_string_pretty(&file).expect("grid file serializes")
    }
}

pub const GRID_SCHEMA: &str = "qcmass.grid/1";

fn grid_schema() -> String {
    GRID_SCHEMA.to_string()
}

/// On-disk grid format. `schema` is optional on input.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default = "grid_schema")]
    schema: String,
    dimension: usize,
    partitions: Vec<Vec<Rational>>,
    masses: Vec<CellMass>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellMass {
    cell: Vec<usize>,
    mass: Rational,
}

impl GridFile {
    fn from_grid(grid: &MassGrid) -> Self {
        GridFile {
            schema: grid_schema(),
            dimension: grid.dimension(),
            partitions: grid
                .partitions
                .iter()
                .map(|p| p.breakpoints.clone())
                .collect(),
            masses: grid
                .masses
                .iter()
                .map(|(cell, mass)| CellMass {
                    cell: cell.clone(),
                    mass: mass.clone(),
                })
                .collect(),
        }
    }

    fn into_grid(self) -> Result<MassGrid, GridError> {
        if self.schema != GRID_SCHEMA {
            return Err(GridError::Format(format!("unsupported schema {:?}", self.schema)));
        }
        if self.partitions.len() != self.dimension {
            return Err(GridError::DimensionMismatch {
                expected: self.dimension,
                actual: self.partitions.len(),
            });
        }
        let partitions = self
            .partitions
            .into_iter()
            .map(AxisPartition::new)
            .collect::<Result<Vec<_>, _>>()?;
        let mut grid = MassGrid::new(partitions)?;
        let mut seen = std::collections::BTreeSet::new();
        for CellMass { cell, mass } in self.masses {
            if !seen.insert(cell.clone()) {
                return Err(GridError::DuplicateCell(cell));
            }
            grid.set_mass(cell, mass)?;
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxiomKind {
    Grounded,
    UniformMargin,
    Monotone,
    Lipschitz,
}

impl fmt::Display for AxiomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxiomKind::Grounded => "grounded",
            AxiomKind::UniformMargin => "uniform_margins",
            AxiomKind::Monotone => "monotone",
            AxiomKind::Lipschitz => "lipschitz",
        })
    }
}

/// One failed inequality. The required relation depends on the kind:
/// grounded and uniform-margin checks need `lhs = rhs`, monotone needs
/// `lhs >= rhs`, Lipschitz needs `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomViolation {
    pub kind: AxiomKind,
    pub location: String,
    pub lhs: Rational,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomReport {
    pub grounded_ok: bool,
    pub uniform_margins_ok: bool,
    pub monotone_ok: bool,
    pub lipschitz_ok: bool,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn from_violations(violations: Vec<AxiomViolation>) -> Self {
        let ok = |kind| !violations.iter().any(|v| v.kind == kind);
        AxiomReport {
            grounded_ok: ok(AxiomKind::Grounded),
            uniform_margins_ok: ok(AxiomKind::UniformMargin),
            monotone_ok: ok(AxiomKind::Monotone),
            lipschitz_ok: ok(AxiomKind::Lipschitz),
            violations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeBound {
    /// `max(sum u_i - n + 1, 0) <= Q(u)`
    Lower,
    /// `Q(u) <= min u_i`
    Upper,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeViolation {
    pub node: Vec<Rational>,
    pub bound: EnvelopeBound,
    pub value: Rational,
    pub bound_value: Rational,
}

/// The function induced by a [`MassGrid`], with node values cached.
#[derive(Debug, Clone)]
pub struct GridQuasiCopula {
    grid: MassGrid,
    /// Nodes per axis (slabs + 1).
    node_shape: Vec<usize>,
    strides: Vec<usize>,
    node_values: Vec<Rational>,
}

/// Builds the cumulative node-value cache for `grid`.
pub fn make_grid_qc(grid: MassGrid) -> Result<GridQuasiCopula, GridError> {
    GridQuasiCopula::new(grid)
}

impl GridQuasiCopula {
    pub fn new(grid: MassGrid) -> Result<Self, GridError> {
        for cell in grid.masses.keys() {
            grid.check_cell(cell)?;
        }
        let node_shape: Vec<usize> = grid.shape().iter().map(|k| k + 1).collect();
        let mut strides = vec![1; node_shape.len()];
        for i in (0..node_shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * node_shape[i + 1];
        }
        let total: usize = node_shape.iter().product();
        let mut values = vec![Rational::zero(); total];
        // Cell c contributes to node c + 1 first; prefix sums along every axis
        // then turn point masses into orthant sums.
        for (cell, mass) in &grid.masses {
            let idx: usize = cell.iter().zip(&strides).map(|(&c, s)| (c + 1) * s).sum();
            values[idx] = mass.clone();
        }
        for axis in 0..node_shape.len() {
            let stride = strides[axis];
            for idx in 0..total {
                if !(idx / stride).is_multiple_of(node_shape[axis]) {
                    let prev = values[idx - stride].clone();
                    values[idx] += prev;
                }
            }
        }
        Ok(GridQuasiCopula {
            grid,
            node_shape,
            strides,
            node_values: values,
        })
    }

    pub fn grid(&self) -> &MassGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn total_mass(&self) -> Rational {
        self.node_values.last().cloned().unwrap_or_default()
    }

    fn node_index(&self, node: &[usize]) -> usize {
        node.iter().zip(&self.strides).map(|(&j, s)| j * s).sum()
    }

    fn node_multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut node = vec![0; self.node_shape.len()];
        for (axis, stride) in self.strides.iter().enumerate() {
            node[axis] = idx / stride;
            idx %= stride;
        }
        node
    }

    fn node_point(&self, node: &[usize]) -> Vec<Rational> {
        node.iter()
            .zip(&self.grid.partitions)
            .map(|(&j, p)| p.breakpoints[j].clone())
            .collect()
    }

    /// Value at the grid node with per-axis breakpoint indices `node`.
    pub fn node_value(&self, node: &[usize]) -> &Rational {
        &self.node_values[self.node_index(node)]
    }

    /// `Q(point)`: multilinear interpolation of the node values inside the
    /// cell containing `point`.
    pub fn evaluate(&self, point: &[Rational]) -> Result<Rational, GridError> {
        let n = self.dimension();
        if point.len() != n {
            return Err(GridError::DimensionMismatch {
                expected: n,
                actual: point.len(),
            });
        }
        let mut base = Vec::with_capacity(n);
        let mut fracs = Vec::with_capacity(n);
        for (axis, (p, partition)) in point.iter().zip(&self.grid.partitions).enumerate() {
            if p.is_negative() || *p > Rational::one() {
                return Err(GridError::OutOfUnitInterval {
                    axis,
                    value: p.clone(),
                });
            }
            let (slab, frac) = partition.locate(p);
            base.push(slab);
            fracs.push(frac);
        }
        // Axes sitting exactly on a lower node need only one corner.
        let active: Vec<usize> = (0..n).filter(|&i| !fracs[i].is_zero()).collect();
        let base_idx = self.node_index(&base);
        let mut value = Rational::zero();
        for corner in 0..1usize << active.len() {
            let mut weight = Rational::one();
            let mut idx = base_idx;
            for (bit, &axis) in active.iter().enumerate() {
                if corner >> bit & 1 == 1 {
                    weight *= &fracs[axis];
                    idx += self.strides[axis];
                } else {
                    weight *= &(Rational::one() - &fracs[axis]);
                }
            }
            if !weight.is_zero() {
                value += weight * &self.node_values[idx];
            }
        }
        Ok(value)
    }

    /// Inclusion-exclusion sum of `Q` over the `2^n` vertices of `bx`.
    pub fn box_volume(&self, bx: &NBox) -> Result<Rational, GridError> {
        let n = self.dimension();
        if bx.dimension() != n {
            return Err(GridError::DimensionMismatch {
                expected: n,
                actual: bx.dimension(),
            });
        }
        let mut volume = Rational::zero();
        for pattern in VertexPattern::all(n) {
            let value = self.evaluate(&bx.vertex(&pattern))?;
            if pattern.sign() > 0 {
                volume += value;
            } else {
                volume -= value;
            }
        }
        Ok(volume)
    }

    /// Checks the quasi-copula axioms on the grid skeleton.
    ///
    /// Inside a cell `Q` is multilinear, so its partial derivative along an
    /// axis is a convex combination of the slopes of the cell's edges in that
    /// direction. Monotonicity and the coordinatewise 1-Lipschitz bound
    /// therefore hold everywhere iff they hold on every grid edge. The
    /// marginal condition `Q(1,..,u_i,..,1) = u_i` is piecewise linear in
    /// `u_i` and reduces to slab sums equal to slab widths.
    pub fn verify_axioms(&self) -> AxiomReport {
        let mut violations = Vec::new();
        let n = self.dimension();
        let total = self.node_values.len();

        for idx in 0..total {
            let node = self.node_multi_index(idx);
            if node.contains(&0) && !self.node_values[idx].is_zero() {
                violations.push(AxiomViolation {
                    kind: AxiomKind::Grounded,
                    location: format!("node {}", render_point(&self.node_point(&node))),
                    lhs: self.node_values[idx].clone(),
                    rhs: Rational::zero(),
                });
            }
        }

        for axis in 0..n {
            let partition = &self.grid.partitions[axis];
            let mut sums = vec![Rational::zero(); partition.num_slabs()];
            for (cell, mass) in &self.grid.masses {
                sums[cell[axis]] += mass;
            }
            for (slab, sum) in sums.into_iter().enumerate() {
                let width = partition.width(slab);
                if sum != width {
                    violations.push(AxiomViolation {
                        kind: AxiomKind::UniformMargin,
                        location: format!(
                            "axis {} slab [{},{}]",
                            axis + 1,
                            partition.breakpoints[slab],
                            partition.breakpoints[slab + 1]
                        ),
                        lhs: sum,
                        rhs: width,
                    });
                }
            }
        }

        for axis in 0..n {
            let partition = &self.grid.partitions[axis];
            let stride = self.strides[axis];
            for idx in 0..total {
                let j = (idx / stride) % self.node_shape[axis];
                if j + 1 >= self.node_shape[axis] {
                    continue;
                }
                let diff = &self.node_values[idx + stride] - &self.node_values[idx];
                let width = partition.width(j);
                let location = || {
                    format!(
                        "edge along axis {} from {}",
                        axis + 1,
                        render_point(&self.node_point(&self.node_multi_index(idx)))
                    )
                };
                if diff.is_negative() {
                    violations.push(AxiomViolation {
                        kind: AxiomKind::Monotone,
                        location: location(),
                        lhs: diff.clone(),
                        rhs: Rational::zero(),
                    });
                }
                if diff > width {
                    violations.push(AxiomViolation {
                        kind: AxiomKind::Lipschitz,
                        location: location(),
                        lhs: diff,
                        rhs: width,
                    });
                }
            }
        }

        AxiomReport::from_violations(violations)
    }

    /// Checks `W^n(u) <= Q(u) <= M(u)` at every grid node.
    pub fn frechet_envelope_check(&self) -> Vec<EnvelopeViolation> {
        let n = self.dimension() as i64;
        let mut out = Vec::new();
        for (idx, value) in self.node_values.iter().enumerate() {
            let point = self.node_point(&self.node_multi_index(idx));
            let sum: Rational = point.iter().sum();
            let lower = (sum - Rational::from_integer(n - 1)).max(Rational::zero());
            let upper = point.iter().min().cloned().unwrap_or_default();
            if *value < lower {
                out.push(EnvelopeViolation {
                    node: point.clone(),
                    bound: EnvelopeBound::Lower,
                    value: value.clone(),
                    bound_value: lower,
                });
            }
            if *value > upper {
                out.push(EnvelopeViolation {
                    node: point,
                    bound: EnvelopeBound::Upper,
                    value: value.clone(),
                    bound_value: upper,
                });
            }
        }
        out
    }

    pub fn marginalize(&self, axis: usize) -> Result<GridQuasiCopula, GridError> {
        GridQuasiCopula::new(self.grid.marginalize(axis)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinExample {
    /// Four-dimensional grid on `{0, 3/7, 6/7, 1}` with mass `-9/7` on
    /// `[3/7,6/7]^4`.
    Q1,
    /// Four-dimensional grid on `{0, 1/2, 1}` with mass `2` on `[1/2,1]^4`.
    Q2,
}

impl FromStr for BuiltinExample {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(BuiltinExample::Q1),
            "q2" => Ok(BuiltinExample::Q2),
            _ => Err(GridError::UnknownExample(s.to_string())),
        }
    }
}

impl fmt::Display for BuiltinExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinExample::Q1 => "q1",
            BuiltinExample::Q2 => "q2",
        })
    }
}

fn all_cells(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new()];
    for &k in shape {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |j| {
                    let mut c = prefix.clone();
                    c.push(j);
                    c
                })
            })
            .collect();
    }
    cells
}

pub fn builtin_grid(id: BuiltinExample) -> MassGrid {
    match id {
        BuiltinExample::Q1 => {
            let mut grid =
                MassGrid::symmetric(4, &[r(0, 1), r(3, 7), r(6, 7), r(1, 1)]).expect("valid");
            for cell in all_cells(&[3, 3, 3, 3]) {
                let ones = cell.iter().filter(|&&c| c == 1).count();
                let zeros = cell.iter().filter(|&&c| c == 0).count();
                let twos = cell.iter().filter(|&&c| c == 2).count();
                let mass = match (ones, zeros, twos) {
                    (4, _, _) => r(-9, 7),
                    (3, 1, _) => r(3, 7),
                    (3, _, 1) => r(1, 7),
                    _ => continue,
                };
                grid.set_mass(cell, mass).expect("in range");
            }
            grid
        }
        BuiltinExample::Q2 => {
            let mut grid = MassGrid::symmetric(4, &[r(0, 1), r(1, 2), r(1, 1)]).expect("valid");
            for cell in all_cells(&[2, 2, 2, 2]) {
                let mass = match cell.iter().filter(|&&c| c == 0).count() {
                    0 => r(2, 1),
                    1 => r(-1, 1),
                    2 => r(1, 2),
                    _ => continue,
                };
                grid.set_mass(cell, mass).expect("in range");
            }
            grid
        }
    }
}

pub fn builtin_example(id: BuiltinExample) -> GridQuasiCopula {
    GridQuasiCopula::new(builtin_grid(id)).expect("builtin grids are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1() -> GridQuasiCopula {
        builtin_example(BuiltinExample::Q1)
    }

    fn q2() -> GridQuasiCopula {
        builtin_example(BuiltinExample::Q2)
    }

    fn single_cell(n: usize, mass: Rational) -> GridQuasiCopula {
        let mut grid = MassGrid::new(vec![AxisPartition::uniform(1); n]).unwrap();
        grid.set_mass(vec![0; n], mass).unwrap();
        make_grid_qc(grid).unwrap()
    }

    fn pt(xs: &[(i64, i64)]) -> Vec<Rational> {
        xs.iter().map(|&(p, q)| r(p, q)).collect()
    }

    #[test]
    fn partition_validation() {
        assert!(AxisPartition::new(vec![r(0, 1), r(1, 1)]).is_ok());
        assert!(AxisPartition::new(vec![r(0, 1), r(1, 2), r(1, 2), r(1, 1)]).is_err());
        assert!(AxisPartition::new(vec![r(1, 7), r(1, 1)]).is_err());
        assert!(AxisPartition::new(vec![r(0, 1), r(6, 7)]).is_err());
        assert!(AxisPartition::new(vec![r(0, 1)]).is_err());
    }

    #[test]
    fn box_validation() {
        assert!(NBox::new(vec![(r(1, 2), r(1, 3))]).is_err());
        assert!(NBox::new(vec![(r(-1, 2), r(1, 3))]).is_err());
        assert!(NBox::new(vec![(r(0, 1), r(3, 2))]).is_err());
        assert!(NBox::new(vec![]).is_err());
    }

    #[test]
    fn box_literals() {
        let bx: NBox = "3/7:6/7, 0:1".parse().unwrap();
        assert_eq!(bx.intervals(), &[(r(3, 7), r(6, 7)), (r(0, 1), r(1, 1))]);
        assert_eq!(bx.to_string(), "3/7:6/7,0:1");
        assert_eq!("0.5:1".parse::<NBox>().unwrap().lo(0), &r(1, 2));
        for bad in ["", "1/2", "0:1,", "a:1", "0:1:1", "1/0:1"] {
            assert_eq!(bad.parse::<NBox>(), Err(GridError::BadBox(bad.into())), "{bad:?}");
        }
        assert!(matches!("1:0".parse::<NBox>(), Err(GridError::BadInterval { .. })));
    }

    #[test]
    fn vertex_signs_follow_lower_parity() {
        assert_eq!(VertexPattern::from_index(4, 0b1111).sign(), 1);
        assert_eq!(VertexPattern::from_index(4, 0b0000).sign(), 1);
        assert_eq!(VertexPattern::from_index(4, 0b0111).sign(), -1);
        assert_eq!(VertexPattern::from_index(3, 0b111).sign(), 1);
        assert_eq!(VertexPattern::from_index(3, 0b000).sign(), -1);
        let p = VertexPattern::from_index(4, 0b0011);
        assert_eq!(p.label(), "0011");
        assert_eq!(p.index(), 3);
        assert_eq!(p.upper_flags(), &[false, false, true, true]);
    }

    #[test]
    fn cell_index_out_of_range() {
        let mut grid = MassGrid::new(vec![AxisPartition::uniform(2); 2]).unwrap();
        assert!(matches!(
            grid.set_mass(vec![2, 0], r(1, 1)),
            Err(GridError::CellOutOfRange { .. })
        ));
        assert!(grid.set_mass(vec![0], r(1, 1)).is_err());
    }

    #[test]
    fn node_values_of_examples() {
        let q1 = q1();
        assert_eq!(q1.node_value(&[2, 2, 2, 2]), &r(3, 7));
        assert_eq!(q1.node_value(&[1, 1, 1, 1]), &Rational::zero());
        assert_eq!(q1.total_mass(), Rational::one());
        assert_eq!(q2().total_mass(), Rational::one());
    }

    #[test]
    fn empty_and_unit_grids() {
        let empty = make_grid_qc(MassGrid::new(vec![AxisPartition::uniform(3); 3]).unwrap()).unwrap();
        assert!(empty.node_values.iter().all(Rational::is_zero));
        let unit = single_cell(3, Rational::one());
        assert_eq!(unit.node_value(&[1, 1, 1]), &Rational::one());
        assert_eq!(unit.evaluate(&pt(&[(1, 2), (1, 3), (1, 1)])).unwrap(), r(1, 6));
    }

    #[test]
    fn evaluation_matches_reported_values() {
        let q1 = q1();
        assert_eq!(q1.evaluate(&pt(&[(3, 7); 4])).unwrap(), Rational::zero());
        assert_eq!(q1.evaluate(&pt(&[(6, 7); 4])).unwrap(), r(3, 7));
        for v in [(0, 1), (3, 7), (6, 7), (1, 1)] {
            assert_eq!(
                q1.evaluate(&pt(&[(1, 1), (1, 1), (1, 1), v])).unwrap(),
                r(v.0, v.1)
            );
        }
        assert_eq!(q1.evaluate(&pt(&[(1, 2), (0, 1), (2, 3), (1, 1)])).unwrap(), Rational::zero());

        let q2 = q2();
        assert_eq!(q2.evaluate(&pt(&[(1, 2), (1, 2), (1, 1), (1, 1)])).unwrap(), r(1, 2));
        assert_eq!(q2.evaluate(&pt(&[(1, 1), (1, 2), (1, 1), (1, 2)])).unwrap(), r(1, 2));
        assert_eq!(q2.evaluate(&pt(&[(1, 2), (1, 1), (1, 1), (1, 1)])).unwrap(), r(1, 2));
    }

    #[test]
    fn evaluation_rejects_bad_points() {
        let q1 = q1();
        assert!(matches!(
            q1.evaluate(&pt(&[(1, 2); 3])),
            Err(GridError::DimensionMismatch { expected: 4, actual: 3 })
        ));
        assert!(matches!(
            q1.evaluate(&pt(&[(1, 2), (1, 2), (3, 2), (1, 2)])),
            Err(GridError::OutOfUnitInterval { axis: 2, .. })
        ));
        assert!(q1.evaluate(&pt(&[(-1, 2), (1, 2), (1, 2), (1, 2)])).is_err());
    }

    #[test]
    fn volumes_of_examples() {
        let b1 = NBox::cube(r(3, 7), r(6, 7), 4).unwrap();
        let b2 = NBox::cube(r(1, 2), r(1, 1), 4).unwrap();
        assert_eq!(q1().box_volume(&b1).unwrap(), r(-9, 7));
        assert_eq!(q2().box_volume(&b2).unwrap(), r(2, 1));
        assert_eq!(q1().box_volume(&NBox::unit(4)).unwrap(), Rational::one());
        assert_eq!(q2().box_volume(&NBox::unit(4)).unwrap(), Rational::one());
        let flat = NBox::new(vec![
            (r(0, 1), r(1, 1)),
            (r(1, 3), r(1, 3)),
            (r(0, 1), r(1, 2)),
            (r(1, 7), r(5, 7)),
        ])
        .unwrap();
        assert_eq!(q1().box_volume(&flat).unwrap(), Rational::zero());
        assert!(q1().box_volume(&NBox::unit(3)).is_err());
    }

    #[test]
    fn examples_satisfy_axioms() {
        for qc in [q1(), q2()] {
            let report = qc.verify_axioms();
            assert!(report.passed(), "{:?}", report.violations);
            assert!(report.grounded_ok && report.uniform_margins_ok);
            assert!(report.monotone_ok && report.lipschitz_ok);
            assert!(qc.frechet_envelope_check().is_empty());
        }
    }

    #[test]
    fn perturbed_center_breaks_margins() {
        let mut grid = builtin_grid(BuiltinExample::Q1);
        grid.set_mass(vec![1, 1, 1, 1], r(-10, 7)).unwrap();
        let report = make_grid_qc(grid).unwrap().verify_axioms();
        assert!(!report.uniform_margins_ok);
        // Each axis's middle slab now sums to 3/7 - 1/7 = 2/7.
        let margin: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.kind == AxiomKind::UniformMargin)
            .collect();
        assert_eq!(margin.len(), 4);
        assert!(margin.iter().all(|v| v.lhs == r(2, 7) && v.rhs == r(3, 7)));
    }

    #[test]
    fn heavy_single_cell_breaks_lipschitz() {
        let report = single_cell(2, r(2, 1)).verify_axioms();
        assert!(!report.lipschitz_ok);
        assert!(report.monotone_ok && report.grounded_ok);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == AxiomKind::Lipschitz && v.lhs == r(2, 1) && v.rhs == r(1, 1)));
    }

    #[test]
    fn negative_unit_mass_breaks_envelope() {
        let violations = single_cell(2, r(-1, 1)).frechet_envelope_check();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].node, pt(&[(1, 1), (1, 1)]));
        assert_eq!(violations[0].bound, EnvelopeBound::Lower);
        assert_eq!(violations[0].value, r(-1, 1));
        assert_eq!(violations[0].bound_value, r(1, 1));
    }

    #[test]
    fn q1_margin_layout() {
        let m = builtin_grid(BuiltinExample::Q1).marginalize(3).unwrap();
        assert_eq!(m.dimension(), 3);
        // Oracle: sum over the dropped slab index directly.
        let full = builtin_grid(BuiltinExample::Q1);
        for cell in all_cells(&[3, 3, 3]) {
            let direct: Rational = (0..3)
                .map(|k| {
                    let mut c = cell.clone();
                    c.push(k);
                    full.mass(&c)
                })
                .sum();
            assert_eq!(m.mass(&cell), direct);
        }
        assert_eq!(m.mass(&[1, 1, 1]), r(-5, 7));
        for c in [[1, 1, 0], [1, 0, 1], [0, 1, 1]] {
            assert_eq!(m.mass(&c), r(3, 7));
        }
        for c in [[1, 1, 2], [1, 2, 1], [2, 1, 1]] {
            assert_eq!(m.mass(&c), r(1, 7));
        }
        assert_eq!(m.cells().count(), 7);
    }

    #[test]
    fn q2_margin_is_unit_mass_on_upper_cube() {
        for axis in 0..4 {
            let m = q2().marginalize(axis).unwrap();
            let upper = NBox::cube(r(1, 2), r(1, 1), 3).unwrap();
            assert_eq!(m.box_volume(&upper).unwrap(), Rational::one());
            assert!(m.verify_axioms().passed());
        }
    }

    #[test]
    fn marginalize_errors_and_one_cell() {
        let one = MassGrid::new(vec![AxisPartition::uniform(1)]).unwrap();
        assert_eq!(one.marginalize(0), Err(GridError::CannotMarginalize));
        assert!(matches!(
            builtin_grid(BuiltinExample::Q2).marginalize(4),
            Err(GridError::AxisOutOfRange { axis: 4, dimension: 4 })
        ));
        let m = single_cell(2, Rational::one()).grid().marginalize(1).unwrap();
        assert_eq!(m.dimension(), 1);
        assert_eq!(m.mass(&[0]), Rational::one());
        assert_eq!(m.cells().count(), 1);
    }

    #[test]
    fn builtin_total_masses() {
        assert_eq!(builtin_grid(BuiltinExample::Q1).total_mass(), Rational::one());
        assert_eq!(builtin_grid(BuiltinExample::Q2).total_mass(), Rational::one());
        assert_eq!("Q1".parse::<BuiltinExample>().unwrap(), BuiltinExample::Q1);
        assert!("q3".parse::<BuiltinExample>().is_err());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let grid = builtin_grid(BuiltinExample::Q1);
        let text = grid.to_json();
        assert_eq!(MassGrid::from_json(&text).unwrap(), grid);
        assert!(text.contains("\"schema\": \"qcmass.grid/1\""));
        let future = text.replace("qcmass.grid/1", "qcmass.grid/2");
        assert!(matches!(MassGrid::from_json(&future), Err(GridError::Format(_))));
        let dup = r#"{"dimension":1,"partitions":[["0","1"]],
            "masses":[{"cell":[0],"mass":"1"},{"cell":[0],"mass":"1"}]}"#;
        assert_eq!(MassGrid::from_json(dup), Err(GridError::DuplicateCell(vec![0])));
        let bad_dim = r#"{"dimension":2,"partitions":[["0","1"]],"masses":[]}"#;
        assert!(MassGrid::from_json(bad_dim).is_err());
        let bad_mass = r#"{"dimension":1,"partitions":[["0","1"]],"masses":[{"cell":[0],"mass":"1/0"}]}"#;
        assert!(matches!(MassGrid::from_json(bad_mass), Err(GridError::Format(_))));
        let out_of_range = r#"{"dimension":1,"partitions":[["0","1/2","1"]],"masses":[{"cell":[2],"mass":"1"}]}"#;
        assert!(matches!(
            MassGrid::from_json(out_of_range),
            Err(GridError::CellOutOfRange { .. })
        ));
    }

    #[test]
    fn refine_preserves_function() {
        let grid = builtin_grid(BuiltinExample::Q2);
        let finer = AxisPartition::new(vec![r(0, 1), r(1, 4), r(1, 2), r(2, 3), r(1, 1)]).unwrap();
        let refined = grid.refine(vec![finer; 4]).unwrap();
        let a = make_grid_qc(grid).unwrap();
        let b = make_grid_qc(refined).unwrap();
        for p in [pt(&[(1, 4), (2, 3), (1, 2), (1, 1)]), pt(&[(1, 5), (3, 5), (5, 7), (2, 3)])] {
            assert_eq!(a.evaluate(&p).unwrap(), b.evaluate(&p).unwrap());
        }
        let coarse = AxisPartition::new(vec![r(0, 1), r(1, 3), r(1, 1)]).unwrap();
        assert_eq!(
            builtin_grid(BuiltinExample::Q2).refine(vec![coarse; 4]),
            Err(GridError::NotARefinement(0))
        );
    }
}
