//! Strategies, oracles and property bodies shared by the property tests
//! and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use qcmass_core::numeric::r;
use qcmass_core::*;

/// Rational in `[0,1]` with a small denominator.
pub fn unit_rational() -> impl Strategy<Value = Rational> {
    (1i64..=24).prop_flat_map(|d| (0..=d).prop_map(move |p| r(p, d)))
}

/// Partition with 1 to 3 slabs.
pub fn partition() -> impl Strategy<Value = AxisPartition> {
    prop::collection::btree_set(unit_rational(), 0..3).prop_map(|inner| {
        let mut points: BTreeSet<Rational> = inner;
        points.insert(Rational::zero());
        points.insert(Rational::one());
        AxisPartition::new(points.into_iter().collect()).unwrap()
    })
}

/// Grid with arbitrary signed masses (not necessarily a quasi-copula).
pub fn any_grid(max_dim: usize) -> impl Strategy<Value = MassGrid> {
    prop::collection::vec(partition(), 1..=max_dim).prop_flat_map(|parts| {
        let grid = MassGrid::new(parts).unwrap();
        let shape = grid.shape();
        let cells = all_cells(&shape);
        let count = cells.len();
        prop::collection::vec((-12i64..=12, 1i64..=9), count).prop_map(move |ms| {
            let mut g = grid.clone();
            for (cell, (p, q)) in cells.iter().zip(ms) {
                g.set_mass(cell.clone(), r(p, q)).unwrap();
            }
            g
        })
    })
}

pub fn all_cells(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new()];
    for &k in shape {
        let mut next = Vec::new();
        for prefix in &cells {
            for j in 0..k {
                let mut c = prefix.clone();
                c.push(j);
                next.push(c);
            }
        }
        cells = next;
    }
    cells
}

fn union_partition(a: &AxisPartition, b: &AxisPartition) -> AxisPartition {
    let points: BTreeSet<Rational> = a
        .breakpoints()
        .iter()
        .chain(b.breakpoints())
        .cloned()
        .collect();
    AxisPartition::new(points.into_iter().collect()).unwrap()
}

/// `weight * a + (1 - weight) * b` on the common refinement.
pub fn mix(a: &MassGrid, b: &MassGrid, weight: &Rational) -> MassGrid {
    let parts: Vec<AxisPartition> = a
        .partitions()
        .iter()
        .zip(b.partitions())
        .map(|(p, q)| union_partition(p, q))
        .collect();
    let ra = a.refine(parts.clone()).unwrap();
    let rb = b.refine(parts.clone()).unwrap();
    let mut out = MassGrid::new(parts).unwrap();
    let rest = Rational::one() - weight;
    for (cell, m) in ra.cells() {
        out.add_mass(cell.clone(), &(m * weight)).unwrap();
    }
    for (cell, m) in rb.cells() {
        out.add_mass(cell.clone(), &(m * &rest)).unwrap();
    }
    out
}

/// Independence copula on the given partitions plus one checkerboard
/// perturbation that keeps every cell mass non-negative. Always a copula.
fn random_copula(
    parts: Vec<AxisPartition>,
    picks: Vec<(usize, usize)>,
    strength: Rational,
) -> MassGrid {
    let mut grid = MassGrid::new(parts.clone()).unwrap();
    for cell in all_cells(&grid.shape()) {
        let mass: Rational = cell
            .iter()
            .zip(&parts)
            .fold(Rational::one(), |acc, (&j, p)| acc * p.width(j));
        grid.set_mass(cell, mass).unwrap();
    }
    let n = parts.len();
    let usable = parts.iter().all(|p| p.num_slabs() >= 2);
    if usable {
        let chosen: Vec<(usize, usize)> = picks
            .iter()
            .zip(&parts)
            .map(|(&(a, b), p)| {
                let k = p.num_slabs();
                let a = a % k;
                let b = (a + 1 + b % (k - 1)) % k;
                (a, b)
            })
            .collect();
        let corners: Vec<(Vec<usize>, i32)> = (0..1usize << n)
            .map(|mask| {
                let mut sign = 1;
                let cell = (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            sign = -sign;
                            chosen[i].1
                        } else {
                            chosen[i].0
                        }
                    })
                    .collect();
                (cell, sign)
            })
            .collect();
        let floor = corners
            .iter()
            .map(|(c, _)| grid.mass(c))
            .min()
            .unwrap();
        let eps = floor * strength;
        for (cell, sign) in corners {
            let delta = if sign > 0 { eps.clone() } else { -&eps };
            grid.add_mass(cell, &delta).unwrap();
        }
    }
    grid
}

/// Lower-dimensional margins of the two builtin grids (proper
/// quasi-copulas in dimension 3 and 4).
fn proper_seed(n: usize, which: usize) -> MassGrid {
    let id = if which.is_multiple_of(2) {
        BuiltinExample::Q1
    } else {
        BuiltinExample::Q2
    };
    let mut grid = builtin_grid(id);
    while grid.dimension() > n {
        grid = grid.marginalize(grid.dimension() - 1).unwrap();
    }
    grid
}

/// Grid that satisfies every quasi-copula axiom: a mixture of a random copula
/// and a margin of one of the builtin examples.
pub fn valid_grid() -> impl Strategy<Value = MassGrid> {
    (2usize..=4)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(partition(), n),
                prop::collection::vec((0usize..8, 0usize..8), n),
                unit_rational(),
                0usize..2,
                unit_rational(),
            )
        })
        .prop_map(|(n, parts, picks, strength, which, weight)| {
            let copula = random_copula(parts, picks, strength);
            mix(&copula, &proper_seed(n, which), &weight)
        })
}

pub fn point(n: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(unit_rational(), n)
}

pub fn nbox(n: usize) -> impl Strategy<Value = NBox> {
    prop::collection::vec((unit_rational(), unit_rational()), n).prop_map(|pairs| {
        NBox::new(
            pairs
                .into_iter()
                .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
                .collect(),
        )
        .unwrap()
    })
}

/// Orthant mass by brute force: each cell contributes its mass times the
/// product over axes of the covered fraction of its slab.
pub fn orthant_mass_oracle(grid: &MassGrid, p: &[Rational]) -> Rational {
    let mut total = Rational::zero();
    for (cell, mass) in grid.cells() {
        let mut weight = mass.clone();
        for (axis, &slab) in cell.iter().enumerate() {
            let bps = grid.partitions()[axis].breakpoints();
            let (lo, hi) = (&bps[slab], &bps[slab + 1]);
            let covered = if p[axis] <= *lo {
                Rational::zero()
            } else if p[axis] >= *hi {
                hi - lo
            } else {
                &p[axis] - lo
            };
            weight = weight * covered / (hi - lo);
        }
        total += weight;
    }
    total
}

pub fn prop_evaluation_oracle(grid: MassGrid, p: Vec<Rational>) -> Result<(), TestCaseError> {
    let p: Vec<Rational> = p.into_iter().take(grid.dimension()).collect();
    prop_assume!(p.len() == grid.dimension());
    let expected = orthant_mass_oracle(&grid, &p);
    let qc = make_grid_qc(grid).unwrap();
    prop_assert_eq!(qc.evaluate(&p).unwrap(), expected);
    Ok(())
}

pub fn prop_volume_additivity(
    grid: MassGrid,
    bx: NBox,
    axis: usize,
    t: Rational,
) -> Result<(), TestCaseError> {
    let n = grid.dimension();
    prop_assume!(bx.dimension() >= n);
    let bx = NBox::new(bx.intervals()[..n].to_vec()).unwrap();
    let axis = axis % n;
    let at = bx.lo(axis) + &(bx.length(axis) * t);
    let (below, above) = bx.split(axis, &at).unwrap();
    let qc = make_grid_qc(grid).unwrap();
    let whole = qc.box_volume(&bx).unwrap();
    prop_assert_eq!(
        qc.box_volume(&below).unwrap() + qc.box_volume(&above).unwrap(),
        whole
    );
    Ok(())
}

pub fn prop_cell_round_trip(grid: MassGrid) -> Result<(), TestCaseError> {
    let qc = make_grid_qc(grid.clone()).unwrap();
    for cell in all_cells(&grid.shape()) {
        let bx = grid.cell_box(&cell).unwrap();
        prop_assert_eq!(qc.box_volume(&bx).unwrap(), grid.mass(&cell));
    }
    Ok(())
}

pub fn prop_margin_closure(grid: MassGrid) -> Result<(), TestCaseError> {
    let qc = make_grid_qc(grid.clone()).unwrap();
    let report = qc.verify_axioms();
    prop_assert!(report.passed(), "generator produced {:?}", report.violations);
    for axis in 0..grid.dimension() {
        let margin = qc.marginalize(axis).unwrap();
        let report = margin.verify_axioms();
        prop_assert!(report.passed(), "axis {}: {:?}", axis, report.violations);
    }
    Ok(())
}

pub fn prop_envelope(grid: MassGrid) -> Result<(), TestCaseError> {
    let qc = make_grid_qc(grid).unwrap();
    prop_assert!(qc.verify_axioms().passed());
    let violations = qc.frechet_envelope_check();
    prop_assert!(violations.is_empty(), "{:?}", violations);
    Ok(())
}

/// `|Q(u) - Q(v)| <= |u_i - v_i|` for points differing only on axis `i`.
pub fn prop_coordinate_lipschitz(
    grid: MassGrid,
    p: Vec<Rational>,
    axis: usize,
    other: Rational,
) -> Result<(), TestCaseError> {
    let n = grid.dimension();
    prop_assume!(p.len() >= n);
    let u: Vec<Rational> = p[..n].to_vec();
    let axis = axis % n;
    let mut v = u.clone();
    v[axis] = other;
    let qc = make_grid_qc(grid).unwrap();
    let dq = (qc.evaluate(&u).unwrap() - qc.evaluate(&v).unwrap()).abs();
    let du = (&u[axis] - &v[axis]).abs();
    prop_assert!(dq <= du, "{} > {}", dq, du);
    Ok(())
}

pub fn prop_sign_balance(n: usize) -> Result<(), TestCaseError> {
    let total: i64 = VertexPattern::all(n).map(|v| i64::from(v.sign())).sum();
    prop_assert_eq!(total, 0);
    if (2..=8).contains(&n) {
        let (lp, _) = build_extremal_lp(n, Sense::Minimize).unwrap();
        let sum: Rational = lp.objective.iter().map(|(_, c)| c.clone()).sum();
        prop_assert_eq!(sum, Rational::zero());
    }
    Ok(())
}

pub fn known_optimum(n: usize, sense: Sense) -> Rational {
    match (n, sense) {
        (2, Sense::Minimize) => r(-1, 3),
        (3, Sense::Minimize) => r(-4, 5),
        (4, Sense::Minimize) => r(-9, 7),
        (4, Sense::Maximize) => r(2, 1),
        (_, Sense::Maximize) => r(1, 1),
        _ => unreachable!(),
    }
}

/// Same optimum (and a certified one) after shuffling the rows.
pub fn prop_row_permutation(
    n: usize,
    sense: Sense,
    order: Vec<usize>,
) -> Result<(), TestCaseError> {
    let (mut lp, _) = build_extremal_lp(n, sense).unwrap();
    let mut keyed: Vec<(usize, Row)> = order.into_iter().zip(lp.rows.drain(..)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    lp.rows = keyed.into_iter().map(|(_, row)| row).collect();
    let sol = solve(&lp).unwrap();
    prop_assert_eq!(sol.status, Status::Optimal);
    prop_assert_eq!(sol.objective.clone().unwrap(), known_optimum(n, sense));
    prop_assert!(certify(&lp, &sol).unwrap().passed());
    Ok(())
}

/// Random objective over the extremal feasible set; the extracted witness
/// must reproduce the solver's objective under the original row checks.
pub fn prop_witness_round_trip(
    n: usize,
    sense: Sense,
    weights: Vec<i64>,
) -> Result<(), TestCaseError> {
    let (mut lp, layout) = build_extremal_lp(n, sense).unwrap();
    let objective: Vec<(usize, Rational)> = weights
        .iter()
        .cycle()
        .take(lp.num_vars())
        .enumerate()
        .filter(|(_, &w)| w != 0)
        .map(|(j, &w)| (j, Rational::from_integer(w)))
        .collect();
    lp.set_objective(objective).unwrap();
    let sol = solve(&lp).unwrap();
    prop_assert_eq!(sol.status, Status::Optimal);
    prop_assert!(certify(&lp, &sol).unwrap().passed());
    let asg = solution_to_assignment(&layout, &sol).unwrap();
    let values = asg.to_variables(&layout).unwrap();
    let report = lp.check_point(&values);
    prop_assert!(report.feasible);
    prop_assert_eq!(Some(report.objective_value), sol.objective);
    Ok(())
}

pub fn sense() -> impl Strategy<Value = Sense> {
    prop_oneof![Just(Sense::Minimize), Just(Sense::Maximize)]
}
