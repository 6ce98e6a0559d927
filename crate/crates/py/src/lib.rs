//! Python bindings. Rationals cross the boundary as `fractions.Fraction`
//! on output; inputs may be `int`, `Fraction` or a rational string such as
//! `"3/7"`. Floats are rejected so results stay exact.

#![allow(clippy::result_large_err)]

use pyo3::exceptions::{PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyFloat, PyList, PyTuple};

use qcmass_core as core;
use qcmass_core::{NBox, Rational, Sense, VertexAssignment, VertexPattern};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_fraction<'py>(py: Python<'py>, x: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((x.to_string(),))
}

fn from_python(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    if obj.is_instance_of::<PyFloat>() {
        return Err(PyTypeError::new_err(
            "floats are not accepted; pass an int, Fraction or rational string",
        ));
    }
    let text = if let Ok(s) = obj.extract::<String>() {
        s
    } else if obj.hasattr("numerator")? && obj.hasattr("denominator")? {
        format!(
            "{}/{}",
            obj.getattr("numerator")?.str()?,
            obj.getattr("denominator")?.str()?
        )
    } else {
        return Err(PyTypeError::new_err(format!(
            "cannot read {} as a rational",
            obj.get_type().name()?
        )));
    };
    text.parse().map_err(value_error)
}

fn parse_sense(direction: &str) -> PyResult<Sense> {
    match direction {
        "min" => Ok(Sense::Minimize),
        "max" => Ok(Sense::Maximize),
        other => Err(PyValueError::new_err(format!(
            "direction must be 'min' or 'max', got {other:?}"
        ))),
    }
}

/// Accepts `"lo:hi,lo:hi,..."` or a sequence of `(lo, hi)` pairs.
fn parse_box(obj: &Bound<'_, PyAny>) -> PyResult<NBox> {
    if let Ok(s) = obj.extract::<String>() {
        return s.parse().map_err(value_error);
    }
    let mut intervals = Vec::new();
    for pair in obj.try_iter()? {
        let pair = pair?;
        let lo = from_python(&pair.get_item(0)?)?;
        let hi = from_python(&pair.get_item(1)?)?;
        intervals.push((lo, hi));
    }
    NBox::new(intervals).map_err(value_error)
}

fn box_to_python<'py>(py: Python<'py>, bx: &NBox) -> PyResult<Bound<'py, PyList>> {
    let pairs = bx
        .intervals()
        .iter()
        .map(|(lo, hi)| PyTuple::new(py, [to_fraction(py, lo)?, to_fraction(py, hi)?]))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, pairs)
}

fn vertices_to_python<'py>(py: Python<'py>, asg: &VertexAssignment) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for v in VertexPattern::all(asg.dimension()) {
        out.set_item(v.label(), to_fraction(py, asg.value(&v))?)?;
    }
    Ok(out)
}

/// Box, vertex values and feasibility of `asg` against the extremal LP.
fn assignment_report<'py>(
    py: Python<'py>,
    asg: &VertexAssignment,
    sense: Sense,
) -> PyResult<Bound<'py, PyDict>> {
    let (lp, layout) = core::build_extremal_lp(asg.dimension(), sense).map_err(value_error)?;
    let report = core::check_assignment(&lp, &layout, asg).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("box", box_to_python(py, &asg.bx)?)?;
    out.set_item("vertices", vertices_to_python(py, asg)?)?;
    out.set_item("feasible", report.feasible)?;
    out.set_item("objective", to_fraction(py, &report.objective_value)?)?;
    out.set_item("violated_rows", report.violated_rows.len())?;
    Ok(out)
}

/// Function induced by a piecewise-uniform signed mass grid.
#[pyclass(name = "GridQuasiCopula", module = "qcmass", frozen)]
pub struct PyGridQuasiCopula {
    inner: core::GridQuasiCopula,
}

#[pymethods]
impl PyGridQuasiCopula {
    /// Builtin four-dimensional example: "q1" or "q2".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let id: core::BuiltinExample = name.parse().map_err(value_error)?;
        Ok(PyGridQuasiCopula {
            inner: core::builtin_example(id),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let grid = core::MassGrid::from_json(text).map_err(value_error)?;
        let inner = core::make_grid_qc(grid).map_err(value_error)?;
        Ok(PyGridQuasiCopula { inner })
    }

    fn to_json(&self) -> String {
        self.inner.grid().to_json()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn total_mass<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_fraction(py, &self.inner.total_mass())
    }

    /// `(cell, mass)` pairs for every nonzero cell.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items = self
            .inner
            .grid()
            .cells()
            .map(|(cell, mass)| {
                PyTuple::new(
                    py,
                    [
                        PyTuple::new(py, cell)?.into_any(),
                        to_fraction(py, mass)?,
                    ],
                )
            })
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }

    fn evaluate<'py>(&self, py: Python<'py>, point: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let point = point
            .try_iter()?
            .map(|x| from_python(&x?))
            .collect::<PyResult<Vec<_>>>()?;
        let value = self.inner.evaluate(&point).map_err(value_error)?;
        to_fraction(py, &value)
    }

    fn box_volume<'py>(&self, py: Python<'py>, bx: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let bx = parse_box(bx)?;
        let value = self.inner.box_volume(&bx).map_err(value_error)?;
        to_fraction(py, &value)
    }

    /// Axiom, envelope and total-mass checks.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = self.inner.verify_axioms();
        let envelope = self.inner.frechet_envelope_check();
        let total_ok = self.inner.total_mass() == Rational::one();
        let out = PyDict::new(py);
        out.set_item("grounded", report.grounded_ok)?;
        out.set_item("uniform_margins", report.uniform_margins_ok)?;
        out.set_item("monotone", report.monotone_ok)?;
        out.set_item("lipschitz", report.lipschitz_ok)?;
        out.set_item("frechet_envelope", envelope.is_empty())?;
        out.set_item("total_mass", total_ok)?;
        out.set_item("passed", report.passed() && envelope.is_empty() && total_ok)?;
        let violations: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{} {} lhs {} rhs {}", v.kind, v.location, v.lhs, v.rhs))
            .collect();
        out.set_item("violations", violations)?;
        Ok(out)
    }

    /// Margin after integrating out `axis` (counted from 0).
    fn marginalize(&self, axis: usize) -> PyResult<Self> {
        let inner = self.inner.marginalize(axis).map_err(value_error)?;
        Ok(PyGridQuasiCopula { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "GridQuasiCopula(dimension={}, cells={})",
            self.inner.dimension(),
            self.inner.grid().cells().count()
        )
    }
}

/// Solves and certifies the extremal LP for dimension `n`.
#[pyfunction]
#[pyo3(signature = (n, direction = "min", rule = "bland"))]
fn extremize<'py>(
    py: Python<'py>,
    n: usize,
    direction: &str,
    rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let sense = parse_sense(direction)?;
    let rule = match rule {
        "bland" => core::PivotRule::Bland,
        "dantzig" => core::PivotRule::Dantzig,
        other => {
            return Err(PyValueError::new_err(format!(
                "rule must be 'bland' or 'dantzig', got {other:?}"
            )))
        }
    };
    let (lp, layout) = core::build_extremal_lp(n, sense).map_err(value_error)?;
    let sol = py
        .detach(|| core::solve_with(&lp, &core::SolverOptions { rule }))
        .map_err(value_error)?;
    let optimum = sol
        .objective
        .clone()
        .ok_or_else(|| PyValueError::new_err(format!("LP status {}", sol.status)))?;
    let verdict = core::certify(&lp, &sol).map_err(value_error)?;
    let asg = core::solution_to_assignment(&layout, &sol).map_err(value_error)?;

    let out = PyDict::new(py);
    out.set_item("optimum", to_fraction(py, &optimum)?)?;
    out.set_item("box", box_to_python(py, &asg.bx)?)?;
    out.set_item("vertices", vertices_to_python(py, &asg)?)?;
    out.set_item("pivots", sol.pivots())?;
    out.set_item("peak_bits", sol.peak_bits)?;
    out.set_item("certificate", verdict.to_string())?;
    Ok(out)
}

/// Reported four-dimensional extremal assignment, checked against the LP.
#[pyfunction]
#[pyo3(signature = (direction = "min"))]
fn reported_witness<'py>(py: Python<'py>, direction: &str) -> PyResult<Bound<'py, PyDict>> {
    let sense = parse_sense(direction)?;
    let asg = core::reported_witness(4, sense).map_err(value_error)?;
    assignment_report(py, &asg, sense)
}

/// Conjectured minimizer for dimension `n`, checked against the LP.
#[pyfunction]
fn candidate_pattern<'py>(py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyDict>> {
    let asg = core::candidate_pattern(n).map_err(value_error)?;
    assignment_report(py, &asg, Sense::Minimize)
}

#[pyfunction]
fn conjectured_minimum<'py>(py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
    if n < 2 {
        return Err(PyValueError::new_err("n must be at least 2"));
    }
    to_fraction(py, &core::conjectured_minimum(n))
}

/// Text form of the extremal LP.
#[pyfunction]
#[pyo3(signature = (n, direction = "min"))]
fn export_lp(n: usize, direction: &str) -> PyResult<String> {
    let (lp, _) = core::build_extremal_lp(n, parse_sense(direction)?).map_err(value_error)?;
    Ok(core::export_lp(&lp))
}

/// Exact quasi-copula mass grids and extremal box-volume LPs.
#[pymodule]
mod qcmass {
    #[pymodule_export]
    use super::{
        candidate_pattern, conjectured_minimum, export_lp, extremize, reported_witness,
        PyGridQuasiCopula,
    };
}
