//! Python bindings: density operators, channels, state families, the
//! deficiency SDP, divergences, and the scenario runner behind `qdef`.
//!
//! Matrices cross the boundary as pairs of row-major nested lists
//! `(re, im)`; no numpy dependency is needed.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qdeficiency_core::channels::Channel;
use qdeficiency_core::classical::{lp_deficiency, ClassicalFamily};
use qdeficiency_core::cli::{deficiency_report, scenario_report, ReportKind, ScenarioConfig};
use qdeficiency_core::conic::SolveOptions;
use qdeficiency_core::deficiency::{
    chebyshev_radius, deficiency_Delta, deficiency_delta, StateFamily,
};
use qdeficiency_core::divergences;
use qdeficiency_core::markov::contraction_sup;
use qdeficiency_core::operators::{CMatrix, DensityOperator, HermitianOperator, C64};
use qdeficiency_core::selftest::run_suites;
use qdeficiency_core::Error;

type Lists = Vec<Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    if e.is_solver_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn opts(tol: Option<f64>) -> SolveOptions {
    tol.map(SolveOptions::with_tolerance).unwrap_or_default()
}

fn to_cmatrix(re: &Lists, im: Option<&Lists>) -> PyResult<CMatrix> {
    let rows = re.len();
    let cols = re.first().map_or(0, Vec::len);
    let ok = |m: &Lists| m.len() == rows && m.iter().all(|r| r.len() == cols);
    if rows == 0 || !ok(re) || im.is_some_and(|m| !ok(m)) {
        return Err(PyValueError::new_err(
            "re/im must be nonempty rectangular lists of equal shape",
        ));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

fn split(m: &CMatrix) -> (Lists, Lists) {
    let part = |f: fn(&C64) -> f64| m.row_iter().map(|r| r.iter().map(f).collect()).collect();
    (part(|z| z.re), part(|z| z.im))
}

/// A density matrix: Hermitian, positive semidefinite, unit trace.
#[pyclass(
    name = "DensityOperator",
    module = "qdeficiency",
    frozen,
    from_py_object
)]
#[derive(Clone)]
struct PyDensityOperator {
    inner: DensityOperator,
}

#[pymethods]
impl PyDensityOperator {
    #[new]
    #[pyo3(signature = (re, im=None))]
    fn new(re: Lists, im: Option<Lists>) -> PyResult<Self> {
        let h = HermitianOperator::new(to_cmatrix(&re, im.as_ref())?).map_err(py_err)?;
        Ok(Self {
            inner: DensityOperator::new(h).map_err(py_err)?,
        })
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    #[staticmethod]
    #[pyo3(signature = (re, im=None))]
    fn pure(re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<Self> {
        let col: Lists = re.iter().map(|x| vec![*x]).collect();
        let im_col: Option<Lists> = im.map(|v| v.iter().map(|x| vec![*x]).collect());
        let psi = to_cmatrix(&col, im_col.as_ref())?.column(0).into_owned();
        Ok(Self {
            inner: DensityOperator::pure(&psi).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn basis_state(d: usize, i: usize) -> PyResult<Self> {
        if i >= d {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(Self {
            inner: DensityOperator::basis_state(d, i),
        })
    }

    #[staticmethod]
    fn maximally_mixed(d: usize) -> Self {
        Self {
            inner: DensityOperator::maximally_mixed(d),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(re, im)` nested lists.
    fn to_lists(&self) -> (Lists, Lists) {
        split(self.inner.matrix())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.as_hermitian().eigenvalues()
    }

    fn __repr__(&self) -> String {
        format!("DensityOperator(dim={})", self.inner.dim())
    }
}

/// A CPTP map stored by its Choi matrix (input factor first).
#[pyclass(name = "Channel", module = "qdeficiency", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: Channel,
}

#[pymethods]
impl PyChannel {
    #[staticmethod]
    fn identity(d: usize) -> Self {
        Self {
            inner: Channel::identity(d),
        }
    }

    #[staticmethod]
    fn depolarizing(p: f64, d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Channel::depolarizing(p, d).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn dephasing(lam: f64, d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Channel::dephasing(lam, d).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn amplitude_damping(gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Channel::amplitude_damping(gamma).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (re, im=None))]
    fn unitary(re: Lists, im: Option<Lists>) -> PyResult<Self> {
        Ok(Self {
            inner: Channel::unitary(&to_cmatrix(&re, im.as_ref())?).map_err(py_err)?,
        })
    }

    /// Kraus operators as a list of `(re, im)` pairs.
    #[staticmethod]
    fn from_kraus(ops: Vec<(Lists, Lists)>) -> PyResult<Self> {
        let ops = ops
            .iter()
            .map(|(re, im)| to_cmatrix(re, Some(im)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: Channel::from_kraus(&ops).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (dim_in, dim_out, re, im=None))]
    fn from_choi(dim_in: usize, dim_out: usize, re: Lists, im: Option<Lists>) -> PyResult<Self> {
        Ok(Self {
            inner: Channel::from_choi(to_cmatrix(&re, im.as_ref())?, dim_in, dim_out)
                .map_err(py_err)?,
        })
    }

    /// Haar-random channel, reproducible from `seed`.
    #[staticmethod]
    fn random(d: usize, seed: u64) -> Self {
        Self {
            inner: Channel::random(d, seed),
        }
    }

    #[getter]
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }

    #[getter]
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }

    fn choi(&self) -> (Lists, Lists) {
        split(self.inner.choi())
    }

    fn apply(&self, rho: &PyDensityOperator) -> PyResult<PyDensityOperator> {
        Ok(PyDensityOperator {
            inner: self.inner.apply(&rho.inner).map_err(py_err)?,
        })
    }

    /// `sup_{ρ,σ} ‖Γ(ρ) − Γ(σ)‖₁` over pure inputs.
    fn contraction(&self) -> PyResult<f64> {
        Ok(contraction_sup(&self.inner).map_err(py_err)?.value)
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(dim_in={}, dim_out={})",
            self.inner.dim_in(),
            self.inner.dim_out()
        )
    }
}

/// Labelled density operators sharing one dimension.
#[pyclass(
    name = "StateFamily",
    module = "qdeficiency",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyStateFamily {
    inner: StateFamily,
}

#[pymethods]
impl PyStateFamily {
    #[new]
    fn new(entries: Vec<(String, PyDensityOperator)>) -> PyResult<Self> {
        let entries = entries.into_iter().map(|(l, s)| (l, s.inner)).collect();
        Ok(Self {
            inner: StateFamily::new(entries).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels().map(str::to_string).collect()
    }

    fn get(&self, label: &str) -> PyResult<PyDensityOperator> {
        Ok(PyDensityOperator {
            inner: self.inner.get(label).map_err(py_err)?.clone(),
        })
    }

    fn map_channel(&self, channel: &PyChannel) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.map_channel(&channel.inner).map_err(py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "StateFamily(dim={}, labels={:?})",
            self.inner.dim(),
            self.labels()
        )
    }
}

/// `δ(E, F)` with solver diagnostics and the optimal channel.
#[pyfunction]
#[pyo3(signature = (e, f, tol=None))]
fn deficiency<'py>(
    py: Python<'py>,
    e: &PyStateFamily,
    f: &PyStateFamily,
    tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| deficiency_delta(&e.inner, &f.inner, &opts(tol)))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("status", format!("{:?}", r.solver_report.status))?;
    d.set_item("primal_value", r.solver_report.primal_value)?;
    d.set_item("dual_value", r.solver_report.dual_value)?;
    d.set_item("iterations", r.solver_report.iterations)?;
    d.set_item("warning", r.warning)?;
    d.set_item(
        "channel",
        r.optimal_channel.map(|ch| PyChannel { inner: ch }),
    )?;
    Ok(d)
}

/// `Δ(E, F) = max(δ(E, F), δ(F, E))`.
#[pyfunction]
#[pyo3(name = "deficiency_distance", signature = (e, f, tol=None))]
fn deficiency_distance(
    py: Python<'_>,
    e: &PyStateFamily,
    f: &PyStateFamily,
    tol: Option<f64>,
) -> PyResult<f64> {
    py.detach(|| deficiency_Delta(&e.inner, &f.inner, &opts(tol)))
        .map_err(py_err)
}

/// Trace-norm radius of the smallest ball containing the family.
#[pyfunction]
fn chebyshev(py: Python<'_>, e: &PyStateFamily) -> PyResult<f64> {
    py.detach(|| chebyshev_radius(&e.inner, &SolveOptions::default()))
        .map_err(py_err)
}

/// Classical `δ` between families of probability vectors (same labels,
/// given as lists in the same order).
#[pyfunction]
fn classical_deficiency(e: Lists, f: Lists) -> PyResult<f64> {
    let e = ClassicalFamily::from_rows(&e).map_err(py_err)?;
    let f = ClassicalFamily::from_rows(&f).map_err(py_err)?;
    Ok(lp_deficiency(&e, &f, &SolveOptions::default())
        .map_err(py_err)?
        .value)
}

/// `‖ρ − σ‖₁`.
#[pyfunction]
fn trace_distance(a: &PyDensityOperator, b: &PyDensityOperator) -> PyResult<f64> {
    divergences::trace_distance(&a.inner, &b.inner).map_err(py_err)
}

/// Root fidelity `tr √(√ρ σ √ρ)`.
#[pyfunction]
fn fidelity(a: &PyDensityOperator, b: &PyDensityOperator) -> PyResult<f64> {
    divergences::fidelity(&a.inner, &b.inner).map_err(py_err)
}

#[pyfunction]
fn alpha_divergence(alpha: f64, a: &PyDensityOperator, b: &PyDensityOperator) -> PyResult<f64> {
    divergences::alpha_divergence(alpha, &a.inner, &b.inner).map_err(py_err)
}

/// Runs a `qdef` scenario command on a JSON config string and returns
/// `(trace_csv, summary_json)`, the same bytes the CLI writes.
#[pyfunction]
#[pyo3(signature = (config_json, command="simulate", tol=None))]
fn run_scenario(
    py: Python<'_>,
    config_json: &str,
    command: &str,
    tol: Option<f64>,
) -> PyResult<(String, String)> {
    let kind = match command {
        "simulate" => ReportKind::Simulate,
        "ergodicity" => ReportKind::Ergodicity,
        "limit" => ReportKind::Limit,
        "divergences" => ReportKind::Divergences,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let cfg = ScenarioConfig::from_json(config_json).map_err(py_err)?;
    let out = py
        .detach(|| scenario_report(&cfg, kind, tol, &SolveOptions::default()))
        .map_err(py_err)?;
    Ok((out.trace_csv, out.summary))
}

/// `qdef deficiency` on a JSON config string: `(short_json, summary_json)`.
#[pyfunction]
fn run_deficiency(py: Python<'_>, config_json: &str) -> PyResult<(String, String)> {
    let cfg = ScenarioConfig::from_json(config_json).map_err(py_err)?;
    py.detach(|| deficiency_report(&cfg, &SolveOptions::default()))
        .map_err(py_err)
}

/// Runs verification suites; returns `(name, criterion, passed, checks, failures)` rows.
#[pyfunction]
#[pyo3(signature = (suite=None, tol=None))]
fn selftest(
    py: Python<'_>,
    suite: Option<String>,
    tol: Option<f64>,
) -> Vec<(String, u8, bool, usize, usize)> {
    let reports = py.detach(|| run_suites(suite.as_deref(), &opts(tol)));
    reports
        .iter()
        .map(|r| {
            (
                r.name.to_string(),
                r.criterion,
                r.passed(),
                r.checks,
                r.failures,
            )
        })
        .collect()
}

#[pymodule(name = "qdeficiency")]
fn qdeficiency_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityOperator>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyStateFamily>()?;
    m.add_function(wrap_pyfunction!(deficiency, m)?)?;
    m.add_function(wrap_pyfunction!(deficiency_distance, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev, m)?)?;
    m.add_function(wrap_pyfunction!(classical_deficiency, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_deficiency, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
