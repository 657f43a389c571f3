//! Python module `qloop`: operators, reference solvers, the adjudicator and
//! the statistics of the core crate.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qloop_core::adjudicator::{classify as classify_run, verify, Taxonomy};
use qloop_core::episode::{Campaign, CampaignConfig, Repository};
use qloop_core::operator::{self, LanczosOptions};
use qloop_core::registry::{self, Tolerance};
use qloop_core::sandbox::{self, ExecutionResult, ExitStatus, ParseFailure};
use qloop_core::solvers::{self, HubbardSector, InitialState, Observable, SchwingerParams, WeightedGraph};
use qloop_core::stats;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Weighted sum of Pauli strings. Character `k` of a label acts on qubit `k`.
#[pyclass(name = "PauliSum", module = "qloop", frozen)]
struct PyPauliSum {
    inner: operator::PauliSum,
}

#[pymethods]
impl PyPauliSum {
    /// `PauliSum([(1.0, "ZZ"), (0.5, "XI")])`
    #[new]
    fn new(terms: Vec<(Complex64, String)>) -> PyResult<Self> {
        if terms.is_empty() {
            return Err(PyValueError::new_err("at least one term is required"));
        }
        let inner = operator::PauliSum::from_labels(terms.iter().map(|(c, s)| (*c, s.as_str()))).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn __len__(&self) -> usize {
        self.inner.n_terms()
    }

    fn terms(&self) -> Vec<(Complex64, String)> {
        self.inner.terms().iter().map(|(c, s)| (*c, s.to_string())).collect()
    }

    #[pyo3(signature = (tol=1e-12))]
    fn is_hermitian(&self, tol: f64) -> bool {
        self.inner.is_hermitian(tol)
    }

    /// Lowest eigenvalue by Lanczos.
    #[pyo3(signature = (seed=0x5eed))]
    fn ground_energy(&self, py: Python<'_>, seed: u64) -> PyResult<f64> {
        let h = &self.inner;
        py.detach(|| operator::ground_state(h, &LanczosOptions { seed, ..Default::default() }))
            .map(|(e, _, _)| e)
            .map_err(value_err)
    }

    /// Lowest eigenvalue by dense diagonalization.
    fn ground_energy_dense(&self, py: Python<'_>) -> PyResult<f64> {
        let h = &self.inner;
        py.detach(|| operator::ground_state_dense(h, operator::DENSE_QUBIT_CAP)).map(|(e, _)| e).map_err(value_err)
    }

    /// Dense matrix as nested lists of complex numbers.
    fn to_dense(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let m = operator::to_dense(&self.inner).map_err(value_err)?;
        Ok((0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect())
    }

    /// `<psi|H|psi>` for a state given as a list of amplitudes.
    fn expectation(&self, amplitudes: Vec<Complex64>) -> PyResult<f64> {
        let psi = operator::StateVector::new(self.inner.n_qubits(), amplitudes).map_err(value_err)?;
        psi.expectation(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("PauliSum({})", self.inner)
    }
}

/// Jordan-Wigner image of `coefficient * a_{i1}^(†) a_{i2}^(†) ...`, with
/// `ladder` a list of `(mode, dagger)` pairs.
#[pyfunction]
fn jordan_wigner(coefficient: Complex64, ladder: Vec<(usize, bool)>, n_modes: usize) -> PyResult<PyPauliSum> {
    let term = operator::FermionTerm::new(
        coefficient,
        ladder.into_iter().map(|(mode, dagger)| operator::Ladder { mode, dagger }).collect(),
    );
    Ok(PyPauliSum { inner: operator::jordan_wigner(&term, n_modes).map_err(value_err)? })
}

#[pyfunction]
fn tfim_hamiltonian(l: usize, j: f64, h: f64) -> PyResult<PyPauliSum> {
    Ok(PyPauliSum { inner: solvers::tfim_hamiltonian(l, j, h).map_err(value_err)? })
}

#[pyfunction]
fn hubbard_hamiltonian(l: usize, t: f64, u: f64) -> PyResult<PyPauliSum> {
    Ok(PyPauliSum { inner: solvers::hubbard_hamiltonian(l, t, u).map_err(value_err)? })
}

/// Half-filling ground energy of the open Hubbard chain.
#[pyfunction]
fn hubbard_ground_energy(py: Python<'_>, l: usize, t: f64, u: f64) -> PyResult<f64> {
    py.detach(|| solvers::hubbard_ground_state(l, t, u, HubbardSector::half_filling(l), &LanczosOptions::default()))
        .map(|g| g.energy)
        .map_err(value_err)
}

/// Maximum cut of a weighted graph: `(value, partition)`.
#[pyfunction]
fn maxcut(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<(f64, Vec<bool>)> {
    let g = WeightedGraph::new(n_vertices, edges).map_err(value_err)?;
    let cut = solvers::maxcut_bruteforce(&g).map_err(value_err)?;
    Ok((cut.value, cut.partition))
}

/// Particle density after evolving the staggered vacuum for `time`.
#[pyfunction]
fn schwinger_density(l: usize, hopping: f64, g: f64, m: f64, time: f64) -> PyResult<f64> {
    let p = SchwingerParams { l, hopping, g, m };
    solvers::schwinger_evolve(&p, &InitialState::StaggeredVacuum, time, &Observable::ParticleDensity)
        .map(|r| r.value)
        .map_err(value_err)
}

/// FCI ground energy from an FCIDUMP file, or the bundled H2 integrals at
/// bond length `bond_length`.
#[pyfunction]
#[pyo3(signature = (path=None, bond_length=None))]
fn fci_energy(path: Option<PathBuf>, bond_length: Option<f64>) -> PyResult<f64> {
    let ints = match (path, bond_length) {
        (Some(p), None) => solvers::load_integrals(&p),
        (None, Some(bl)) => solvers::bundled_h2_integrals(bl),
        _ => return Err(PyValueError::new_err("pass exactly one of path and bond_length")),
    }
    .map_err(value_err)?;
    solvers::fci_ground_state(&ints).map(|r| r.energy).map_err(value_err)
}

/// Problem instances as dictionaries: the bundled set, or those of `path`.
#[pyfunction]
#[pyo3(signature = (path=None))]
fn instances<'py>(py: Python<'py>, path: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let all = match path {
        Some(p) => registry::load_instances(&p).map_err(value_err)?,
        None => registry::bundled_instances(),
    };
    json_to_py(py, &all)
}

/// Reference value of an instance: `(value, metadata)`.
#[pyfunction]
#[pyo3(signature = (instance_id, path=None))]
fn solve_reference<'py>(
    py: Python<'py>,
    instance_id: &str,
    path: Option<PathBuf>,
) -> PyResult<(f64, Bound<'py, PyAny>)> {
    let all = match path {
        Some(p) => registry::load_instances(&p).map_err(value_err)?,
        None => registry::bundled_instances(),
    };
    let inst = registry::find(&all, instance_id).map_err(value_err)?;
    let r = py.detach(|| solvers::solve_reference(inst)).map_err(value_err)?;
    Ok((r.value, json_to_py(py, &r.meta)?))
}

/// Script extracted from a model reply, or `None`.
#[pyfunction]
fn extract_code(reply: &str) -> Option<String> {
    qloop_core::gateway::extract_code(reply)
}

/// Value of the last `RESULT:` line of `stdout`.
#[pyfunction]
#[pyo3(signature = (stdout, lenient=false))]
fn parse_result(stdout: &str, lenient: bool) -> PyResult<f64> {
    sandbox::parse_result(stdout, lenient).map_err(value_err)
}

/// Failure cause of a failed run: `(category, matched_keyword)`.
#[pyfunction]
#[pyo3(signature = (stderr, stdout="", exit_code=1, timed_out=false))]
fn classify(stderr: &str, stdout: &str, exit_code: i32, timed_out: bool) -> PyResult<(String, Option<String>)> {
    let exec = ExecutionResult {
        exit_status: if timed_out { ExitStatus::Killed(9) } else { ExitStatus::Code(exit_code) },
        stdout: stdout.into(),
        stderr: stderr.into(),
        duration_s: 0.0,
        timed_out,
    };
    let verdict = verify(Err(&ParseFailure::NoResultLine), 0.0, &Tolerance::default()).map_err(value_err)?;
    let cause = classify_run(&Taxonomy::bundled(), Some(&exec), &verdict).map_err(value_err)?;
    Ok((cause.category.to_string(), cause.matched_keyword))
}

/// Two-sided Mann-Whitney U test: dict with `u`, `p_value`, `method`.
#[pyfunction]
fn mann_whitney_u<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::mann_whitney_u(&a, &b).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("u", r.u)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("method", format!("{:?}", r.method).to_lowercase())?;
    d.set_item("degenerate", r.degenerate)?;
    Ok(d)
}

/// Vargha-Delaney A12 of `a` over `b` and its magnitude letter.
#[pyfunction]
fn vargha_delaney(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, char)> {
    let e = stats::vargha_delaney(&a, &b).map_err(value_err)?;
    Ok((e.a12, e.category.letter()))
}

/// Runs a campaign config file and returns the summary as a dict.
#[pyfunction]
fn run_campaign<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let summary = py
        .detach(|| {
            let c = Campaign::prepare(CampaignConfig::load(&config)?)?;
            c.run(&|_| {})
        })
        .map_err(|e: qloop_core::episode::EpisodeError| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &summary)
}

/// Every episode record below `root`, as dicts.
#[pyfunction]
fn load_records<'py>(py: Python<'py>, root: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<_> =
        Repository::load_all(&root).map_err(value_err)?.into_iter().map(|(_, r)| r).collect();
    json_to_py(py, &records)
}

#[pymodule]
fn qloop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPauliSum>()?;
    for f in [
        wrap_pyfunction!(jordan_wigner, m)?,
        wrap_pyfunction!(tfim_hamiltonian, m)?,
        wrap_pyfunction!(hubbard_hamiltonian, m)?,
        wrap_pyfunction!(hubbard_ground_energy, m)?,
        wrap_pyfunction!(maxcut, m)?,
        wrap_pyfunction!(schwinger_density, m)?,
        wrap_pyfunction!(fci_energy, m)?,
        wrap_pyfunction!(instances, m)?,
        wrap_pyfunction!(solve_reference, m)?,
        wrap_pyfunction!(extract_code, m)?,
        wrap_pyfunction!(parse_result, m)?,
        wrap_pyfunction!(classify, m)?,
        wrap_pyfunction!(mann_whitney_u, m)?,
        wrap_pyfunction!(vargha_delaney, m)?,
        wrap_pyfunction!(run_campaign, m)?,
        wrap_pyfunction!(load_records, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
