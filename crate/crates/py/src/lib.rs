//! Python bindings: parameters, the classical map, Fock-space building
//! blocks, the Lindblad engine and the observables.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use kfx_core::classical::{self, DimensionEstimate, PhasePoint};
use kfx_core::lindblad::{self, EvolveOptions, KickDiagnostics};
use kfx_core::{fock, observables, oracle, snapshot, Error, GridSpec, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    kfx,
    NumericalError,
    PyRuntimeError,
    "A numerical safeguard aborted the computation."
);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidParams(_) | Error::Config { .. } | Error::ConfigMissing(_) | Error::Grid(_) => {
            PyValueError::new_err(err.to_string())
        }
        Error::Io(_) | Error::Snapshot(_) => PyIOError::new_err(err.to_string()),
        _ => NumericalError::new_err(err.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for kfx_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Dimensionless system parameters `(hbar, q, K, gamma, N)` with period `T`.
#[pyclass(module = "kfx", name = "SystemParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PySystemParams {
    inner: kfx_core::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (hbar, q, K, gamma, N, T=None))]
    #[allow(non_snake_case)]
    fn new(hbar: f64, q: f64, K: f64, gamma: f64, N: usize, T: Option<f64>) -> PyResult<Self> {
        let mut inner = kfx_core::SystemParams::new(hbar, q, K, gamma, N).py()?;
        if let Some(t) = T {
            inner = inner.with_period(t).py()?;
        }
        Ok(Self { inner })
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.inner.hbar()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter(K)]
    fn kick_k(&self) -> f64 {
        self.inner.kick_k()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter(T)]
    fn period_t(&self) -> f64 {
        self.inner.period_t()
    }

    #[getter(N)]
    fn basis_n(&self) -> usize {
        self.inner.basis_n()
    }

    #[getter]
    fn k_classical(&self) -> f64 {
        self.inner.k_classical()
    }

    /// Predicted steady-state momentum width `qK/sqrt(2 gamma)`.
    fn predicted_width(&self) -> f64 {
        self.inner.predicted_width()
    }

    fn basis_sufficient(&self) -> bool {
        self.inner.basis_sufficient()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(hbar={}, q={}, K={}, gamma={}, N={}, T={})",
            p.hbar(),
            p.q(),
            p.kick_k(),
            p.gamma(),
            p.basis_n(),
            p.period_t()
        )
    }
}

/// One period of the classical map.
#[pyfunction]
fn classical_step(x: f64, p: f64, params: &PySystemParams) -> (f64, f64) {
    let pt = classical::period_map(PhasePoint::new(x, p), &params.inner);
    (pt.x, pt.p)
}

/// `n` periods of the classical map, including the starting point.
#[pyfunction]
fn classical_trajectory(x: f64, p: f64, params: &PySystemParams, n: usize) -> Vec<(f64, f64)> {
    let map = classical::PeriodMap::new(&params.inner);
    let mut pt = PhasePoint::new(x, p);
    let mut out = Vec::with_capacity(n + 1);
    out.push((pt.x, pt.p));
    for _ in 0..n {
        pt = map.step(pt);
        out.push((pt.x, pt.p));
    }
    out
}

/// Jacobian of one period at `(x, p)` as a nested list.
#[pyfunction]
fn classical_jacobian(x: f64, p: f64, params: &PySystemParams) -> [[f64; 2]; 2] {
    classical::jacobian(PhasePoint::new(x, p), &params.inner)
}

/// Lyapunov exponents and dimension estimates along one orbit.
#[pyfunction]
#[pyo3(signature = (params, x, p, n_steps=20000, transient=1000))]
fn lyapunov<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    x: f64,
    p: f64,
    n_steps: usize,
    transient: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let inner = params.inner;
    let lr = py
        .detach(|| classical::lyapunov_spectrum(&inner, PhasePoint::new(x, p), n_steps, transient))
        .py()?;
    let d = PyDict::new(py);
    d.set_item("lambda1", lr.lambda1)?;
    d.set_item("lambda2", lr.lambda2)?;
    d.set_item("lambda1_per_kick", lr.lambda1_per_kick())?;
    d.set_item("lambda2_per_kick", lr.lambda2_per_kick())?;
    match classical::information_dimension(&lr, inner.gamma()) {
        DimensionEstimate::Fractal {
            d_info,
            d_info_rate,
            d_kaplan_yorke,
        } => {
            d.set_item("dimension", d_info)?;
            d.set_item("dimension_rate", d_info_rate)?;
            d.set_item("dimension_kaplan_yorke", d_kaplan_yorke)?;
        }
        DimensionEstimate::NoStrangeAttractor => d.set_item("dimension", py.None())?,
    }
    Ok(d)
}

/// `⟨n|cos(q x)|m⟩` for `n, m < N` as a nested list.
#[pyfunction]
fn cos_matrix(n: usize, q: f64, hbar: f64) -> PyResult<Vec<Vec<f64>>> {
    let c = fock::cos_matrix(n, q, hbar).py()?;
    Ok((0..n).map(|i| (0..n).map(|j| c.get(i, j)).collect()).collect())
}

/// Quadrature value of a single cos matrix element.
#[pyfunction]
fn cos_element_quadrature(n: usize, m: usize, q: f64, hbar: f64) -> PyResult<f64> {
    fock::cos_element_quadrature(n, m, q, hbar).py()
}

/// Truncated Fock amplitudes of the coherent state centred at `(x, p)`.
#[pyfunction]
fn coherent_state(x: f64, p: f64, params: &PySystemParams) -> Vec<C64> {
    fock::coherent_state(x, p, &params.inner).amps
}

/// Hermitian, unit-trace density matrix with its parameters and kick count.
#[pyclass(module = "kfx", name = "DensityMatrix", frozen)]
pub struct PyDensityMatrix {
    inner: kfx_core::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// `|psi⟩⟨psi|` for a list of complex amplitudes.
    #[staticmethod]
    fn pure(psi: Vec<C64>, params: &PySystemParams) -> PyResult<Self> {
        Ok(Self {
            inner: kfx_core::DensityMatrix::pure(&psi, params.inner).py()?,
        })
    }

    #[staticmethod]
    fn coherent(x: f64, p: f64, params: &PySystemParams) -> PyResult<Self> {
        let psi = fock::coherent_state(x, p, &params.inner);
        Self::pure(psi.amps, params)
    }

    /// Equal-weight mixture of coherent states at the given centres.
    #[staticmethod]
    fn coherent_mixture(centres: Vec<(f64, f64)>, params: &PySystemParams) -> PyResult<Self> {
        let states: Vec<Vec<C64>> = centres
            .iter()
            .map(|&(x, p)| fock::coherent_state(x, p, &params.inner).amps)
            .collect();
        let refs: Vec<&[C64]> = states.iter().map(|s| s.as_slice()).collect();
        Ok(Self {
            inner: kfx_core::DensityMatrix::mixture(&refs, params.inner).py()?,
        })
    }

    /// Reads a binary snapshot.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self {
            inner: snapshot::read_snapshot(&mut BufReader::new(file)).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        snapshot::write_snapshot(&mut BufWriter::new(file), &self.inner).py()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn kick(&self) -> u64 {
        self.inner.kick()
    }

    #[getter]
    fn params(&self) -> PySystemParams {
        PySystemParams {
            inner: *self.inner.params(),
        }
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        lindblad::kick_diagnostics(&self.inner).purity
    }

    fn mean_energy(&self) -> f64 {
        observables::mean_energy(&self.inner)
    }

    fn edge_population(&self) -> f64 {
        lindblad::edge_population(self.inner.op())
    }

    fn hermiticity_defect(&self) -> f64 {
        self.inner.op().hermiticity_defect()
    }

    fn parity_commutator(&self) -> f64 {
        self.inner.op().parity_commutator()
    }

    /// Entries as a nested list of complex numbers.
    fn to_list(&self) -> Vec<Vec<C64>> {
        let op = self.inner.op();
        let n = op.dim();
        (0..n).map(|i| (0..n).map(|j| op.get(i, j)).collect()).collect()
    }

    /// All eigenvalues in descending order.
    fn eigenvalues(&self, py: Python<'_>) -> PyResult<Vec<f64>> {
        Ok(py.detach(|| observables::spectrum(&self.inner, 0)).py()?.eigenvalues)
    }

    /// Descending eigenvalues and the leading `k_top` eigenvectors.
    fn spectrum(&self, py: Python<'_>, k_top: usize) -> PyResult<(Vec<f64>, Vec<Vec<C64>>)> {
        let sr = py.detach(|| observables::spectrum(&self.inner, k_top)).py()?;
        Ok((sr.eigenvalues, sr.eigenvectors.into_iter().map(|v| v.amps).collect()))
    }

    /// `(λ0−λ1, λ2−λ3, λ4−λ5)`.
    fn pair_splittings(&self, py: Python<'_>) -> PyResult<[f64; 3]> {
        let sr = py.detach(|| observables::spectrum(&self.inner, 0)).py()?;
        observables::pair_splittings(&sr).py()
    }

    /// `−Tr ρ ln ρ`.
    fn entropy(&self, py: Python<'_>) -> PyResult<f64> {
        let sr = py.detach(|| observables::spectrum(&self.inner, 0)).py()?;
        Ok(observables::entanglement_entropy(&sr))
    }

    /// Husimi density on the square `[-L, L]²` with `M × M` cells. Returns
    /// the row-major values (rows are momenta) and the most negative raw value.
    #[pyo3(signature = (L, M))]
    #[allow(non_snake_case)]
    fn husimi(&self, py: Python<'_>, L: f64, M: usize) -> PyResult<(Vec<Vec<f64>>, f64)> {
        let spec = GridSpec::square(L, M).py()?;
        let h = py.detach(|| observables::husimi_density(&self.inner, &spec));
        let rows = h.grid.values.chunks(spec.m_x).map(|r| r.to_vec()).collect();
        Ok((rows, h.min_raw))
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(N={}, kick={})", self.inner.dim(), self.inner.kick())
    }
}

fn diagnostics_dict<'py>(py: Python<'py>, d: &KickDiagnostics) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("kick", d.kick)?;
    out.set_item("trace", d.trace)?;
    out.set_item("purity", d.purity)?;
    out.set_item("mean_energy", d.mean_energy)?;
    out.set_item("edge_population", d.edge_population)?;
    Ok(out)
}

/// Stroboscopic Lindblad propagator for one parameter set.
#[pyclass(module = "kfx", name = "LindbladEngine", frozen)]
pub struct PyLindbladEngine {
    inner: lindblad::LindbladEngine,
}

#[pymethods]
impl PyLindbladEngine {
    #[new]
    fn new(params: &PySystemParams) -> PyResult<Self> {
        Ok(Self {
            inner: lindblad::LindbladEngine::new(&params.inner).py()?,
        })
    }

    /// One period: damping, free rotation, kick.
    fn step(&self, py: Python<'_>, rho: &PyDensityMatrix) -> PyResult<PyDensityMatrix> {
        let inner = py.detach(|| self.inner.step_density(&rho.inner)).py()?;
        Ok(PyDensityMatrix { inner })
    }

    /// Evolves `n_kicks` periods. Returns the final state and per-kick
    /// diagnostics dictionaries, starting with the initial state.
    #[pyo3(signature = (rho, n_kicks, force=false))]
    fn evolve<'py>(
        &self,
        py: Python<'py>,
        rho: &PyDensityMatrix,
        n_kicks: u64,
        force: bool,
    ) -> PyResult<(PyDensityMatrix, Vec<Bound<'py, PyDict>>, Vec<String>)> {
        let rec = py
            .detach(|| {
                let mut sink = |_: &kfx_core::DensityMatrix, _: &KickDiagnostics| Ok(());
                lindblad::evolve(
                    &self.inner,
                    &rho.inner,
                    &EvolveOptions { n_kicks, force },
                    |_| false,
                    &mut sink,
                )
            })
            .py()?;
        let history = rec
            .history
            .iter()
            .map(|d| diagnostics_dict(py, d))
            .collect::<PyResult<Vec<_>>>()?;
        Ok((PyDensityMatrix { inner: rec.final_state }, history, rec.warnings))
    }
}

/// `(samples, overlap, warnings)` returned by [`negativity`].
type NegativityOutput = (Vec<(u64, f64)>, f64, Vec<String>);

/// Negativity series of the virtual qubit entangled with coherent states
/// at `alpha` and `beta`. Returns `(samples, overlap, warnings)` with
/// samples as `(kick, G_N)` pairs taken every `every` kicks.
#[pyfunction]
#[pyo3(signature = (alpha, beta, params, n_kicks, every=1, force=false))]
fn negativity(
    py: Python<'_>,
    alpha: (f64, f64),
    beta: (f64, f64),
    params: &PySystemParams,
    n_kicks: u64,
    every: u64,
    force: bool,
) -> PyResult<NegativityOutput> {
    let inner = params.inner;
    let every = every.max(1);
    let series = py
        .detach(|| observables::evolve_negativity(alpha, beta, &inner, n_kicks, |t| t % every == 0, force))
        .py()?;
    let samples = series.samples.iter().map(|s| (s.kick, s.g_n)).collect();
    Ok((samples, series.overlap, series.warnings))
}

/// First index after which consecutive window means agree to `tol`.
#[pyfunction]
#[pyo3(signature = (series, window=20, tol=1e-3))]
fn steady_state_detect(series: Vec<f64>, window: usize, tol: f64) -> Option<usize> {
    lindblad::steady_state_detect(&series, window, tol)
}

/// Largest deviation of the closed-form cos matrix from quadrature.
#[pyfunction]
fn cos_matrix_error(max_index: usize, q: f64, hbar: f64) -> PyResult<f64> {
    oracle::cos_matrix_error(max_index, q, hbar, 0.0).py()
}

/// Largest Frobenius deviation of the exact damping channel from RK4.
#[pyfunction]
#[pyo3(signature = (n, gamma, t, count=4, seed=0))]
fn channel_error(py: Python<'_>, n: usize, gamma: f64, t: f64, count: usize, seed: u64) -> PyResult<f64> {
    py.detach(|| oracle::channel_error(n, gamma, t, count, seed)).py()
}

#[pymodule]
fn kfx(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyLindbladEngine>()?;
    m.add_function(wrap_pyfunction!(classical_step, m)?)?;
    m.add_function(wrap_pyfunction!(classical_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(classical_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(cos_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(cos_element_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(coherent_state, m)?)?;
    m.add_function(wrap_pyfunction!(negativity, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_detect, m)?)?;
    m.add_function(wrap_pyfunction!(cos_matrix_error, m)?)?;
    m.add_function(wrap_pyfunction!(channel_error, m)?)?;
    Ok(())
}
