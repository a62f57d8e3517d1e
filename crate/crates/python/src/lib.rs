//! Python bindings for `broja-pid`.
//!
//! ```python
//! import broja_pid_py as bp
//!
//! p = bp.Distribution.gate("and")
//! r = bp.pid(p)
//! r.si_bits  # 0.311278...
//! ```
//!
//! All values are in nats; `PidResult` also has `*_bits` getters.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use broja_pid::dist::format::{self, InputFormat};
use broja_pid::dist::{gates, Labels};
use broja_pid::pid::{pid_with, support_gradients};
use broja_pid::{
    pushforward, si_club, si_ext, verify_kkt, ExtractOptions, ExtractionResult, JointDistribution,
    PidError, Quantity, SolveOptions, SolveReport, StochasticMatrix, Unit,
};

create_exception!(broja_pid_py, BrojaError, PyValueError);
create_exception!(broja_pid_py, NotCertifiedError, BrojaError);
create_exception!(broja_pid_py, EnumerationTooLargeError, BrojaError);

fn to_py(e: PidError) -> PyErr {
    match e {
        PidError::MaxIterationsExceeded(_) | PidError::UncertifiedSolution => {
            NotCertifiedError::new_err(e.to_string())
        }
        PidError::EnumerationTooLarge { .. } => EnumerationTooLargeError::new_err(e.to_string()),
        _ => BrojaError::new_err(e.to_string()),
    }
}

fn options(tol_kkt: Option<f64>) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(t) = tol_kkt {
        opts.tol_kkt = t;
    }
    opts
}

/// A joint distribution of `(S, Y, Z)`.
#[pyclass(name = "Distribution", frozen, from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: JointDistribution,
}

#[pymethods]
impl PyDistribution {
    /// Dense row-major pmf of shape `(|S|, |Y|, |Z|)`, labelled `0, 1, ...`.
    #[new]
    fn new(shape: [usize; 3], pmf: Vec<f64>) -> PyResult<Self> {
        let inner = JointDistribution::from_dense(shape, pmf).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    /// As the constructor, with explicit labels per axis.
    #[staticmethod]
    fn labelled(s: Vec<String>, y: Vec<String>, z: Vec<String>, pmf: Vec<f64>) -> PyResult<Self> {
        let inner = JointDistribution::with_labels(Labels { s, y, z }, pmf).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    /// `xor`, `and`, `rdn` or `unq`.
    #[staticmethod]
    fn gate(name: &str) -> PyResult<Self> {
        gates::by_name(name)
            .map(|inner| PyDistribution { inner })
            .ok_or_else(|| BrojaError::new_err(format!("unknown gate {name:?}")))
    }

    /// JSON or TSV text; the format is sniffed from the content.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = format::parse(text, InputFormat::detect(None, text)).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BrojaError::new_err(format!("cannot read {path}: {e}")))?;
        let inner = format::parse(&text, InputFormat::detect(Some(path), &text)).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let [a, b, c] = self.inner.shape();
        (a, b, c)
    }

    #[getter]
    fn pmf(&self) -> Vec<f64> {
        self.inner.pmf().to_vec()
    }

    /// `(s, y, z)` label lists.
    #[getter]
    fn labels(&self) -> (Vec<String>, Vec<String>, Vec<String>) {
        let l = self.inner.labels();
        (l.s.clone(), l.y.clone(), l.z.clone())
    }

    fn get(&self, s: usize, y: usize, z: usize) -> PyResult<f64> {
        let [ns, ny, nz] = self.inner.shape();
        if s >= ns || y >= ny || z >= nz {
            return Err(pyo3::exceptions::PyIndexError::new_err("cell out of range"));
        }
        Ok(self.inner.get(s, y, z))
    }

    fn is_full_support(&self) -> bool {
        self.inner.is_full_support()
    }

    fn to_tsv(&self) -> String {
        format::to_tsv(&self.inner)
    }

    fn to_json(&self) -> String {
        format::to_json(&self.inner).to_string()
    }

    fn __repr__(&self) -> String {
        format!("Distribution(shape={:?})", self.inner.shape())
    }
}

#[pyclass(name = "PidResult", frozen, skip_from_py_object)]
struct PyPidResult {
    #[pyo3(get)]
    m: f64,
    #[pyo3(get)]
    ci: f64,
    #[pyo3(get)]
    si: f64,
    #[pyo3(get)]
    ui_y: f64,
    #[pyo3(get)]
    ui_z: f64,
    #[pyo3(get)]
    certified: bool,
}

#[pymethods]
impl PyPidResult {
    #[getter]
    fn ci_bits(&self) -> f64 {
        self.ci * Unit::Bits.per_nat()
    }

    #[getter]
    fn si_bits(&self) -> f64 {
        self.si * Unit::Bits.per_nat()
    }

    #[getter]
    fn ui_y_bits(&self) -> f64 {
        self.ui_y * Unit::Bits.per_nat()
    }

    #[getter]
    fn ui_z_bits(&self) -> f64 {
        self.ui_z * Unit::Bits.per_nat()
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("M", self.m)?;
        d.set_item("CI", self.ci)?;
        d.set_item("SI", self.si)?;
        d.set_item("UIy", self.ui_y)?;
        d.set_item("UIz", self.ui_z)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "PidResult(CI={:.6}, SI={:.6}, UIy={:.6}, UIz={:.6} nats)",
            self.ci, self.si, self.ui_y, self.ui_z
        )
    }
}

/// Optimal coupling and its multipliers.
#[pyclass(name = "Solution", frozen, skip_from_py_object)]
struct PySolution {
    p: JointDistribution,
    report: SolveReport,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn m(&self) -> f64 {
        self.report.m_value
    }

    #[getter]
    fn certified(&self) -> bool {
        self.report.certified
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.report.iterations
    }

    /// Dense row-major coupling.
    #[getter]
    fn coupling(&self) -> Vec<f64> {
        self.report.coupling.q.clone()
    }

    /// `λ[s * |Y| + y]`.
    #[getter]
    fn lambda_(&self) -> Vec<f64> {
        self.report.certificate.lambda.clone()
    }

    /// `μ[s * |Z| + z]`.
    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.report.certificate.mu.clone()
    }

    /// Re-verifies the certificate; returns the residuals and the empty
    /// `(y, z)` fibers with their exponential sums.
    #[pyo3(signature = (tol = 1e-7))]
    fn verify<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = verify_kkt(
            &self.p,
            &self.report.coupling,
            &self.report.certificate,
            tol,
        );
        let d = PyDict::new(py);
        d.set_item("pass", r.pass)?;
        d.set_item("primal", r.residual_primal)?;
        d.set_item("stationarity", r.residual_stationarity)?;
        d.set_item("zero_cells", r.residual_zero_cells)?;
        d.set_item("positive_fibers", r.positive_fibers)?;
        let fibers: Vec<(usize, usize, f64)> = r
            .zero_fibers
            .iter()
            .map(|f| (f.y, f.z, f.exp_sum))
            .collect();
        d.set_item("zero_fibers", fibers)?;
        Ok(d)
    }

    /// Gradients of M, CI, SI, UIy and UIz on the support of p, dense;
    /// off-support entries are zero.
    fn gradients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let g = support_gradients(&self.p, &self.report).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("M", g.grad_m.clone())?;
        for q in [Quantity::CI, Quantity::SI, Quantity::UIY, Quantity::UIZ] {
            d.set_item(q.name(), g.get(q).to_vec())?;
        }
        d.set_item("support", g.support.clone())?;
        d.set_item("smooth", g.smooth)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(M={:.9}, certified={})",
            self.report.m_value, self.report.certified
        )
    }
}

#[pyclass(name = "Extraction", frozen, skip_from_py_object)]
struct PyExtraction {
    inner: ExtractionResult,
}

#[pymethods]
impl PyExtraction {
    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }

    #[getter]
    fn value_bits(&self) -> f64 {
        self.inner.value * Unit::Bits.per_nat()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.certified
    }

    #[getter]
    fn restarts_used(&self) -> usize {
        self.inner.restarts_used
    }

    /// Rows of the maximizing garbling, `argmax[t][s]`.
    #[getter]
    fn argmax(&self) -> Vec<Vec<f64>> {
        let pi = &self.inner.argmax;
        (0..pi.rows())
            .map(|t| (0..pi.columns().len()).map(|s| pi.get(t, s)).collect())
            .collect()
    }

    /// `(restart, iteration, objective)` per accepted step.
    #[getter]
    fn trace(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .trace
            .iter()
            .map(|t| (t.restart, t.iteration, t.objective_nats))
            .collect()
    }

    fn trace_csv(&self) -> String {
        self.inner.trace_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "Extraction(m={}, value={:.9}, certified={})",
            self.inner.m, self.inner.value, self.inner.certified
        )
    }
}

/// The decomposition of `p`. Raises `NotCertifiedError` if the optimum
/// cannot be certified, unless `strict=False`.
#[pyfunction]
#[pyo3(signature = (p, tol_kkt = None, strict = true))]
fn pid(
    py: Python<'_>,
    p: &PyDistribution,
    tol_kkt: Option<f64>,
    strict: bool,
) -> PyResult<PyPidResult> {
    let opts = options(tol_kkt);
    let (r, certified) = match py.detach(|| pid_with(&p.inner, &opts)) {
        Ok((r, rep)) => (r, rep.certified),
        Err(PidError::MaxIterationsExceeded(rep)) if !strict => {
            (broja_pid::PidResult::from_m(&p.inner, rep.m_value), false)
        }
        Err(e) => return Err(to_py(e)),
    };
    Ok(PyPidResult {
        m: r.m,
        ci: r.ci,
        si: r.si,
        ui_y: r.ui_y,
        ui_z: r.ui_z,
        certified,
    })
}

/// Solves the coupling program, returning the best iterate even when it
/// is not certified.
#[pyfunction]
#[pyo3(signature = (p, tol_kkt = None))]
fn solve(py: Python<'_>, p: &PyDistribution, tol_kkt: Option<f64>) -> PyResult<PySolution> {
    let opts = options(tol_kkt);
    let report = match py.detach(|| pid_with(&p.inner, &opts)) {
        Ok((_, rep)) => rep,
        Err(PidError::MaxIterationsExceeded(rep)) => *rep,
        Err(e) => return Err(to_py(e)),
    };
    Ok(PySolution {
        p: p.inner.clone(),
        report,
    })
}

/// Joint of `(T, Y, Z)` for `T` drawn from `garbling[t][s]` given `S = s`.
#[pyfunction]
fn garble(garbling: Vec<Vec<f64>>, p: &PyDistribution) -> PyResult<PyDistribution> {
    let columns = p.inner.labels().s.clone();
    let rows = garbling.len();
    let pi = StochasticMatrix::new(rows, columns, garbling.concat()).map_err(to_py)?;
    let inner = pushforward(&pi, &p.inner).map_err(to_py)?;
    Ok(PyDistribution { inner })
}

/// Best shared information over stochastic garblings of S with `m` outputs.
#[pyfunction]
#[pyo3(signature = (p, m, restarts = 10, seed = 42))]
fn extract_club(
    py: Python<'_>,
    p: &PyDistribution,
    m: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<PyExtraction> {
    let opts = ExtractOptions {
        restarts,
        seed,
        ..Default::default()
    };
    let inner = py.detach(|| si_club(&p.inner, m, &opts)).map_err(to_py)?;
    Ok(PyExtraction { inner })
}

/// Exact maximum over deterministic maps `S -> [m]`.
#[pyfunction]
fn extract_exact(py: Python<'_>, p: &PyDistribution, m: usize) -> PyResult<PyExtraction> {
    let inner = py.detach(|| si_ext(&p.inner, m)).map_err(to_py)?;
    Ok(PyExtraction { inner })
}

#[pymodule]
fn broja_pid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyPidResult>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyExtraction>()?;
    m.add_function(wrap_pyfunction!(pid, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(garble, m)?)?;
    m.add_function(wrap_pyfunction!(extract_club, m)?)?;
    m.add_function(wrap_pyfunction!(extract_exact, m)?)?;
    let py = m.py();
    m.add("BrojaError", py.get_type::<BrojaError>())?;
    m.add("NotCertifiedError", py.get_type::<NotCertifiedError>())?;
    m.add(
        "EnumerationTooLargeError",
        py.get_type::<EnumerationTooLargeError>(),
    )?;
    Ok(())
}
