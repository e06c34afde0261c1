//! Python bindings for `bfsplit_core`.
//!
//! Matrices cross the boundary as lists of rows; every error surfaces as
//! `ValueError` (or `OSError` for experiment output failures).

use bfsplit_core::experiments::{self, Experiment, ExperimentConfig};
use bfsplit_core::linalg;
use bfsplit_core::precision::{bf16_to_f32, fp16_to_f32, round_f32_to_bf16, round_f32_to_fp16};
use bfsplit_core::{
    Bf16, BoundKind, Fp16, GenKind, GenSpec, Matrix, ProductScheme, RoundingConfig, SolveOptions,
    SolvePrecision, SplitCount, SplitVector, WorkingPrecision,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use std::fmt::Display;

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rounding(flush_subnormals: bool) -> RoundingConfig {
    if flush_subnormals {
        RoundingConfig::FTZ
    } else {
        RoundingConfig::IEEE
    }
}

fn to_matrix<T: Copy + Default>(rows: Vec<Vec<T>>) -> PyResult<Matrix<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(value_err("matrix rows must all have the same length"));
    }
    let r = rows.len();
    Ok(Matrix::from_vec(r, cols, rows.into_iter().flatten().collect()))
}

fn from_matrix<T: Copy + Default>(m: &Matrix<T>) -> Vec<Vec<T>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn scheme(name: &str) -> PyResult<ProductScheme> {
    name.parse().map_err(value_err)
}

/// Rounds an FP32 value to bfloat16 and returns the bit pattern.
#[pyfunction]
#[pyo3(signature = (x, flush_subnormals = false))]
fn bf16_bits(x: f32, flush_subnormals: bool) -> u16 {
    round_f32_to_bf16(x, rounding(flush_subnormals)).to_bits()
}

/// Widens a bfloat16 bit pattern to a float.
#[pyfunction]
fn bf16_value(bits: u16) -> f32 {
    bf16_to_f32(Bf16::from_bits(bits))
}

/// Rounds an FP32 value to IEEE binary16 and returns the bit pattern.
#[pyfunction]
#[pyo3(signature = (x, flush_subnormals = false))]
fn fp16_bits(x: f32, flush_subnormals: bool) -> u16 {
    round_f32_to_fp16(x, rounding(flush_subnormals)).to_bits()
}

/// Widens a binary16 bit pattern to a float.
#[pyfunction]
fn fp16_value(bits: u16) -> f32 {
    fp16_to_f32(Fp16::from_bits(bits))
}

/// Splits an FP32 value into `k` bfloat16 components, returned as floats.
#[pyfunction]
#[pyo3(signature = (a, k = 3))]
fn split(a: f32, k: usize) -> PyResult<Vec<f32>> {
    let k = SplitCount::new(k).map_err(value_err)?;
    let s = bfsplit_core::split_scalar(a, k).map_err(value_err)?;
    Ok(s.components().iter().map(|b| b.to_f32()).collect())
}

/// Split dot product under a scheme name such as "b3x6" or "b3x6d".
#[pyfunction]
#[pyo3(signature = (x, y, scheme_name = "b3x6"))]
fn dot_split(x: Vec<f32>, y: Vec<f32>, scheme_name: &str) -> PyResult<f64> {
    let s = scheme(scheme_name)?;
    let (kx, ky) = s.splits();
    let sx = SplitVector::new(&x, kx).map_err(value_err)?;
    let sy = SplitVector::new(&y, ky).map_err(value_err)?;
    Ok(bfsplit_core::dot_split(&sx, &sy, s).map_err(value_err)?.value)
}

/// FP32 dot product with one correctly rounded FMA per element.
#[pyfunction]
fn dot_f32(x: Vec<f32>, y: Vec<f32>) -> PyResult<f32> {
    bfsplit_core::dot_f32_reference(&x, &y).map_err(value_err)
}

/// Split matrix product under a scheme name.
#[pyfunction]
#[pyo3(signature = (a, b, scheme_name = "b3x6"))]
fn gemm_split(a: Vec<Vec<f32>>, b: Vec<Vec<f32>>, scheme_name: &str) -> PyResult<Vec<Vec<f64>>> {
    let c = bfsplit_core::gemm_split_f32(&to_matrix(a)?, &to_matrix(b)?, scheme(scheme_name)?)
        .map_err(value_err)?;
    Ok(from_matrix(&c))
}

/// FP32 reference matrix product.
#[pyfunction]
fn gemm_f32(a: Vec<Vec<f32>>, b: Vec<Vec<f32>>) -> PyResult<Vec<Vec<f32>>> {
    let c = bfsplit_core::gemm_f32_reference(&to_matrix(a)?, &to_matrix(b)?).map_err(value_err)?;
    Ok(from_matrix(&c))
}

/// Evaluates a named dot-product error bound. Returns
/// `(error, bound, slack, passed)`.
#[pyfunction]
fn check_bound(kind: &str, x: Vec<f32>, y: Vec<f32>, computed: f64) -> PyResult<(f64, f64, f64, bool)> {
    let kind: BoundKind = kind.parse().map_err(value_err)?;
    let c = bfsplit_core::check_bound(kind, &x, &y, computed).map_err(value_err)?;
    Ok((c.error, c.bound, c.slack, c.pass))
}

fn gen_kind(kind: &str, n: usize, lo: f64, hi: f64, cond: f64) -> PyResult<GenKind> {
    Ok(match kind {
        "uniform" => GenKind::UniformRange { lo, hi },
        "wide" => GenKind::wide(),
        "gaussian" => GenKind::gaussian(),
        "cond" => GenKind::Conditioned { n, cond },
        "diagdom" => GenKind::DiagDominant { n },
        "adversarial" => GenKind::AdversarialSmallExponent,
        other => return Err(value_err(format!("unknown generator kind {other:?}"))),
    })
}

/// Seeded matrix generator. Kinds: uniform, wide, gaussian, cond, diagdom,
/// adversarial. `cols` defaults to `rows`.
#[pyfunction]
#[pyo3(signature = (kind, seed, rows, cols = None, lo = -1.0, hi = 1.0, cond = 1e3))]
fn gen_matrix(
    kind: &str,
    seed: u64,
    rows: usize,
    cols: Option<usize>,
    lo: f64,
    hi: f64,
    cond: f64,
) -> PyResult<Vec<Vec<f32>>> {
    let k = gen_kind(kind, rows, lo, hi, cond)?;
    let spec = GenSpec::new(k, seed, rows, cols.unwrap_or(rows));
    Ok(from_matrix(&bfsplit_core::gen_matrix(&spec).map_err(value_err)?))
}

/// Seeded vector generator for the element-wise kinds.
#[pyfunction]
#[pyo3(signature = (kind, seed, n, lo = -1.0, hi = 1.0))]
fn gen_vector(kind: &str, seed: u64, n: usize, lo: f64, hi: f64) -> PyResult<Vec<f32>> {
    let k = gen_kind(kind, n, lo, hi, 1.0)?;
    bfsplit_core::gen_vector(&GenSpec::new(k, seed, n, 1), n).map_err(value_err)
}

/// LU factors with partial pivoting.
#[pyclass(name = "LuFactors", frozen)]
struct PyLuFactors {
    inner: bfsplit_core::LuFactors,
}

#[pymethods]
impl PyLuFactors {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn precision(&self) -> String {
        self.inner.precision().to_string()
    }

    #[getter]
    fn permutation(&self) -> Vec<usize> {
        self.inner.permutation().to_vec()
    }

    fn lower(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.lower())
    }

    fn upper(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.upper())
    }

    /// Solves `A x = b` in "fp32" or "fp64".
    #[pyo3(signature = (b, precision = "fp64"))]
    fn solve(&self, b: Vec<f64>, precision: &str) -> PyResult<Vec<f64>> {
        let p = match precision {
            "fp32" => SolvePrecision::Fp32,
            "fp64" => SolvePrecision::Fp64,
            other => return Err(value_err(format!("solve precision {other:?}"))),
        };
        linalg::getrs(&self.inner, &b, p).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("LuFactors(n={}, precision={})", self.inner.n(), self.inner.precision())
    }
}

/// Outcome of an iterative solve.
#[pyclass(name = "SolveReport", frozen, get_all)]
struct PySolveReport {
    converged: bool,
    iterations: usize,
    residual_history: Vec<f64>,
    tolerance_used: f64,
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(converged={}, iterations={}, final_residual={:e})",
            self.converged,
            self.iterations,
            self.residual_history.last().copied().unwrap_or(f64::NAN)
        )
    }
}

impl From<linalg::SolveReport> for PySolveReport {
    fn from(r: linalg::SolveReport) -> Self {
        PySolveReport {
            converged: r.converged,
            iterations: r.iterations,
            residual_history: r.residual_history,
            tolerance_used: r.tolerance_used,
        }
    }
}

fn working(name: &str) -> PyResult<WorkingPrecision> {
    name.parse().map_err(value_err)
}

/// LU factorization in a working precision: fp32, fp64, bf16, fp16 or a
/// split scheme name.
#[pyfunction]
#[pyo3(signature = (a, precision = "fp32"))]
fn getrf(a: Vec<Vec<f32>>, precision: &str) -> PyResult<PyLuFactors> {
    let f = linalg::getrf(&to_matrix(a)?, working(precision)?).map_err(value_err)?;
    Ok(PyLuFactors { inner: f })
}

/// 1-norm condition number estimate.
#[pyfunction]
fn cond_estimate(a: Vec<Vec<f32>>) -> PyResult<f64> {
    linalg::cond_estimate(&to_matrix(a)?).map_err(value_err)
}

fn options(
    cond: Option<f64>,
    tol_factor: f64,
    max_iters: usize,
    restart: Option<usize>,
) -> SolveOptions {
    SolveOptions {
        tol_factor,
        max_iters,
        cond,
        restart,
    }
}

/// Iterative refinement with a low-precision LU. Returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (a, b, precision = "bf16", cond = None, tol_factor = 1.0, max_iters = 100))]
fn iterative_refinement(
    a: Vec<Vec<f32>>,
    b: Vec<f64>,
    precision: &str,
    cond: Option<f64>,
    tol_factor: f64,
    max_iters: usize,
) -> PyResult<(Vec<f64>, PySolveReport)> {
    let opts = options(cond, tol_factor, max_iters, None);
    let (x, r) = linalg::iterative_refinement(&to_matrix(a)?, &b, working(precision)?, &opts)
        .map_err(value_err)?;
    Ok((x, r.into()))
}

/// Left-preconditioned restarted GMRES. Returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (a, b, preconditioner = None, cond = None, tol_factor = 1.0, max_iters = 100, restart = None))]
fn gmres(
    a: Vec<Vec<f32>>,
    b: Vec<f64>,
    preconditioner: Option<&PyLuFactors>,
    cond: Option<f64>,
    tol_factor: f64,
    max_iters: usize,
    restart: Option<usize>,
) -> PyResult<(Vec<f64>, PySolveReport)> {
    let opts = options(cond, tol_factor, max_iters, restart);
    let m = preconditioner.map(|p| &p.inner);
    let (x, r) =
        linalg::gmres_preconditioned(&to_matrix(a)?, &b, m, &opts).map_err(value_err)?;
    Ok((x, r.into()))
}

/// BF16-over-FP32 throughput density divided by the scheme's product count.
#[pyfunction]
fn projected_speedup(density: f64, scheme_name: &str) -> PyResult<f64> {
    Ok(experiments::projected_speedup(density, scheme(scheme_name)?.scheme))
}

/// Runs an experiment and returns its CSV text. Unset options keep the
/// experiment's defaults.
#[pyfunction]
#[pyo3(signature = (
    name, sizes = None, trials = None, seed = None, dist = None,
    schemes = None, densities = None, paper_scale = false
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    sizes: Option<Vec<usize>>,
    trials: Option<usize>,
    seed: Option<u64>,
    dist: Option<&str>,
    schemes: Option<Vec<String>>,
    densities: Option<Vec<f64>>,
    paper_scale: bool,
) -> PyResult<String> {
    let experiment: Experiment = name.parse().map_err(value_err)?;
    let mut cfg = ExperimentConfig::defaults(experiment, paper_scale);
    if let Some(d) = dist {
        cfg.dist = Some(d.parse().map_err(value_err)?);
    }
    if let Some(s) = sizes {
        cfg.sizes = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = schemes {
        cfg.schemes = s;
    }
    if let Some(d) = densities {
        cfg.densities = d;
    }
    let report = py.detach(|| experiments::run(&cfg)).map_err(|e| match e {
        experiments::ExperimentError::Io(_) => PyOSError::new_err(e.to_string()),
        _ => value_err(e),
    })?;
    Ok(report.table.to_csv_string())
}

#[pymodule]
fn bfsplit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bf16_bits, m)?)?;
    m.add_function(wrap_pyfunction!(bf16_value, m)?)?;
    m.add_function(wrap_pyfunction!(fp16_bits, m)?)?;
    m.add_function(wrap_pyfunction!(fp16_value, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(dot_split, m)?)?;
    m.add_function(wrap_pyfunction!(dot_f32, m)?)?;
    m.add_function(wrap_pyfunction!(gemm_split, m)?)?;
    m.add_function(wrap_pyfunction!(gemm_f32, m)?)?;
    m.add_function(wrap_pyfunction!(check_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gen_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(gen_vector, m)?)?;
    m.add_function(wrap_pyfunction!(getrf, m)?)?;
    m.add_function(wrap_pyfunction!(cond_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(iterative_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(gmres, m)?)?;
    m.add_function(wrap_pyfunction!(projected_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyLuFactors>()?;
    m.add_class::<PySolveReport>()?;
    Ok(())
}
