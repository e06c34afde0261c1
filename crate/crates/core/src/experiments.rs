//! Experiment drivers behind the `bfsplit` command line.
//!
//! Each driver takes an [`ExperimentConfig`] and returns a [`Report`]: a
//! table ready for CSV output plus a count of bound violations. Trials are
//! seeded independently from `(master seed, indices)` and run on the rayon
//! pool, then reduced in trial order, so output is byte-identical across
//! runs and thread counts.

use crate::gen::{derive_seed, gen_matrix, gen_vector, GenError, GenKind, GenSpec};
use crate::kernels::{
    dot_f32_reference, dot_split, gemm_f32_reference, gemm_f64_reference, gemm_split_f32,
    KernelError, ProductScheme, Scheme,
};
use crate::linalg::{
    getrf, gmres_preconditioned, iterative_refinement, LinalgError, LuFactors, SolveOptions,
    WorkingPrecision,
};
use crate::matrix::Matrix;
use crate::metrics::{
    ceil_log2, check_bound, elementwise_error_ratio, exact_accumulation_guaranteed,
    rel_frobenius_error, BoundKind, ErrorStats, MetricsError,
};
use crate::split::{SplitCount, SplitVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Split(#[from] crate::split::SplitError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::InvalidConfig(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    GemmAccuracy,
    GetrfAccuracy,
    Refine,
    Gmres,
    Speedup,
    BoundAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::GemmAccuracy,
        Experiment::GetrfAccuracy,
        Experiment::Refine,
        Experiment::Gmres,
        Experiment::Speedup,
        Experiment::BoundAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GemmAccuracy => "gemm-accuracy",
            Experiment::GetrfAccuracy => "getrf-accuracy",
            Experiment::Refine => "refine",
            Experiment::Gmres => "gmres",
            Experiment::Speedup => "speedup",
            Experiment::BoundAudit => "bound-audit",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ExperimentError::InvalidConfig(format!("unknown experiment {s:?}")))
    }
}

/// Input distribution named on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    /// Uniform on `[-1, 1]`.
    Uniform,
    /// Uniform exponents over a window sized so the run cannot overflow.
    Wide,
    /// Normally distributed exponents, sigma 8.
    Gaussian,
    /// Matrices with the given 2-norm condition number.
    Cond(f64),
    /// Row and column diagonally dominant matrices.
    DiagDom,
}

impl Dist {
    pub const VECTOR_DISTS: [Dist; 3] = [Dist::Uniform, Dist::Wide, Dist::Gaussian];

    /// Generator for FP32 entries of a length-`n` reduction.
    fn entry_kind(self, n: usize) -> Result<GenKind, ExperimentError> {
        match self {
            Dist::Uniform => Ok(GenKind::UNIFORM_UNIT),
            Dist::Wide => {
                let e = wide_window(n);
                Ok(GenKind::WideExponent {
                    min_exp: -e,
                    max_exp: e,
                })
            }
            Dist::Gaussian => Ok(GenKind::gaussian()),
            other => invalid(format!("distribution {other} does not describe entries")),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Uniform => f.write_str("uniform"),
            Dist::Wide => f.write_str("wide"),
            Dist::Gaussian => f.write_str("gaussian"),
            Dist::Cond(k) => write!(f, "cond:{k}"),
            Dist::DiagDom => f.write_str("diagdom"),
        }
    }
}

impl FromStr for Dist {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Dist::Uniform),
            "wide" => Ok(Dist::Wide),
            "gaussian" => Ok(Dist::Gaussian),
            "diagdom" => Ok(Dist::DiagDom),
            _ => match s.strip_prefix("cond:").map(str::parse::<f64>) {
                Some(Ok(k)) if k.is_finite() && k >= 1.0 => Ok(Dist::Cond(k)),
                _ => invalid(format!("unknown distribution {s:?}")),
            },
        }
    }
}

/// Largest exponent `e` such that products of entries in `[2^-e, 2^e)`
/// cannot overflow an FP32 reduction of length `n`.
pub fn wide_window(n: usize) -> i32 {
    let growth = if n <= 1 { 0 } else { ceil_log2(n as f64) };
    (126 - growth) / 2 - 1
}

/// Exponent window of the bound audit's wide distribution. Products stay
/// above `2^-102`, so FP32 underflow in the split partial products costs at
/// most `2^-47` relative and cannot mask a bound violation.
pub const AUDIT_WIDE_EXP: i32 = 51;

/// One experiment run's settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `None` sweeps the experiment's default distributions.
    pub dist: Option<Dist>,
    pub sizes: Vec<usize>,
    /// Scheme or precision names; meaning depends on the experiment.
    pub schemes: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    /// Density ratios for the speed-up projection.
    pub densities: Vec<f64>,
}

pub const DEFAULT_SEED: u64 = 20_190_601;

impl ExperimentConfig {
    /// Desk-scale defaults; `paper_scale` restores the full trial counts.
    pub fn defaults(experiment: Experiment, paper_scale: bool) -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let (sizes, schemes, trials, full) = match experiment {
            Experiment::GemmAccuracy => (
                vec![64, 128, 256],
                strings(&["b2x3", "sgemm", "b3x6", "b3x6d"]),
                100,
                1000,
            ),
            Experiment::GetrfAccuracy => (vec![100, 200, 300], strings(&["b3x6"]), 25, 100),
            Experiment::Refine => (vec![50], strings(&["fp32", "fp16", "bf16"]), 25, 100),
            Experiment::Gmres => (vec![10, 50, 100], strings(&["fp32", "fp16", "bf16"]), 25, 100),
            Experiment::Speedup => (vec![1], strings(&["b2x3", "b3x6", "b3x9"]), 1, 1),
            Experiment::BoundAudit => (
                vec![0, 1, 2, 3, 8, 16, 64, 256, 1024, 4096],
                strings(&["fp32_dot", "bf16_z2", "bf16_z2_exact_case"]),
                100,
                1000,
            ),
        };
        ExperimentConfig {
            experiment,
            dist: None,
            sizes,
            schemes,
            trials: if paper_scale { full } else { trials },
            seed: DEFAULT_SEED,
            densities: vec![8.0, 16.0, 32.0],
        }
    }

    /// Short hex digest of every field, written into each CSV row.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "{}|{}|{:?}|{:?}|{}|{}|{:?}",
            self.experiment,
            self.dist.map_or_else(|| "default".to_string(), |d| d.to_string()),
            self.sizes,
            self.schemes,
            self.trials,
            self.seed,
            self.densities,
        );
        Sha256::digest(canonical.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.experiment == Experiment::Speedup {
            if self.densities.is_empty() {
                return invalid("densities must be nonempty");
            }
            if let Some(d) = self.densities.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
                return invalid(format!("density {d} must be positive"));
            }
        } else if self.sizes.is_empty() {
            return invalid("sizes must be nonempty");
        }
        if self.schemes.is_empty() {
            return invalid("schemes must be nonempty");
        }
        Ok(())
    }

    fn stream(&self, indices: &[u64]) -> u64 {
        indices
            .iter()
            .fold(self.seed, |acc, &i| derive_seed(acc, i))
    }
}

/// A rectangular table of already-formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            header: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows whose named columns equal the given values.
    pub fn select<'a>(&'a self, filters: &[(&str, &str)]) -> Vec<&'a [String]> {
        let idx: Vec<(usize, &str)> = filters
            .iter()
            .map(|(c, v)| (self.column(c).unwrap_or(usize::MAX), *v))
            .collect();
        self.rows
            .iter()
            .filter(|r| idx.iter().all(|&(i, v)| r.get(i).is_some_and(|x| x == v)))
            .map(Vec::as_slice)
            .collect()
    }

    /// A numeric cell from the first row matching `filters`.
    pub fn value(&self, filters: &[(&str, &str)], column: &str) -> Option<f64> {
        let c = self.column(column)?;
        self.select(filters).first()?.get(c)?.parse().ok()
    }

    /// Column-aligned text for terminals.
    pub fn to_pretty(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .filter_map(|r| r.get(c))
                    .chain(std::iter::once(&self.header[c]))
                    .map(String::len)
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.header);
        for row in &self.rows {
            out.push('\n');
            out.push_str(&line(row));
        }
        out.push('\n');
        out
    }
}

/// Result of a driver: the table and how many bound checks failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub table: Table,
    pub violations: usize,
}

/// Round-trippable float rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn provenance(cfg: &ExperimentConfig) -> [String; 2] {
    [cfg.config_hash(), cfg.seed.to_string()]
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    match cfg.experiment {
        Experiment::GemmAccuracy => run_gemm_accuracy(cfg),
        Experiment::GetrfAccuracy => run_getrf_accuracy(cfg),
        Experiment::Refine => run_refine(cfg),
        Experiment::Gmres => run_gmres(cfg),
        Experiment::Speedup => run_speedup(cfg),
        Experiment::BoundAudit => run_bound_audit(cfg),
    }
}

/// A GEMM implementation compared in the accuracy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GemmMethod {
    /// FP32 GEMM with one fused multiply-add per term.
    Sgemm,
    Split(ProductScheme),
}

impl GemmMethod {
    fn multiply(self, a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Vec<f64>, KernelError> {
        Ok(match self {
            GemmMethod::Sgemm => gemm_f32_reference(a, b)?.to_f64().into_vec(),
            GemmMethod::Split(s) => gemm_split_f32(a, b, s)?.into_vec(),
        })
    }
}

impl fmt::Display for GemmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GemmMethod::Sgemm => f.write_str("sgemm"),
            GemmMethod::Split(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for GemmMethod {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgemm" | "sgemm-reference" | "fp32" => Ok(GemmMethod::Sgemm),
            _ => s
                .parse()
                .map(GemmMethod::Split)
                .map_err(|_| ExperimentError::InvalidConfig(format!("unknown scheme {s:?}"))),
        }
    }
}

fn parse_all<T: FromStr>(names: &[String], what: &str) -> Result<Vec<T>, ExperimentError> {
    names
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| ExperimentError::InvalidConfig(format!("unknown {what} {s:?}")))
        })
        .collect()
}

fn vector_dists(cfg: &ExperimentConfig) -> Result<Vec<Dist>, ExperimentError> {
    match cfg.dist {
        None => Ok(vec![Dist::Uniform]),
        Some(d @ (Dist::Uniform | Dist::Wide | Dist::Gaussian)) => Ok(vec![d]),
        Some(d) => invalid(format!("{} does not accept --dist {d}", cfg.experiment)),
    }
}

/// Relative Frobenius error of each method against FP64 GEMM, per size.
pub fn run_gemm_accuracy(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let methods: Vec<GemmMethod> = parse_all(&cfg.schemes, "scheme")?;
    let dists = vector_dists(cfg)?;
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "size",
        "dist",
        "scheme",
        "trials",
        "mean_rel_err",
        "max_rel_err",
        "ratio_vs_sgemm",
    ]);
    for (di, &dist) in dists.iter().enumerate() {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            let kind = dist.entry_kind(n)?;
            let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<Vec<f64>, ExperimentError> {
                    let s = cfg.stream(&[di as u64, si as u64, t as u64]);
                    let a = gen_matrix(&GenSpec::new(kind, derive_seed(s, 0), n, n))?;
                    let b = gen_matrix(&GenSpec::new(kind, derive_seed(s, 1), n, n))?;
                    let oracle = gemm_f64_reference(&a.to_f64(), &b.to_f64())?;
                    methods
                        .iter()
                        .map(|m| {
                            let c = m.multiply(&a, &b)?;
                            match rel_frobenius_error(&c, oracle.as_slice()) {
                                Ok(e) => Ok(e),
                                // A zero product matrix can only be matched exactly.
                                Err(MetricsError::ZeroOracle) => {
                                    Ok(if c.iter().all(|v| *v == 0.0) { 0.0 } else { f64::INFINITY })
                                }
                                Err(e) => Err(e.into()),
                            }
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            let stats: Vec<ErrorStats> = (0..methods.len())
                .map(|m| {
                    per_trial
                        .iter()
                        .fold(ErrorStats::default(), |acc, errs| acc.push(errs[m]))
                })
                .collect();
            let reference = methods
                .iter()
                .position(|m| *m == GemmMethod::Sgemm)
                .map(|i| stats[i]);
            for (m, st) in methods.iter().zip(&stats) {
                let ratio = reference.map(|r| st.with_reference(&r).ratio_vs_reference.unwrap_or(f64::NAN));
                let [h, sd] = provenance(cfg);
                table.rows.push(vec![
                    h,
                    sd,
                    n.to_string(),
                    dist.to_string(),
                    m.to_string(),
                    st.sample_count.to_string(),
                    fmt_f64(st.mean_rel),
                    fmt_f64(st.max_rel),
                    ratio.map_or_else(|| "nan".into(), fmt_f64),
                ]);
            }
        }
    }
    Ok(Report {
        table,
        violations: 0,
    })
}

enum LuTrial {
    Ratio(f64, f64, f64),
    PivotMismatch,
    Singular,
}

/// Mean elementwise error ratio of FP32 LU over split LU, both measured
/// against FP64 LU of the same FP32 matrix. A ratio above one means the
/// split factorization is the more accurate one.
pub fn run_getrf_accuracy(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let schemes: Vec<ProductScheme> = parse_all(&cfg.schemes, "scheme")?;
    let dists = match cfg.dist {
        None => vec![Dist::Uniform, Dist::Wide],
        Some(_) => vector_dists(cfg)?,
    };
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "size",
        "range",
        "scheme",
        "trials_used",
        "pivot_mismatches",
        "singular",
        "error_ratio",
        "mean_err_fp32",
        "mean_err_split",
    ]);
    for (di, &dist) in dists.iter().enumerate() {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            let kind = dist.entry_kind(n)?;
            for &scheme in &schemes {
                let trials: Vec<LuTrial> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| -> Result<LuTrial, ExperimentError> {
                        let s = cfg.stream(&[di as u64, si as u64, t as u64]);
                        let a = gen_matrix(&GenSpec::new(kind, s, n, n))?;
                        lu_trial(&a, scheme)
                    })
                    .collect::<Result<_, _>>()?;
                let mut sum = [0.0f64; 3];
                let (mut used, mut mismatches, mut singular) = (0usize, 0usize, 0usize);
                for t in &trials {
                    match *t {
                        LuTrial::Ratio(r, e32, es) => {
                            sum[0] += r;
                            sum[1] += e32;
                            sum[2] += es;
                            used += 1;
                        }
                        LuTrial::PivotMismatch => mismatches += 1,
                        LuTrial::Singular => singular += 1,
                    }
                }
                let mean = |v: f64| if used == 0 { f64::NAN } else { v / used as f64 };
                let [h, sd] = provenance(cfg);
                table.rows.push(vec![
                    h,
                    sd,
                    n.to_string(),
                    dist.to_string(),
                    scheme.to_string(),
                    used.to_string(),
                    mismatches.to_string(),
                    singular.to_string(),
                    fmt_f64(mean(sum[0])),
                    fmt_f64(mean(sum[1])),
                    fmt_f64(mean(sum[2])),
                ]);
            }
        }
    }
    Ok(Report {
        table,
        violations: 0,
    })
}

fn lu_trial(a: &Matrix<f32>, scheme: ProductScheme) -> Result<LuTrial, ExperimentError> {
    let factor = |p| match getrf(a, p) {
        Ok(f) => Ok(Some(f)),
        Err(LinalgError::Singular { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let (Some(f64_), Some(f32_), Some(fs)) = (
        factor(WorkingPrecision::Fp64)?,
        factor(WorkingPrecision::Fp32)?,
        factor(WorkingPrecision::Split(scheme))?,
    ) else {
        return Ok(LuTrial::Singular);
    };
    // Elementwise comparison is only meaningful for the same pivot order.
    if f32_.permutation() != f64_.permutation() || fs.permutation() != f64_.permutation() {
        return Ok(LuTrial::PivotMismatch);
    }
    let errors = |f: &LuFactors| -> Vec<f64> {
        f.packed()
            .as_slice()
            .iter()
            .zip(f64_.packed().as_slice())
            .map(|(x, y)| (x - y).abs())
            .collect()
    };
    let (e32, es) = (errors(&f32_), errors(&fs));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = match elementwise_error_ratio(&e32, &es) {
        Ok(r) => r.mean,
        // Both exact everywhere: neither factorization is better.
        Err(MetricsError::AllDenominatorsZero(_)) if e32.iter().all(|&e| e == 0.0) => 1.0,
        Err(MetricsError::AllDenominatorsZero(_)) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    Ok(LuTrial::Ratio(ratio, mean(&e32), mean(&es)))
}

/// Default condition numbers of the refinement sweep.
pub const REFINE_CONDS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

fn rhs(seed: u64, n: usize) -> Result<Vec<f64>, ExperimentError> {
    let spec = GenSpec::new(GenKind::UNIFORM_UNIT, seed, n, 1);
    Ok(gen_vector(&spec, n)?.into_iter().map(f64::from).collect())
}

#[derive(Default)]
struct ConvergenceTally {
    trials: usize,
    converged: usize,
    iterations: usize,
}

impl ConvergenceTally {
    fn add(&mut self, converged: bool, iterations: usize) {
        self.trials += 1;
        if converged {
            self.converged += 1;
            self.iterations += iterations;
        }
    }

    fn cells(&self) -> [String; 4] {
        let pct = 100.0 * self.converged as f64 / self.trials as f64;
        let mean = if self.converged == 0 {
            f64::NAN
        } else {
            self.iterations as f64 / self.converged as f64
        };
        [
            self.trials.to_string(),
            self.converged.to_string(),
            fmt_f64(pct),
            fmt_f64(mean),
        ]
    }
}

/// Iterative refinement with low-precision LU on matrices of known
/// condition number. Solver failures count as non-convergence.
pub fn run_refine(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let precisions: Vec<WorkingPrecision> = parse_all(&cfg.schemes, "precision")?;
    let conds = match cfg.dist {
        None => REFINE_CONDS.to_vec(),
        Some(Dist::Cond(k)) => vec![k],
        Some(d) => return invalid(format!("refine does not accept --dist {d}")),
    };
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "precision",
        "n",
        "cond",
        "trials",
        "converged",
        "pct_converged",
        "mean_iters",
    ]);
    for (si, &n) in cfg.sizes.iter().enumerate() {
        for (ci, &cond) in conds.iter().enumerate() {
            let outcomes: Vec<Vec<(bool, usize)>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<Vec<(bool, usize)>, ExperimentError> {
                    let s = cfg.stream(&[si as u64, ci as u64, t as u64]);
                    let a = gen_matrix(&GenSpec::square(
                        GenKind::Conditioned { n, cond },
                        derive_seed(s, 0),
                        n,
                    ))?;
                    let b = rhs(derive_seed(s, 1), n)?;
                    let opts = SolveOptions::default().with_cond(cond);
                    Ok(precisions
                        .iter()
                        .map(|&p| match iterative_refinement(&a, &b, p, &opts) {
                            Ok((_, r)) => (r.converged, r.iterations),
                            Err(_) => (false, 0),
                        })
                        .collect())
                })
                .collect::<Result<_, _>>()?;
            for (pi, p) in precisions.iter().enumerate() {
                let mut tally = ConvergenceTally::default();
                for o in &outcomes {
                    tally.add(o[pi].0, o[pi].1);
                }
                let [h, sd] = provenance(cfg);
                let mut row = vec![h, sd, p.to_string(), n.to_string(), fmt_f64(cond)];
                row.extend(tally.cells());
                table.rows.push(row);
            }
        }
    }
    Ok(Report {
        table,
        violations: 0,
    })
}

/// Preconditioner choice for the GMRES sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preconditioner {
    None,
    Lu(WorkingPrecision),
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preconditioner::None => f.write_str("none"),
            Preconditioner::Lu(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Preconditioner {
    type Err = LinalgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            Ok(Preconditioner::None)
        } else {
            s.parse().map(Preconditioner::Lu)
        }
    }
}

/// GMRES on diagonally dominant systems, preconditioned by low-precision
/// LU factors.
pub fn run_gmres(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let preconds: Vec<Preconditioner> = parse_all(&cfg.schemes, "preconditioner")?;
    match cfg.dist {
        None | Some(Dist::DiagDom) => {}
        Some(d) => return invalid(format!("gmres does not accept --dist {d}")),
    }
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "precision",
        "n",
        "trials",
        "converged",
        "pct_converged",
        "mean_iters",
    ]);
    for (si, &n) in cfg.sizes.iter().enumerate() {
        let outcomes: Vec<Vec<(bool, usize)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<(bool, usize)>, ExperimentError> {
                let s = cfg.stream(&[si as u64, t as u64]);
                let a = gen_matrix(&GenSpec::square(
                    GenKind::DiagDominant { n },
                    derive_seed(s, 0),
                    n,
                ))?;
                let b = rhs(derive_seed(s, 1), n)?;
                // One condition estimate per system, shared by every run.
                let opts = SolveOptions::default().with_cond(crate::linalg::cond_estimate(&a)?);
                Ok(preconds
                    .iter()
                    .map(|&p| {
                        let m = match p {
                            Preconditioner::None => Ok(None),
                            Preconditioner::Lu(w) => getrf(&a, w).map(Some),
                        };
                        match m.and_then(|m| gmres_preconditioned(&a, &b, m.as_ref(), &opts)) {
                            Ok((_, r)) => (r.converged, r.iterations),
                            Err(_) => (false, 0),
                        }
                    })
                    .collect())
            })
            .collect::<Result<_, _>>()?;
        for (pi, p) in preconds.iter().enumerate() {
            let mut tally = ConvergenceTally::default();
            for o in &outcomes {
                tally.add(o[pi].0, o[pi].1);
            }
            let [h, sd] = provenance(cfg);
            let mut row = vec![h, sd, p.to_string(), n.to_string()];
            row.extend(tally.cells());
            table.rows.push(row);
        }
    }
    Ok(Report {
        table,
        violations: 0,
    })
}

/// Projected speed-up over FP32: BF16 throughput density divided by the
/// number of BF16 products a scheme needs. Analytic, no timing.
pub fn projected_speedup(density: f64, scheme: Scheme) -> f64 {
    density / scheme.product_count() as f64
}

pub fn run_speedup(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let schemes: Vec<ProductScheme> = parse_all(&cfg.schemes, "scheme")?;
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "density",
        "scheme",
        "products",
        "ratio",
        "projected_speedup",
    ]);
    for &d in &cfg.densities {
        for s in &schemes {
            let products = s.scheme.product_count();
            let [h, sd] = provenance(cfg);
            table.rows.push(vec![
                h,
                sd,
                fmt_f64(d),
                s.to_string(),
                products.to_string(),
                format!("{d}/{products}"),
                fmt_f64(projected_speedup(d, s.scheme)),
            ]);
        }
    }
    Ok(Report {
        table,
        violations: 0,
    })
}

/// Largest length for which the exact-case generator can satisfy the
/// sufficient exactness condition.
pub const EXACT_CASE_MAX_N: usize = 16;

/// Vectors whose products all lie within a factor of four of each other,
/// so the level-0 accumulation is exact for `n ≤ 16`.
pub fn exact_case_vectors(n: usize, seed: u64) -> (Vec<f32>, Vec<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = rng.random_range(-20..=20);
    let ey = rng.random_range(-20..=20);
    let mut draw = |e: i32| -> f32 {
        let m = 1.0 + rng.random::<f64>();
        let sign = if rng.random::<bool>() { -1.0 } else { 1.0 };
        (sign * m * 2f64.powi(e)) as f32
    };
    let x = (0..n).map(|_| draw(ex)).collect();
    let y = (0..n).map(|_| draw(ey)).collect();
    (x, y)
}

#[derive(Debug, Clone, Copy)]
struct BoundTally {
    violations: usize,
    min_slack: f64,
    max_ratio: f64,
}

impl BoundTally {
    fn new() -> Self {
        BoundTally {
            violations: 0,
            min_slack: f64::INFINITY,
            max_ratio: 0.0,
        }
    }

    fn add(&mut self, error: f64, bound: f64, pass: bool) {
        if !pass {
            self.violations += 1;
        }
        self.min_slack = self.min_slack.min(bound - error);
        let ratio = if bound > 0.0 {
            error / bound
        } else if error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.max_ratio = self.max_ratio.max(ratio);
    }
}

/// Checks the FP32 and split dot-product error bounds over random inputs.
pub fn run_bound_audit(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let kinds: Vec<BoundKind> = parse_all(&cfg.schemes, "bound kind")?;
    let dists = match cfg.dist {
        None => Dist::VECTOR_DISTS.to_vec(),
        Some(_) => vector_dists(cfg)?,
    };
    let mut table = Table::new(&[
        "config_hash",
        "seed",
        "n",
        "dist",
        "bound_kind",
        "trials",
        "violations",
        "min_slack",
        "max_error_over_bound",
    ]);
    let mut violations = 0;
    // Exact-case inputs come from their own generator; "exact" labels them.
    let mut sweeps: Vec<(String, Option<Dist>)> =
        dists.iter().map(|d| (d.to_string(), Some(*d))).collect();
    if kinds.contains(&BoundKind::Bf16Z2ExactCase) {
        sweeps.push(("exact".into(), None));
    }
    for (di, (label, dist)) in sweeps.iter().enumerate() {
        for (si, &n) in cfg.sizes.iter().enumerate() {
            let row_kinds: Vec<BoundKind> = kinds
                .iter()
                .copied()
                .filter(|&k| match dist {
                    Some(_) => k != BoundKind::Bf16Z2ExactCase,
                    None => n <= EXACT_CASE_MAX_N,
                })
                .collect();
            if row_kinds.is_empty() {
                continue;
            }
            let checks: Vec<Vec<(f64, f64, bool)>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<Vec<(f64, f64, bool)>, ExperimentError> {
                    let s = cfg.stream(&[di as u64, si as u64, t as u64]);
                    let (x, y) = match dist {
                        Some(d) => {
                            let kind = match d {
                                Dist::Wide => GenKind::WideExponent {
                                    min_exp: -AUDIT_WIDE_EXP,
                                    max_exp: AUDIT_WIDE_EXP,
                                },
                                _ => d.entry_kind(n)?,
                            };
                            (
                                gen_vector(&GenSpec::new(kind, derive_seed(s, 0), n, 1), n)?,
                                gen_vector(&GenSpec::new(kind, derive_seed(s, 1), n, 1), n)?,
                            )
                        }
                        None => exact_case_vectors(n, s),
                    };
                    audit_one(&x, &y, &row_kinds)
                })
                .collect::<Result<_, _>>()?;
            for (ki, kind) in row_kinds.iter().enumerate() {
                let mut tally = BoundTally::new();
                for c in &checks {
                    let (e, b, p) = c[ki];
                    tally.add(e, b, p);
                }
                violations += tally.violations;
                let [h, sd] = provenance(cfg);
                table.rows.push(vec![
                    h,
                    sd,
                    n.to_string(),
                    label.clone(),
                    kind.to_string(),
                    cfg.trials.to_string(),
                    tally.violations.to_string(),
                    fmt_f64(tally.min_slack),
                    fmt_f64(tally.max_ratio),
                ]);
            }
        }
    }
    Ok(Report { table, violations })
}

fn audit_one(
    x: &[f32],
    y: &[f32],
    kinds: &[BoundKind],
) -> Result<Vec<(f64, f64, bool)>, ExperimentError> {
    let split = |k: usize| SplitVector::new(x, SplitCount::new(k).expect("valid count"));
    kinds
        .iter()
        .map(|&kind| {
            let computed = match kind {
                BoundKind::Fp32Dot => f64::from(dot_f32_reference(x, y)?),
                BoundKind::Bf16Z2 | BoundKind::Bf16Z2ExactCase => {
                    let sy = SplitVector::new(y, SplitCount::THREE)?;
                    dot_split(&split(3)?, &sy, ProductScheme::fp32(Scheme::B3x6))?.value
                }
            };
            if kind == BoundKind::Bf16Z2ExactCase && !exact_accumulation_guaranteed(x, y) {
                return invalid("exact-case generator produced a non-exact input");
            }
            let c = check_bound(kind, x, y, computed)?;
            Ok((c.error, c.bound, c.pass))
        })
        .collect()
}
