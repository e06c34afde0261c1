//! `bfsplit`: batch runner for the split-BF16 accuracy experiments.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 bound
//! violation, 3 I/O error.

use bfsplit_core::experiments::{run, Dist, Experiment, ExperimentConfig, ExperimentError};
use clap::{Parser, ValueEnum};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    GemmAccuracy,
    GetrfAccuracy,
    Refine,
    Gmres,
    Speedup,
    BoundAudit,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::GemmAccuracy => Experiment::GemmAccuracy,
            ExperimentArg::GetrfAccuracy => Experiment::GetrfAccuracy,
            ExperimentArg::Refine => Experiment::Refine,
            ExperimentArg::Gmres => Experiment::Gmres,
            ExperimentArg::Speedup => Experiment::Speedup,
            ExperimentArg::BoundAudit => Experiment::BoundAudit,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bfsplit",
    version,
    about = "Accuracy experiments for FP32 arithmetic emulated with split BF16 products"
)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: ExperimentArg,

    /// Problem sizes (matrix order or vector length), comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// Trials per configuration cell.
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed; every trial derives its own stream from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Input distribution: uniform, wide, gaussian, cond:<k> or diagdom.
    #[arg(long, value_parser = parse_dist)]
    dist: Option<Dist>,

    /// Schemes, precisions or bound kinds, comma separated.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,

    /// BF16-over-FP32 throughput ratios for the speed-up projection.
    #[arg(long, value_delimiter = ',')]
    densities: Option<Vec<f64>>,

    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Use the full trial counts instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
}

fn parse_dist(s: &str) -> Result<Dist, String> {
    s.parse().map_err(|e: ExperimentError| e.to_string())
}

impl Args {
    fn config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(self.experiment.into(), self.paper_scale);
        cfg.dist = self.dist;
        if let Some(s) = &self.sizes {
            cfg.sizes = s.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.schemes {
            cfg.schemes = s.clone();
        }
        if let Some(d) = &self.densities {
            cfg.densities = d.clone();
        }
        cfg
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_IO: u8 = 3;

fn error_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::Io(_) | ExperimentError::Csv(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = args.config();
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bfsplit: {e}");
            return ExitCode::from(error_code(&e));
        }
    };

    let written = match &args.out {
        Some(path) => File::create(path)
            .map_err(ExperimentError::from)
            .and_then(|f| report.table.write_csv(BufWriter::new(f)))
            .map(|()| {
                print!("{}", report.table.to_pretty());
            }),
        None => report.table.write_csv(io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("bfsplit: {e}");
        return ExitCode::from(EXIT_IO);
    }
    let _ = io::stdout().flush();

    if report.violations > 0 {
        eprintln!("bfsplit: {} bound violation(s)", report.violations);
        return ExitCode::from(EXIT_VIOLATION);
    }
    ExitCode::SUCCESS
}
