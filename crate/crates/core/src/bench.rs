//! Run specifications behind the `treechol` command-line tool.

use std::path::PathBuf;

use crate::flops::{flop_breakdown, FlopBreakdown};
use crate::generate::spd_generate;
use crate::matrix::Matrix;
use crate::mtx::{load_matrix_market, MtxError, DEFAULT_DENSIFY_LIMIT};
use crate::precision::PrecisionConfig;
use crate::report::{accuracy_sweep, run_factorization, FactorReport};
use crate::solver::{SolverError, SolverOptions};

/// Largest relative asymmetry `||A - A^T||_F / ||A||_F` accepted from a file.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Factor,
    Sweep,
    Plan,
    Mtx,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    #[default]
    Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub sizes: Vec<usize>,
    pub configs: Vec<PrecisionConfig>,
    pub leaf: usize,
    pub seeds: Vec<u64>,
    pub quantize: bool,
    pub mtx_path: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunSpec {
    /// Spec with one size, config and seed and default everything else.
    pub fn new(command: Command, n: usize, config: PrecisionConfig, seed: u64) -> Self {
        Self {
            command,
            sizes: vec![n],
            configs: vec![config],
            leaf: 64,
            seeds: vec![seed],
            quantize: true,
            mtx_path: None,
            output: None,
            format: OutputFormat::default(),
        }
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions::default()
            .with_leaf_size(self.leaf)
            .with_quantize(self.quantize)
    }

    /// Checks the shape rules of `self.command`.
    pub fn validate(&self) -> Result<(), BenchError> {
        let usage = |m: &str| Err(BenchError::Usage(m.to_owned()));
        if self.leaf == 0 {
            return usage("--leaf must be at least 1");
        }
        if self.sizes.contains(&0) {
            return usage("matrix sizes must be at least 1");
        }
        if self.configs.is_empty() {
            return usage("at least one precision config is required");
        }
        match self.command {
            Command::Factor if self.sizes.len() != 1 || self.configs.len() != 1 || self.seeds.len() != 1 => {
                usage("factor takes exactly one size, config and seed")
            }
            Command::Plan if self.sizes.len() != 1 || self.configs.len() != 1 => {
                usage("plan takes exactly one size and config")
            }
            Command::Sweep if self.sizes.is_empty() || self.seeds.is_empty() => {
                usage("sweep needs at least one size and one seed")
            }
            Command::Mtx if self.mtx_path.is_none() => usage("mtx needs --mtx-path"),
            Command::Mtx if self.configs.len() != 1 => usage("mtx takes exactly one config"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Mtx(#[from] MtxError),
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:e} exceeds {SYMMETRY_TOLERANCE:e}")]
    NotSymmetric { asymmetry: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `||A - A^T||_F / ||A||_F`, 0 for a zero matrix.
pub fn relative_asymmetry(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut diff = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            diff += 2.0 * (a[(i, j)] - a[(j, i)]).powi(2);
        }
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        0.0
    } else {
        diff.sqrt() / norm
    }
}

pub fn run_factor(spec: &RunSpec) -> Result<FactorReport, BenchError> {
    spec.validate()?;
    let (n, seed) = (spec.sizes[0], spec.seeds[0]);
    Ok(run_factorization(&spd_generate(n, seed), &spec.configs[0], &spec.options(), Some(seed))?)
}

pub fn run_sweep(spec: &RunSpec) -> Result<Vec<FactorReport>, BenchError> {
    spec.validate()?;
    Ok(accuracy_sweep(&spec.sizes, &spec.configs, spec.leaf, &spec.seeds, spec.quantize)?)
}

/// Static flop distribution; no matrix is formed.
pub fn run_plan(spec: &RunSpec) -> Result<FlopBreakdown, BenchError> {
    spec.validate()?;
    Ok(flop_breakdown(spec.sizes[0], spec.leaf, &spec.configs[0]))
}

pub fn run_mtx(spec: &RunSpec) -> Result<FactorReport, BenchError> {
    spec.validate()?;
    let path = spec.mtx_path.as_deref().expect("validated");
    let a = load_matrix_market(path, DEFAULT_DENSIFY_LIMIT)?;
    let asymmetry = relative_asymmetry(&a);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(BenchError::NotSymmetric { asymmetry });
    }
    Ok(run_factorization(&a, &spec.configs[0], &spec.options(), None)?)
}
