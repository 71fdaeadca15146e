//! Per-run reports, accuracy sweeps and their CSV form.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::flops::FlopBreakdown;
use crate::generate::spd_generate;
use crate::matrix::Matrix;
use crate::metrics::{digits, factorization_error};
use crate::precision::{PrecisionConfig, PrecisionLevel};
use crate::solver::{factorize, SolverError, SolverOptions};

/// Header of the CSV written by [`write_csv`].
pub const CSV_HEADER: [&str; 13] = [
    "n",
    "config",
    "leaf",
    "quantize",
    "seed",
    "status",
    "rel_error",
    "digits",
    "flops_f16",
    "flops_f32",
    "flops_f64",
    "flops_total",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotPositiveDefinite,
    NumericalBreakdown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::NotPositiveDefinite => "not-positive-definite",
            Self::NumericalBreakdown => "numerical-breakdown",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorReport {
    pub n: usize,
    pub config: PrecisionConfig,
    pub leaf: usize,
    pub quantize: bool,
    /// Generator seed; `None` for loaded matrices.
    pub seed: Option<u64>,
    pub status: Status,
    /// `||A - L L^T||_F / ||A||_F`, NaN unless the run succeeded.
    pub rel_error: f64,
    pub digits: f64,
    /// Flops executed, up to the point of failure if the run failed.
    pub flops: FlopBreakdown,
    pub wall_ms: f64,
    /// Error message of a failed run.
    pub diagnostic: Option<String>,
}

/// Factors a copy of `a` and measures the result against `a`.
///
/// `a` is the one extra copy kept outside the solver.
pub fn run_factorization(
    a: &Matrix,
    config: &PrecisionConfig,
    options: &SolverOptions,
    seed: Option<u64>,
) -> Result<FactorReport, SolverError> {
    let mut l = a.clone();
    let mut flops = FlopBreakdown::default();
    let start = Instant::now();
    let result = factorize(l.view_mut(), config, options, &mut flops);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (status, diagnostic) = match result {
        Ok(_) => (Status::Ok, None),
        Err(e @ SolverError::InvalidArgument(_)) => return Err(e),
        Err(e @ SolverError::NotPositiveDefinite { .. }) => (Status::NotPositiveDefinite, Some(e.to_string())),
        Err(e) => (Status::NumericalBreakdown, Some(e.to_string())),
    };
    let rel_error = if status == Status::Ok {
        factorization_error(a, &l)
    } else {
        f64::NAN
    };
    Ok(FactorReport {
        n: a.rows(),
        config: config.clone(),
        leaf: options.leaf_size,
        quantize: options.quantize,
        seed,
        status,
        rel_error,
        digits: digits(rel_error),
        flops,
        wall_ms,
        diagnostic,
    })
}

/// One report per `(n, config, seed)`, ordered by `n`, then config, then seed.
///
/// Cells run in parallel, each on its own matrices. A failing cell is
/// recorded in its status and does not stop the sweep.
pub fn accuracy_sweep(
    sizes: &[usize],
    configs: &[PrecisionConfig],
    leaf: usize,
    seeds: &[u64],
    quantize: bool,
) -> Result<Vec<FactorReport>, SolverError> {
    let options = SolverOptions::default().with_leaf_size(leaf).with_quantize(quantize);
    let cells: Vec<(usize, &PrecisionConfig, u64)> = sizes
        .iter()
        .flat_map(|&n| configs.iter().flat_map(move |c| seeds.iter().map(move |&s| (n, c, s))))
        .collect();
    cells
        .into_par_iter()
        .map(|(n, config, seed)| run_factorization(&spd_generate(n, seed), config, &options, Some(seed)))
        .collect()
}

/// Shortest round-trip form; scientific notation for the error column.
fn float_field(x: f64, scientific: bool) -> String {
    if x.is_nan() {
        "NaN".to_owned()
    } else if scientific && x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Writes `reports` as CSV with the [`CSV_HEADER`] columns and LF line endings.
pub fn write_csv<W: Write>(reports: &[FactorReport], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.n.to_string(),
            r.config.to_string(),
            r.leaf.to_string(),
            r.quantize.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.status.to_string(),
            float_field(r.rel_error, true),
            float_field(r.digits, false),
            r.flops.by_level(PrecisionLevel::Half).to_string(),
            r.flops.by_level(PrecisionLevel::Single).to_string(),
            r.flops.by_level(PrecisionLevel::Double).to_string(),
            r.flops.total().to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text table of `reports`.
pub fn render_table(reports: &[FactorReport]) -> String {
    let mut s = format!(
        "{:>6} {:<28} {:>5} {:>5} {:>6} {:<22} {:>10} {:>7} {:>8} {:>10}\n",
        "n", "config", "leaf", "quant", "seed", "status", "rel_error", "digits", "f16 %", "wall_ms"
    );
    for r in reports {
        s.push_str(&format!(
            "{:>6} {:<28} {:>5} {:>5} {:>6} {:<22} {:>10.3e} {:>7.2} {:>7.2}% {:>10.1}\n",
            r.n,
            r.config.to_string(),
            r.leaf,
            if r.quantize { "on" } else { "off" },
            r.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            r.status.as_str(),
            r.rel_error,
            r.digits,
            100.0 * r.flops.level_fraction(PrecisionLevel::Half),
            r.wall_ms,
        ));
    }
    for r in reports {
        if let Some(d) = &r.diagnostic {
            s.push_str(&format!("n={} {}: {d}\n", r.n, r.config));
        }
    }
    s
}
