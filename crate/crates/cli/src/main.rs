//! `treechol` command-line driver.
//!
//! Exit status: 0 on success, 1 for usage and input errors, 2 when a
//! factorization fails numerically.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use treechol::bench::{self, BenchError, Command, OutputFormat, RunSpec};
use treechol::report::{render_table, write_csv, FactorReport, Status};
use treechol::{parse_precision_config, PrecisionConfig};

#[derive(Parser)]
#[command(name = "treechol", version, about = "Nested recursive mixed-precision Cholesky")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Factor one generated matrix and report its accuracy.
    Factor(Common),
    /// Factor every (size, config, seed) combination and emit CSV.
    Sweep(Common),
    /// Print the static flop distribution of a factorization.
    Plan(Common),
    /// Factor a symmetric matrix read from a Matrix Market file.
    Mtx(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Args)]
struct Common {
    /// Matrix order(s), comma separated.
    #[arg(long = "size", visible_alias = "sizes", value_delimiter = ',', default_value = "256")]
    sizes: Vec<usize>,
    /// Precision config(s) such as "[F16, F32]" or "Pure F64"; separate several with ';'.
    #[arg(
        long = "config",
        visible_alias = "configs",
        value_delimiter = ';',
        value_parser = parse_config,
        default_value = "[F16, F32]"
    )]
    configs: Vec<PrecisionConfig>,
    /// Leaf size of the recursion.
    #[arg(long, default_value_t = 64)]
    leaf: usize,
    /// Generator seed(s), comma separated.
    #[arg(long = "seed", visible_alias = "seeds", value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Scale off-diagonal blocks into range before down-conversion (default).
    #[arg(long, overrides_with = "no_quantize")]
    quantize: bool,
    /// Convert off-diagonal blocks without scaling.
    #[arg(long, overrides_with = "quantize")]
    no_quantize: bool,
    /// Matrix Market input for `mtx`.
    #[arg(long)]
    mtx_path: Option<PathBuf>,
    /// Also write the CSV report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn parse_config(text: &str) -> Result<PrecisionConfig, String> {
    parse_precision_config(text.trim()).map_err(|e| e.to_string())
}

impl Common {
    fn into_spec(self, command: Command) -> RunSpec {
        RunSpec {
            command,
            sizes: self.sizes,
            configs: self.configs,
            leaf: self.leaf,
            seeds: self.seeds,
            quantize: !self.no_quantize,
            mtx_path: self.mtx_path,
            output: self.out,
            format: match self.format {
                Format::Csv => OutputFormat::Csv,
                Format::Table => OutputFormat::Table,
            },
        }
    }
}

enum Failure {
    Usage(String),
    Numerical,
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("cannot write output: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(format!("cannot write CSV: {e}"))
    }
}

fn emit(reports: &[FactorReport], spec: &RunSpec) -> Result<(), Failure> {
    let stdout = io::stdout();
    match spec.format {
        OutputFormat::Csv => write_csv(reports, stdout.lock())?,
        OutputFormat::Table => stdout.lock().write_all(render_table(reports).as_bytes())?,
    }
    if let Some(path) = &spec.output {
        let file = File::create(path).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
        write_csv(reports, BufWriter::new(file))?;
    }
    Ok(())
}

fn single(report: FactorReport, spec: &RunSpec) -> Result<(), Failure> {
    emit(std::slice::from_ref(&report), spec)?;
    match report.status {
        Status::Ok => Ok(()),
        _ => {
            if let Some(d) = &report.diagnostic {
                eprintln!("error: {d}");
            }
            Err(Failure::Numerical)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Factor(c) => {
            let spec = c.into_spec(Command::Factor);
            single(bench::run_factor(&spec)?, &spec)
        }
        Cmd::Mtx(c) => {
            let spec = c.into_spec(Command::Mtx);
            single(bench::run_mtx(&spec)?, &spec)
        }
        Cmd::Sweep(c) => {
            let spec = c.into_spec(Command::Sweep);
            emit(&bench::run_sweep(&spec)?, &spec)
        }
        Cmd::Plan(c) => {
            let spec = c.into_spec(Command::Plan);
            let flops = bench::run_plan(&spec)?;
            let mut out = io::stdout().lock();
            match spec.format {
                OutputFormat::Table => {
                    writeln!(out, "n = {}, leaf = {}, config = {}", spec.sizes[0], spec.leaf, spec.configs[0])?;
                    writeln!(out)?;
                    writeln!(out, "{flops}")?;
                    writeln!(out, "off-diagonal share {:.2}%", 100.0 * flops.off_diagonal_fraction())?;
                }
                OutputFormat::Csv => {
                    writeln!(out, "precision,kernel,flops")?;
                    for level in treechol::PrecisionLevel::ALL {
                        for kernel in treechol::Kernel::ALL {
                            writeln!(out, "{},{},{}", level.label(), kernel.name(), flops.cell(level, kernel))?;
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical) => ExitCode::from(2),
    }
}
