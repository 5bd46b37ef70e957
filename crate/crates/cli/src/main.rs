//! Experiment harness: stationary tables, evolution errors, scalar profiles
//! and convergence orders, written as CSV.
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use fracsplit::experiment::{
    run_convergence_order, run_evolution, run_scalar_profile, run_stationary_table, CellFailure,
    CsvRow, ExperimentKind, ExperimentSpec, Report, DEFAULT_FINAL_TIME,
};
use fracsplit::rational::{DEFAULT_KAPPA, DEFAULT_MU};
use fracsplit::{GridSpec, Method, ShiftedSolveConfig, TermOrdering};

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    GaussJacobi,
    Simpson,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ExperimentArg {
    StationaryTable,
    Evolution,
    ScalarProfile,
    ConvergenceOrder,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OrderingArg {
    Forward,
    Symmetrized,
}

#[derive(Parser, Debug)]
#[command(version, about = "Fractional-power evolution experiments", long_about = None)]
struct Cli {
    #[arg(long, value_enum, default_value = "stationary_table")]
    experiment: ExperimentArg,
    /// Grid as `N` or `N1xN2` (node counts per axis)
    #[arg(long, default_value = "256")]
    grid: String,
    /// Fractional exponents, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    alpha: Vec<f64>,
    /// Term counts, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200])]
    m: Vec<usize>,
    #[arg(long, value_enum, default_value = "simpson")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Time steps, comma separated (default T/10, T/20, T/40)
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    /// Final time
    #[arg(long = "T", default_value_t = DEFAULT_FINAL_TIME)]
    final_time: f64,
    /// Relative residual tolerance for the shifted solves
    #[arg(long, default_value_t = ShiftedSolveConfig::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, value_enum, default_value = "forward")]
    ordering: OrderingArg,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the rational coefficients (`i,a,b`) for a single alpha and m instead of running
    #[arg(long)]
    emit_coeffs: bool,
}

fn parse_grid(s: &str) -> anyhow::Result<GridSpec> {
    let (n1, n2) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a.trim().parse()?, b.trim().parse()?),
        None => {
            let n = s.trim().parse()?;
            (n, n)
        }
    };
    Ok(GridSpec::new(n1, n2)?)
}

impl Cli {
    fn spec(&self) -> anyhow::Result<ExperimentSpec> {
        let experiment = match self.experiment {
            ExperimentArg::StationaryTable => ExperimentKind::StationaryTable,
            ExperimentArg::Evolution => ExperimentKind::Evolution,
            ExperimentArg::ScalarProfile => ExperimentKind::ScalarProfile,
            ExperimentArg::ConvergenceOrder => ExperimentKind::ConvergenceOrder,
        };
        let method = match self.method {
            MethodArg::GaussJacobi => Method::GaussJacobi { mu: self.mu },
            MethodArg::Simpson => Method::Simpson { kappa: self.kappa },
        };
        let taus = if self.tau.is_empty() {
            [10.0, 20.0, 40.0]
                .iter()
                .map(|d| self.final_time / d)
                .collect()
        } else {
            self.tau.clone()
        };
        // validated here so a bad tolerance is a usage error rather than a failed cell
        ShiftedSolveConfig::with_tolerance(self.tol)?;
        Ok(ExperimentSpec {
            experiment,
            grid: parse_grid(&self.grid).with_context(|| format!("bad --grid '{}'", self.grid))?,
            alphas: self.alpha.clone(),
            ms: self.m.clone(),
            method,
            sigma: self.sigma,
            taus,
            final_time: self.final_time,
            tolerance: self.tol,
            ordering: match self.ordering {
                OrderingArg::Forward => TermOrdering::Forward,
                OrderingArg::Symmetrized => TermOrdering::Symmetrized,
            },
        })
    }
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<R: CsvRow>(report: Report<R>, out: &mut dyn Write) -> anyhow::Result<Vec<CellFailure>> {
    report.write_csv(&mut *out)?;
    Ok(report.failures)
}

fn emit_coeffs(spec: &ExperimentSpec, out: &mut dyn Write) -> anyhow::Result<()> {
    let (&[alpha], &[m]) = (spec.alphas.as_slice(), spec.ms.as_slice()) else {
        bail!("--emit-coeffs needs exactly one --alpha and one --m");
    };
    // the stationary runs approximate A^{-alpha}, the evolution runs A^{alpha - 1}
    let beta = match spec.experiment {
        ExperimentKind::StationaryTable | ExperimentKind::ScalarProfile => alpha,
        ExperimentKind::Evolution | ExperimentKind::ConvergenceOrder => 1.0 - alpha,
    };
    spec.coefficients(beta, m)?.write_csv(out)?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let spec = cli.spec()?;
    let mut out = open_output(cli.out.as_ref())?;
    if cli.emit_coeffs {
        emit_coeffs(&spec, &mut *out)?;
        out.flush()?;
        return Ok(true);
    }
    let failures = match spec.experiment {
        ExperimentKind::StationaryTable => emit(run_stationary_table(&spec), &mut *out)?,
        ExperimentKind::Evolution => emit(run_evolution(&spec), &mut *out)?,
        ExperimentKind::ScalarProfile => emit(run_scalar_profile(&spec), &mut *out)?,
        ExperimentKind::ConvergenceOrder => emit(run_convergence_order(&spec), &mut *out)?,
    };
    out.flush()?;
    for f in &failures {
        eprintln!("cell failed: {f}");
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
