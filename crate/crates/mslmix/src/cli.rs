//! Command-line front end: argument parsing, dispatch, and exit codes.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 fit finished
//! without meeting the stop rule, 4 numerical failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::em::{self, EmConfig, StopRule};
use crate::error::{Error, Result};
use crate::inference;
use crate::io;
use crate::linalg::vech;
use crate::sim;

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NO_CONVERGENCE: i32 = 3;
const EXIT_NUMERICAL: i32 = 4;

/// Environment variable naming the default worker thread count.
pub const THREADS_ENV: &str = "MSLMIX_THREADS";

#[derive(Parser)]
#[command(
    name = "mslmix",
    version,
    about = "Finite mixtures of multivariate skew Laplace distributions",
    after_help = "Set MSLMIX_THREADS to cap the worker thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a mixture to columns of a delimited data file
    Fit(FitArgs),
    /// Draw a labeled sample from mixture parameters
    Simulate(SimulateArgs),
    /// Run a simulate-and-refit replication study
    Simstudy(SimstudyArgs),
    /// Export a density grid from a fit report (2-column fits)
    Contour(ContourArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Data file with a header row
    #[arg(long)]
    data: PathBuf,
    /// Column names to model, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Number of mixture components
    #[arg(long)]
    g: usize,
    /// Convergence tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap per restart
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Independent initializations; the best final log-likelihood wins
    #[arg(long, default_value_t = 40)]
    restarts: usize,
    /// Master seed for initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence test: param-norm, abs-loglik, or rel-loglik
    #[arg(long, default_value = "rel-loglik")]
    stop_rule: StopRule,
    /// Compute standard errors (default)
    #[arg(long, overrides_with = "no_se")]
    se: bool,
    /// Skip standard errors
    #[arg(long)]
    no_se: bool,
    /// Report output path
    #[arg(long)]
    out: PathBuf,
}

impl FitArgs {
    fn want_se(&self) -> bool {
        self.se || !self.no_se
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Parameter file, or a fit report whose parameters are used
    #[arg(long)]
    params: PathBuf,
    /// Rows to draw
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimstudyArgs {
    /// Study configuration file
    #[arg(long)]
    config: PathBuf,
    /// Summary table output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ContourArgs {
    /// Fit report to evaluate
    #[arg(long)]
    report: PathBuf,
    /// Lattice points per axis
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// Bounding-box expansion per side, as a fraction of each axis range
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    /// Grid output path
    #[arg(long)]
    out: PathBuf,
}

/// Parses std::env args, runs the chosen command, and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Simstudy(args) => cmd_simstudy(&args),
        Command::Contour(args) => cmd_contour(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Data(_) | Error::Io { .. } => EXIT_DATA,
        Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn init_thread_pool() {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n >= 1 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring {THREADS_ENV}={raw:?} (want a positive integer)"),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let config = EmConfig {
        g: args.g,
        tol: args.tol,
        max_iter: args.max_iter,
        stop_rule: args.stop_rule,
        restarts: args.restarts,
        seed: args.seed,
        ..EmConfig::new(args.g)
    };
    config.validate()?;
    let dataset = io::read_dataset(&args.data, &args.columns)?;
    let mut fit = em::fit(&dataset.data, &config)?;

    let mut se_error = None;
    let se = if !args.want_se() {
        None
    } else if !fit.converged {
        eprintln!("warning: not converged; standard errors skipped");
        None
    } else {
        let info = inference::empirical_info(&dataset.data, &fit.theta);
        match inference::standard_errors(&info) {
            Ok(se) => Some(io::se_block(se.values, se.rcond, config.g, dataset.data.dim())),
            Err(e) => {
                se_error = Some(e);
                None
            }
        }
    };
    fit.se = se.as_ref().map(|block| block.values.clone());

    let report = io::FitReport::new(&dataset, &config, &fit, se);
    io::write_report(&args.out, &report)?;
    print_fit_summary(&report);
    println!("report: {}", args.out.display());

    if let Some(e) = se_error {
        eprintln!("warning: {e}");
        eprintln!("warning: report written without standard errors");
        return Ok(EXIT_NUMERICAL);
    }
    if !fit.converged {
        eprintln!(
            "warning: stopped after {} iterations without meeting the stop rule",
            fit.iterations
        );
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(0)
}

fn print_fit_summary(report: &io::FitReport) {
    let g = report.params.weights.len();
    println!(
        "fitted {g}-component mixture on {} rows of {} ({})",
        report.n,
        report.source,
        report.columns.join(", ")
    );
    println!(
        "{} in {} iterations, restart {}",
        if report.converged {
            "converged"
        } else {
            "stopped unconverged"
        },
        report.iterations,
        report.restart_index
    );
    println!(
        "log-likelihood {:.4}   AIC {:.4}   BIC {:.4}",
        report.loglik, report.aic, report.bic
    );
    for (i, comp) in report.params.components.iter().enumerate() {
        println!(
            "component {}: weight {:.4}",
            i + 1,
            report.params.weights[i]
        );
        println!("  mu     {}", fmt_vec(&comp.mu));
        for (r, row) in comp.sigma.iter().enumerate() {
            println!("  {}  {}", if r == 0 { "sigma" } else { "     " }, fmt_vec(row));
        }
        println!("  gamma  {}", fmt_vec(&comp.gamma));
    }
    if let Some(se) = &report.se {
        println!("standard errors (rcond {:.2e}):", se.rcond);
        let estimates = packed_estimates(report);
        for (name, (est, s)) in se.names.iter().zip(estimates.iter().zip(&se.values)) {
            println!("  {name:<14} {est:>10.4}  se {s:.4}");
        }
    }
}

fn fmt_vec(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:>10.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Estimates in the documented packed order (weights, then all locations,
/// then all scale lower triangles, then all skewnesses), matching the SE
/// names.
fn packed_estimates(report: &io::FitReport) -> Vec<f64> {
    let g = report.params.weights.len();
    let mut out: Vec<f64> = report.params.weights[..g - 1].to_vec();
    for comp in &report.params.components {
        out.extend_from_slice(&comp.mu);
    }
    for comp in &report.params.components {
        let p = comp.mu.len();
        let m = nalgebra::DMatrix::from_fn(p, p, |r, c| comp.sigma[r][c]);
        out.extend(vech(&m).iter());
    }
    for comp in &report.params.components {
        out.extend_from_slice(&comp.gamma);
    }
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    if args.n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let theta = io::read_params(&args.params)?;
    let (data, labels) = sim::simulate_mixture(&theta, args.n, args.seed);
    let names: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    io::write_data_csv(&args.out, &data, &names, Some(&labels))?;
    let mut counts = vec![0usize; theta.g()];
    for &l in &labels {
        counts[l] += 1;
    }
    let shares: Vec<String> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| format!("label {}: {c}", i + 1))
        .collect();
    println!(
        "wrote {} rows ({} columns + label) to {}",
        args.n,
        data.dim(),
        args.out.display()
    );
    println!("{}", shares.join(", "));
    Ok(0)
}

fn cmd_simstudy(args: &SimstudyArgs) -> Result<i32> {
    let config = io::read_study_config(&args.config)?;
    let summary = sim::run_study(&config)?;
    io::write_study_summary_csv(&args.out, &summary)?;
    for size in &summary.sizes {
        println!(
            "n={}: {}/{} replicates usable ({} failed)",
            size.n,
            size.replicates_ok,
            size.replicates_ok + size.failures,
            size.failures
        );
    }
    println!("summary: {}", args.out.display());
    Ok(0)
}

fn cmd_contour(args: &ContourArgs) -> Result<i32> {
    let report = io::read_report(&args.report)?;
    let theta = report.params.to_mixture()?;
    let rows = io::contour_rows(
        &theta,
        &report.data_min,
        &report.data_max,
        args.grid,
        args.margin,
    )?;
    io::write_contour_csv(&args.out, &rows)?;
    println!(
        "wrote {}x{} density grid to {}",
        args.grid,
        args.grid,
        args.out.display()
    );
    Ok(0)
}
