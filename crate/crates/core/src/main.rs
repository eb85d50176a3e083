use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use tenet::bounds::{DConvention, Ingredients};
use tenet::harness::acceptance;
use tenet::harness::io::{read_matrix, read_vector};
use tenet::harness::{
    run_grouping_experiment, run_theorem1_experiment, write_csv, ExperimentConfig, GroupingConfig,
};
use tenet::model::{standardize, Dataset};
use tenet::registry::{EstimatorRegistry, PenaltyPoint};
use tenet::solver::{fit, PenaltySpec, SolverOptions};
use tenet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tenet",
    version,
    about = "Transfer Elastic Net fits, error bounds and simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    AsStated,
    ProofConsistent,
}

impl From<Convention> for DConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::AsStated => DConvention::AsStated,
            Convention::ProofConsistent => DConvention::ProofConsistent,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit one data set; the first column of the file is the response.
    Fit {
        data: PathBuf,
        /// Source coefficients, one per predictor. Defaults to zeros.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value = "tenet")]
        method: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Weight of the transfer ridge term; overrides the coupled `1 - rho`.
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Center and scale the data before fitting.
        #[arg(long)]
        standardize: bool,
    },
    /// Evaluate an error bound from its scalar ingredients.
    Bounds {
        #[arg(long, default_value = "tenet")]
        method: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0.0)]
        delta_l1: f64,
        #[arg(long)]
        delta_alpha_l2: f64,
        #[arg(long, default_value_t = 0.0)]
        beta_star_l2: f64,
        #[arg(long)]
        phi: f64,
        #[arg(long, value_enum, default_value = "proof-consistent")]
        d_convention: Convention,
        /// With --sigma and --p, also report the success probability.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        p: Option<usize>,
    },
    /// Run a Monte Carlo experiment config and write per-replication records.
    Simulate {
        config: PathBuf,
        /// CSV destination; overrides the config, defaults to stdout.
        #[arg(long)]
        records: Option<PathBuf>,
        /// JSON summary destination; overrides the config, defaults to stderr.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a grouping config and write one row per within-block pair.
    Grouping {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Check {
        /// Criterion numbers to run; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_fit(
    data_path: &Path,
    source: Option<&Path>,
    method: &str,
    point: PenaltyPoint,
    rho2: Option<f64>,
    tol: f64,
    do_standardize: bool,
) -> Result<bool> {
    let m = read_matrix(data_path)?;
    if m.ncols() < 2 {
        return Err(Error::Config(
            "data needs a response column and at least one predictor".into(),
        ));
    }
    let y = m.column(0).into_owned();
    let x = m.columns(1, m.ncols() - 1).into_owned();
    let data = if do_standardize {
        standardize(&y, &x)?.0
    } else {
        Dataset::new(y, x)?
    };
    let tilde = match source {
        Some(p) => read_vector(p)?,
        None => DVector::zeros(data.p()),
    };
    let est = EstimatorRegistry::builtin().get(method)?;
    let pen = match rho2 {
        Some(r2) => PenaltySpec::generalized(point.lambda, point.alpha, point.rho, r2, tilde)?,
        None => est.penalty(point, &tilde)?,
    };
    let res = fit(&data, &pen, &SolverOptions::with_tol(tol))?;
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(res.converged)
}

fn run_simulate(
    config: &Path,
    records: Option<PathBuf>,
    summary: Option<PathBuf>,
    quiet: bool,
) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let out = run_theorem1_experiment(&cfg)?;
    let records = records.or_else(|| cfg.outputs.records.clone());
    write_csv(&out.records, sink(records.as_deref())?)?;
    let json = serde_json::to_string_pretty(&out.summary)?;
    match summary.or_else(|| cfg.outputs.summary.clone()) {
        Some(p) => std::fs::write(p, json + "\n")?,
        None if !quiet => eprintln!("{json}"),
        None => {}
    }
    Ok(out.summary.all_pass)
}

fn run_grouping(config: &Path, out: Option<PathBuf>) -> Result<bool> {
    let cfg = GroupingConfig::load(config)?;
    let res = run_grouping_experiment(&cfg)?;
    let path = out.or_else(|| cfg.outputs.records.clone());
    write_csv(&res.reports(), sink(path.as_deref())?)?;
    eprintln!(
        "{} pairs met the preconditions, {} violations, {} source violations",
        res.pairs_checked, res.violations, res.source_violations
    );
    Ok(res.violations == 0 && res.source_violations == 0 && res.enough_pairs)
}

fn run_check(only: &[usize]) -> Result<bool> {
    let exe = std::env::current_exe().ok();
    let mut all = true;
    let runners: Vec<Box<dyn Fn() -> acceptance::CriterionOutcome>> = vec![
        Box::new(acceptance::prox_correctness),
        Box::new(acceptance::solver_certification),
        Box::new(acceptance::closed_form_check),
        Box::new(acceptance::bound_coverage),
        Box::new(acceptance::cone_membership),
        Box::new(acceptance::augmented_identity),
        Box::new(acceptance::proposition1),
        Box::new(acceptance::proposition2),
        Box::new(acceptance::gre_trend),
        Box::new(acceptance::grouping_theorem),
        Box::new(acceptance::grouping_remark),
        Box::new(acceptance::source_pipeline),
        Box::new(move || acceptance::determinism(exe.as_deref())),
    ];
    for (i, run) in runners.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let o = run();
        println!("{o}");
        all &= o.passed;
    }
    Ok(all)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Cmd::Fit {
            data,
            source,
            method,
            lambda,
            alpha,
            rho,
            rho2,
            tol,
            standardize,
        } => run_fit(
            &data,
            source.as_deref(),
            &method,
            PenaltyPoint { lambda, alpha, rho },
            rho2,
            tol,
            standardize,
        ),
        Cmd::Bounds {
            method,
            lambda,
            alpha,
            rho,
            c,
            s,
            delta_l1,
            delta_alpha_l2,
            beta_star_l2,
            phi,
            d_convention,
            n,
            sigma,
            p,
        } => {
            let est = EstimatorRegistry::builtin().get(&method)?;
            let eff = est.effective(PenaltyPoint { lambda, alpha, rho });
            let ing = Ingredients {
                lambda: eff.lambda,
                alpha: eff.alpha,
                rho: eff.rho,
                c,
                s,
                delta_l1,
                delta_alpha_l2,
                beta_star_l2,
            };
            let mut report = est.bound(&ing, phi, d_convention.into())?;
            if let (Some(n), Some(sigma), Some(p)) = (n, sigma, p) {
                report = report.with_probability(n, sigma, p);
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Cmd::Simulate {
            config,
            records,
            summary,
            quiet,
        } => run_simulate(&config, records, summary, quiet),
        Cmd::Grouping { config, out } => run_grouping(&config, out),
        Cmd::Check { only } => run_check(&only),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
