//! `rosl-solve`: runs the reference elliptic inclusion experiments and
//! seeded generic instances, writing residual tables and iterate snapshots.

mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rosl::{
    build_grid, builtin_initial, builtin_rhs, GramSpace, PdiOptions, RhsParams, SetValuedMap, SolveOptions,
};

use config::{Experiment, InitialData, RunArgs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] rosl::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Parser)]
#[command(name = "rosl-solve", version, about = "Damped projection solver for ROSL inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write residuals and iterates to --out.
    Run(RunArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ROSL_SOLVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("ROSL_SOLVE_THREADS must be a non-negative integer, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run_pdi(cfg: &RunConfig) -> Result<(), CliError> {
    let params = RhsParams {
        l_f: cfg.lf,
        radius: cfg.radius,
    };
    let rhs = builtin_rhs(cfg.experiment.name(), params)?;
    let grid = build_grid(cfg.cells, rhs)?;
    let u0 = match &cfg.u0 {
        InitialData::Builtin(name) => builtin_initial(name, &grid)?,
        InitialData::File(path) => DVector::from_vec(output::read_profile(path, grid.nodes())?),
    };
    if cfg.experiment == Experiment::Bsp2 && !cfg.allow_unjustified {
        return Err(CliError::Config(
            "bsp2 has no contraction guarantee; pass --allow-unjustified to run it".into(),
        ));
    }
    let opts = PdiOptions {
        inner_tol: cfg.inner_tol,
        max_steps: cfg.steps,
        tol_residual: cfg.outer_tol,
        record_iterates: true,
        allow_unjustified: cfg.allow_unjustified,
        ..PdiOptions::default()
    };
    match grid.solve_pdi(&u0, &opts) {
        Ok(report) => {
            let rows = output::rows(
                &report.residuals,
                Some(&report.inner_iterations),
                &report.eta,
                &report.dist_set_bounds,
            );
            output::write_outputs(&cfg.out, &rows)?;
            for (n, u) in report.iterates.iter().flatten().enumerate() {
                output::write_profile(&cfg.out, n, grid.nodes(), u.as_slice())?;
            }
            print!("{}", output::residual_table(&report.residuals));
            Ok(())
        }
        Err(rosl::Error::Divergence { step, consecutive, residual, residuals }) => {
            let rows = output::rows(&residuals, None, &[], &[]);
            output::write_outputs(&cfg.out, &rows)?;
            print!("{}", output::residual_table(&residuals));
            Err(rosl::Error::Divergence { step, consecutive, residual, residuals }.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// `F(x) = A x + b + Ball(0, R)` with `A = -Q diag(lambda) Q'`,
/// `lambda` in `[1, 1.8]`, so that `kappa = lambda_max / (2 lambda_min) < 1`.
fn run_generic(cfg: &RunConfig) -> Result<(), CliError> {
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let raw = DMatrix::from_fn(d, d, |_, _| gauss(&mut rng));
    let q = raw.qr().q();
    let spread = Uniform::new_inclusive(1.0, 1.8).expect("valid range");
    let lambda = DVector::from_fn(d, |_, _| spread.sample(&mut rng));
    let a = -(&q * DMatrix::from_diagonal(&lambda) * q.transpose());
    let a = (&a + a.transpose()) * 0.5;
    let b = DVector::from_fn(d, |_, _| gauss(&mut rng));
    let ybar = DVector::from_fn(d, |_, _| 2.0 * gauss(&mut rng));
    let space = GramSpace::euclidean(d);
    let map = SetValuedMap::affine_ball(a, b, cfg.radius.unwrap_or(1.0), space)?;
    let opts = SolveOptions {
        max_iters: cfg.steps,
        tol_residual: cfg.outer_tol,
        record_iterates: true,
        ..SolveOptions::default()
    };
    let report = rosl::solve(&map, &ybar, &DVector::zeros(d), &opts)?;
    let rows = output::rows(&report.residuals, None, &report.eta, &report.dist_set_bounds);
    output::write_outputs(&cfg.out, &rows)?;
    for (n, x) in report.iterates.iter().flatten().enumerate() {
        output::write_vector(&cfg.out, n, x.as_slice())?;
    }
    print!("{}", output::residual_table(&report.residuals));
    Ok(())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = RunConfig::resolve(args)?;
    std::fs::create_dir_all(Path::new(&cfg.out))?;
    match cfg.experiment {
        Experiment::Bsp1 | Experiment::Bsp2 => run_pdi(&cfg),
        Experiment::Generic => run_generic(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run(args) = cli.command;
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Solver(rosl::Error::Divergence { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
