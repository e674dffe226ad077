use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Bsp1,
    Bsp2,
    Generic,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bsp1 => "bsp1",
            Experiment::Bsp2 => "bsp2",
            Experiment::Generic => "generic",
        }
    }
}

/// Flags of `rosl-solve run`. Every field is optional so that a config
/// file can supply it; flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Experiment to run.
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Number of grid cells (at least 4).
    #[arg(long = "N", allow_negative_numbers = true)]
    pub n: Option<i64>,
    /// One-sided Lipschitz constant of the right-hand side.
    #[arg(long, allow_negative_numbers = true)]
    pub lf: Option<f64>,
    /// Radius of the disc perturbation.
    #[arg(long = "R", allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Number of outer steps.
    #[arg(long, allow_negative_numbers = true)]
    pub steps: Option<i64>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    /// Seed for the generic instance.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with any of the above (keys as the flags, `-` -> `_`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run bsp2-type problems, where contraction is not guaranteed.
    #[arg(long)]
    pub allow_unjustified: bool,
    /// Initial data: `bsp1`, `bsp2`, or a CSV file with columns x,u1,u2.
    #[arg(long)]
    pub u0: Option<String>,
    /// Dimension of the generic instance (1 to 64).
    #[arg(long)]
    pub dim: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<Experiment>,
    #[serde(rename = "N")]
    n: Option<i64>,
    lf: Option<f64>,
    #[serde(rename = "R")]
    r: Option<f64>,
    steps: Option<i64>,
    inner_tol: Option<f64>,
    outer_tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    allow_unjustified: Option<bool>,
    u0: Option<String>,
    dim: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Builtin(String),
    File(PathBuf),
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub cells: usize,
    pub lf: Option<f64>,
    pub radius: Option<f64>,
    pub steps: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub allow_unjustified: bool,
    pub u0: InitialData,
    pub dim: usize,
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

impl RunConfig {
    pub fn resolve(args: RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let experiment = args.experiment.or(file.experiment).unwrap_or(Experiment::Bsp1);
        let n = args.n.or(file.n).unwrap_or(1024);
        if n < 4 {
            return Err(CliError::Config("N must be ≥ 4".into()));
        }
        let steps = args.steps.or(file.steps).unwrap_or(8);
        if steps < 0 {
            return Err(CliError::Config("steps must be ≥ 0".into()));
        }
        let positive = |name: &str, v: f64| -> Result<f64, CliError> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Config(format!("{name} must be > 0")))
            }
        };
        let inner_tol = positive("inner-tol", args.inner_tol.or(file.inner_tol).unwrap_or(1e-9))?;
        let default_outer = if experiment == Experiment::Generic { 1e-10 } else { 1e-6 };
        let outer_tol = positive("outer-tol", args.outer_tol.or(file.outer_tol).unwrap_or(default_outer))?;
        let radius = args.r.or(file.r);
        if let Some(r) = radius {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(CliError::Config("R must be ≥ 0".into()));
            }
        }
        let lf = args.lf.or(file.lf);
        if lf.is_some_and(|v| !v.is_finite()) {
            return Err(CliError::Config("lf must be finite".into()));
        }
        let dim = args.dim.or(file.dim).unwrap_or(3);
        if !(1..=64).contains(&dim) {
            return Err(CliError::Config("dim must be between 1 and 64".into()));
        }
        let u0 = match args.u0.or(file.u0) {
            None => InitialData::Builtin(experiment.name().to_string()),
            Some(s) if s == "bsp1" || s == "bsp2" => InitialData::Builtin(s),
            Some(s) => InitialData::File(PathBuf::from(s)),
        };
        Ok(Self {
            experiment,
            cells: n as usize,
            lf,
            radius,
            steps: steps as usize,
            inner_tol,
            outer_tol,
            seed: args.seed.or(file.seed).unwrap_or(0),
            out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            allow_unjustified: args.allow_unjustified || file.allow_unjustified.unwrap_or(false),
            u0,
            dim: dim as usize,
        })
    }
}
