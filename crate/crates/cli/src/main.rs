//! `gaussgeo`: geodesics, midpoints and Lax flows on the Gaussian manifold.
//!
//! JSON in, JSON or CSV out. Exit codes: 0 success, 1 a check failed,
//! 2 bad input, 3 numerical failure. Set `GAUSSGEO_LOG` to `error`, `info`
//! or `debug` for diagnostics on stderr.

mod commands;
mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaussgeo::{LaxRhs, MetricConvention};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "gaussgeo", version, about = "Fisher-Rao geometry of multivariate normals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Sample the geodesic from a tangent; trajectory CSV.
    Shoot {
        /// End of the uniform grid `[0, t_end]` when the input has no `t_grid`.
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
    },
    /// Initial tangent of the geodesic from `p` to `q`.
    Log,
    /// Geodesic distance between `p` and `q`.
    Dist,
    /// Geodesic midpoint of `p` and `q` by AHM in the lifted space.
    Midpoint,
    /// `2^depth + 1` equally spaced points on the geodesic from `p` to `q`.
    Interp {
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Integrate the Lax system from `(A0, a0)`; CSV of `(t, Q, r)`.
    Lax {
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = LaxRhs::V1)]
        #[serde(serialize_with = "as_string")]
        rhs: LaxRhs,
    },
    /// Run the invariant checks along the geodesic and the Lax flow.
    Verify {
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Inject a fault of this size into the sampled curves.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
    },
    /// Compare the Gauss-Hermite Fisher information with the closed-form metric.
    FisherCheck {
        #[arg(long, default_value_t = gaussgeo::manifold::DEFAULT_NODES)]
        nodes: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Shoot { .. } => "shoot",
            Command::Log => "log",
            Command::Dist => "dist",
            Command::Midpoint => "midpoint",
            Command::Interp { .. } => "interp",
            Command::Lax { .. } => "lax",
            Command::Verify { .. } => "verify",
            Command::FisherCheck { .. } => "fisher-check",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct RunConfig {
    /// JSON input file, `-` for stdin. Optional for `verify` (with --seed)
    /// and `fisher-check`.
    #[arg(long, global = true)]
    #[serde(skip)]
    input: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    output: Option<PathBuf>,
    /// Convergence tolerance for shooting and AHM.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    /// Newton iterations for geodesic shooting.
    #[arg(long, global = true, default_value_t = 100)]
    max_iter: usize,
    /// AHM iterations.
    #[arg(long, global = true, default_value_t = 60)]
    ahm_max_iter: usize,
    /// `paper` (default) or `fisher`, which is one quarter of it.
    #[arg(long, global = true, default_value_t = MetricConvention::Paper)]
    #[serde(serialize_with = "as_string")]
    metric: MetricConvention,
    /// Step for the Lax integrator and the verify grid.
    #[arg(long, global = true, default_value_t = 1e-3)]
    dt: f64,
    /// Intervals of the uniform `shoot` grid.
    #[arg(long, global = true, default_value_t = 100)]
    steps: usize,
    /// Draw a random input instead of reading one (verify, fisher-check).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dimension for generated inputs.
    #[arg(long, global = true, default_value_t = 2)]
    dim: usize,
}

fn as_string<T: std::fmt::Display, S: serde::Serializer>(m: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(m)
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let positive = [("tol", self.tol), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("--{name} must be positive")));
            }
        }
        for (name, v) in [
            ("max-iter", self.max_iter),
            ("ahm-max-iter", self.ahm_max_iter),
            ("steps", self.steps),
            ("dim", self.dim),
        ] {
            if v == 0 {
                return Err(CliError::Input(format!("--{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<gaussgeo::Error> for CliError {
    fn from(e: gaussgeo::Error) -> Self {
        use gaussgeo::Error as E;
        match e {
            E::DimensionMismatch { .. }
            | E::NotSquare { .. }
            | E::NotSymmetric { .. }
            | E::NotOnManifold { .. }
            | E::NotOddOrder { .. }
            | E::UnsupportedDimension { .. }
            | E::GridTooCoarse { .. }
            | E::InvalidParameter(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub enum Output {
    Csv(String),
    Json(report::Report),
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("writing stdout: {e}")))
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    cli.config.validate()?;
    let out = commands::dispatch(&cli.command, &cli.config)?;
    let (text, pass) = match out {
        Output::Csv(s) => (s, true),
        Output::Json(r) => {
            let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
            s.push('\n');
            (s, r.all_pass())
        }
    };
    emit(&text, cli.config.output.as_ref())?;
    Ok(pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAUSSGEO_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    log::info!("command {}", cli.command.name());
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("gaussgeo: {e}");
            ExitCode::from(e.code())
        }
    }
}
