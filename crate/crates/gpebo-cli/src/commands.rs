//! Subcommand implementations behind the CLI surface.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gpebo::filters::{reconstruct_state, RegressionSample};
use gpebo::observer::ObserverError;
use gpebo::plant::grid_steps;
use gpebo::{is_pe, pe_gram};

use crate::config::{ConfigError, OutputKind, ScenarioConfig};
use crate::csv::trace_csv_string;
use crate::plot::{render_plots, PlotError};

/// Everything a CLI invocation can fail with, partitioned by exit code:
/// input problems exit 2, runtime (numerical or I/O) failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Observer(ObserverError),
    Estimator(gpebo::estimator::EstimatorError),
    Plot(PlotError),
    Io {
        path: PathBuf,
        source: io::Error,
    },
    /// `--seed-check` found two runs disagreeing.
    Nondeterministic,
    /// `verify` found an oracle identity out of tolerance.
    Verification {
        what: String,
    },
    /// A flag value is unusable (validation class).
    BadFlag {
        what: String,
    },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Observer(e) => write!(f, "{e}"),
            CliError::Estimator(e) => write!(f, "{e}"),
            CliError::Plot(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Nondeterministic => {
                write!(
                    f,
                    "determinism check failed: two identical runs produced different CSV bytes"
                )
            }
            CliError::Verification { what } => write!(f, "verification failed: {what}"),
            CliError::BadFlag { what } => write!(f, "{what}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// Process exit status: 0 is success, 2 validation, 3 numerical/runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::BadFlag { .. } => 2,
            _ => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ObserverError> for CliError {
    fn from(e: ObserverError) -> Self {
        CliError::Observer(e)
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::Plot(e)
    }
}

pub struct SimulateOpts {
    pub config: PathBuf,
    pub out: PathBuf,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub seed_check: bool,
    pub plots: bool,
}

/// `simulate`: run the scenario, write `trace.csv` (and figures on request).
pub fn simulate(opts: &SimulateOpts) -> Result<(), CliError> {
    let mut scenario = ScenarioConfig::load(&opts.config)?;
    if let Some(h) = opts.h {
        scenario.step = h;
    }
    if let Some(t_end) = opts.t_end {
        scenario.t_end = t_end;
    }
    let run = scenario.to_run()?;
    let n = run.sys.n();

    let trace = run.run()?;
    let csv = trace_csv_string(n, true, &trace);

    if opts.seed_check {
        let again = run.run()?;
        let csv_again = trace_csv_string(n, true, &again);
        if csv != csv_again {
            return Err(CliError::Nondeterministic);
        }
        println!("determinism check passed: rerun produced identical CSV bytes");
    }

    fs::create_dir_all(&opts.out).map_err(|source| CliError::Io {
        path: opts.out.clone(),
        source,
    })?;
    let csv_path = opts.out.join("trace.csv");
    fs::write(&csv_path, &csv).map_err(|source| CliError::Io {
        path: csv_path.clone(),
        source,
    })?;
    println!("wrote {} ({} nodes)", csv_path.display(), trace.len());

    if opts.plots || scenario.wants(OutputKind::Plots) {
        let truth = run.truth.as_ref().expect("simulation mode");
        let figures = render_plots(&trace, truth, &opts.out)?;
        println!(
            "wrote {} figures ({} .. {})",
            figures.len(),
            figures
                .first()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            figures
                .last()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
    }

    let last = trace.last().expect("validated grid has at least one node");
    let theta_true = run.truth.as_ref().expect("simulation mode").theta_true();
    let worst = last
        .theta_hat
        .iter()
        .zip(&theta_true)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!(
        "final parameter estimates at t = {}: max |error| = {worst:.3e}",
        last.t
    );
    Ok(())
}

/// `verify`: re-derive the run and check the two oracle identities at the
/// grid-scaled tolerance `1e-6 * (h / 1e-3)^4`.
pub fn verify(config: &Path) -> Result<(), CliError> {
    let scenario = ScenarioConfig::load(config)?;
    let run = scenario.to_run()?;
    let truth = run.truth.clone().expect("scenario always carries truth");
    let theta_true = truth.theta_true();

    let mut max_residual = 0.0_f64;
    let mut max_reconstruction = 0.0_f64;
    run.run_inspect(|view| {
        let psi_theta: f64 = view.psi.iter().zip(&theta_true).map(|(p, th)| p * th).sum();
        max_residual = max_residual.max((view.z - psi_theta).abs());
        let x = view.x.expect("simulation mode");
        let pinned = reconstruct_state(view.filters, &theta_true);
        for (a, b) in pinned.iter().zip(x) {
            max_reconstruction = max_reconstruction.max((a - b).abs());
        }
    })?;

    let tol = 1e-6 * (run.step / 1e-3).powi(4);
    println!(
        "max regression residual      |z - psi*theta| = {max_residual:.3e} (tolerance {tol:.3e})"
    );
    println!("max reconstruction residual  |xhat - x|      = {max_reconstruction:.3e} (tolerance {tol:.3e})");
    if max_residual > tol {
        return Err(CliError::Verification {
            what: format!("regression residual {max_residual:.3e} exceeds {tol:.3e}"),
        });
    }
    if max_reconstruction > tol {
        return Err(CliError::Verification {
            what: format!("reconstruction residual {max_reconstruction:.3e} exceeds {tol:.3e}"),
        });
    }
    println!("verify: OK");
    Ok(())
}

/// `pe`: excitation certificate over the first window `[0, window]`.
pub fn pe(config: &Path, window: f64, alpha2_min: f64) -> Result<(), CliError> {
    let scenario = ScenarioConfig::load(config)?;
    let run = scenario.to_run()?;
    if !(window > 0.0) || window > run.t_end {
        return Err(CliError::BadFlag {
            what: format!(
                "--window must lie in (0, T]; got {window} with T = {}",
                run.t_end
            ),
        });
    }
    let trace = run.run()?;
    let nodes = grid_steps(window, run.step).ok_or_else(|| CliError::BadFlag {
        what: format!(
            "--window {window} is not a multiple of the grid step {}",
            run.step
        ),
    })?;
    let samples: Vec<RegressionSample> = trace[..=nodes]
        .iter()
        .map(|r| RegressionSample {
            t: r.t,
            z: r.z,
            psi: r.psi.clone(),
        })
        .collect();
    let gram = pe_gram(&samples).map_err(CliError::Estimator)?;
    let cert = is_pe(&gram, alpha2_min).map_err(CliError::Estimator)?;
    println!(
        "excitation over [0, {window}]: alpha2 = {:.6e}, alpha1 = {:.6e}",
        cert.alpha2, cert.alpha1
    );
    println!(
        "persistently excited (alpha2 >= {alpha2_min:e}): {}",
        if cert.excited { "yes" } else { "no" }
    );
    Ok(())
}
