use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpebo_cli::commands::{pe, simulate, verify, SimulateOpts};

/// Adaptive state observer for nonlinear time-varying SISO systems:
/// simulate scenarios, verify the regression/reconstruction identities,
/// certify excitation.
#[derive(Parser)]
#[command(name = "gpebo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv (plus SVG figures with --plots)
    Simulate {
        /// Scenario file
        config: PathBuf,
        /// Output directory for trace.csv and figures
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the integration step
        #[arg(long)]
        h: Option<f64>,
        /// Override the horizon
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// Run twice and require byte-identical CSV output
        #[arg(long)]
        seed_check: bool,
        /// Also render the transient figures
        #[arg(long)]
        plots: bool,
    },
    /// Check the regression identity z = psi*theta and the pinned
    /// reconstruction against the grid-scaled tolerance
    Verify {
        /// Scenario file
        config: PathBuf,
    },
    /// Excitation certificate: eigenvalue bounds of the windowed Gram
    Pe {
        /// Scenario file
        config: PathBuf,
        /// Window length (seconds), taken from t = 0
        #[arg(long)]
        window: f64,
        /// Threshold on the smallest eigenvalue
        #[arg(long, default_value_t = 1e-6)]
        alpha2_min: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            h,
            t_end,
            seed_check,
            plots,
        } => simulate(&SimulateOpts {
            config,
            out,
            h,
            t_end,
            seed_check,
            plots,
        }),
        Command::Verify { config } => verify(&config),
        Command::Pe {
            config,
            window,
            alpha2_min,
        } => pe(&config, window, alpha2_min),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
