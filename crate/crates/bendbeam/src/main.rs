use std::path::PathBuf;
use std::process::ExitCode;

use bendbeam::{CliError, Command, Options, SweepParam};
use clap::{Args, Parser, Subcommand};

/// Near-field bending beam synthesis for uniform linear arrays.
#[derive(Parser)]
#[command(name = "bendbeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory. Falls back to $BENDBEAM_OUT, then `output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Overrides the scheme list with one of abf, dbf, tangent.
    #[arg(long, short)]
    scheme: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, short)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Design a beamformer and write weights, solver trace and manifest.
    Synthesize(Common),
    /// Render the received-power map over the grid.
    Fieldmap {
        #[command(flatten)]
        common: Common,
        /// Evaluate this beamformer CSV instead of synthesizing one.
        #[arg(long)]
        beamformer: Option<PathBuf>,
    },
    /// Received power along the trajectory samples.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beamformer: Option<PathBuf>,
    },
    /// Run every configured scheme on the same instance.
    Compare(Common),
    /// Repeat `compare`-style metrics over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// beta, N or M.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn options(c: Common) -> Options {
    Options { config: c.config, out: c.out, scheme: c.scheme, jobs: c.jobs }
}

fn dispatch(cmd: Cmd) -> Result<bendbeam::Outcome, CliError> {
    let (command, opts) = match cmd {
        Cmd::Synthesize(c) => (Command::Synthesize, options(c)),
        Cmd::Fieldmap { common, beamformer } => (Command::Fieldmap { beamformer }, options(common)),
        Cmd::Profile { common, beamformer } => (Command::Profile { beamformer }, options(common)),
        Cmd::Compare(c) => (Command::Compare, options(c)),
        Cmd::Sweep { common, param, values } => {
            (Command::Sweep { param: SweepParam::parse(&param)?, values }, options(common))
        }
    };
    bendbeam::run(&command, &opts)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => {
            if !outcome.complete {
                eprintln!("bendbeam: some runs failed; see {}", outcome.out_dir.join("manifest.json").display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("bendbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
