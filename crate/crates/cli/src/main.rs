use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maglev_cli::{cmd_compare, cmd_run, cmd_surface, cmd_tune, CliError, RunOptions};

/// Four-actuator magnetic suspension simulator.
#[derive(Parser)]
#[command(name = "maglev", version)]
struct Cli {
    /// Config file; the built-in reference config is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    /// Plant integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory, diagnostics and report.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Disable the PD leveler.
        #[arg(long)]
        no_pd: bool,
    },
    /// Simulate a scenario with and without the PD leveler.
    Compare {
        #[command(flatten)]
        args: RunArgs,
    },
    /// Export a controller's surface (flc1..flc4, sflc1..sflc4).
    Surface {
        id: String,
        #[arg(long, default_value_t = 25)]
        grid: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tune gains by coordinate descent.
    Tune {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn opts(args: &RunArgs, no_pd: bool) -> RunOptions {
    RunOptions { scenario: args.scenario.clone(), no_pd, dt: args.dt, duration: args.duration }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result: Result<bool, CliError> = match &cli.command {
        Command::Run { args, no_pd } => cmd_run(config, &opts(args, *no_pd), &args.out),
        Command::Compare { args } => cmd_compare(config, &opts(args, false), &args.out),
        Command::Surface { id, grid, out } => cmd_surface(config, id, *grid, out).map(|path| {
            println!("{}", path.display());
            true
        }),
        Command::Tune { spec, out } => cmd_tune(config, spec, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(maglev_cli::EXIT_RUN_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
