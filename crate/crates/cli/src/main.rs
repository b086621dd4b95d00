use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use branchsim_cli::commands;
use branchsim_cli::error::CliError;
use branchsim_cli::scenario::Scenario;

/// Single-branch collapse dynamics experiments driven by scenario files.
///
/// Exit codes: 0 success, 2 config error, 3 precondition violation,
/// 4 budget or feasibility exhaustion.
#[derive(Parser)]
#[command(name = "branchsim", version, about)]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Overrides every seed in the scenario (choice rule and net).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the realized dynamics and write the state trace.
    Simulate {
        /// Initial state: "e<k>" or a JSON array of [re, im] pairs.
        #[arg(long, default_value = "e0")]
        x0: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Synthesize and verify one steering window.
    Steer {
        #[arg(long)]
        x0: String,
        /// Target state.
        #[arg(long)]
        target: String,
        /// Steering times "t0,t,t1" (default "0.3333...,0.3333...,0.6666...").
        #[arg(long)]
        window: Option<String>,
        /// Integration steps for the verification.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Minimal-cost chain between two states over the scenario net.
    ChainSearch {
        #[arg(long)]
        x0: String,
        #[arg(long)]
        target: String,
        /// Chain budget epsilon (also the search cost cap).
        #[arg(long)]
        epsilon: f64,
    },
    /// Orbit/limit stages plus per-scale recurrence certificates.
    Recurrence {
        #[arg(long, default_value = "e0")]
        x0: String,
    },
    /// Full pipeline: net, stages, certificates, extracted set, pairwise
    /// costs, probe pairs, and an ODE-verified steered run.
    Reversibility {
        #[arg(long, default_value = "e0")]
        x0: String,
        /// Reversibility scale (default: the scenario's finest scale).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Naive cover-scan at scales 2^-1 .. 2^-k.
    GridDiagnostic {
        #[arg(long, default_value = "e0")]
        x0: String,
        #[arg(long, default_value_t = 6)]
        max_scale_exponent: i32,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .scenario
        .ok_or_else(|| CliError::Config("--scenario <file> is required".into()))?;
    let mut scenario = Scenario::load(&path, cli.seed)?;
    if let Some(out) = cli.out {
        scenario.output_dir = out;
    }
    match cli.command {
        Command::Simulate { x0, steps } => commands::cmd_simulate(&scenario, &x0, steps),
        Command::Steer {
            x0,
            target,
            window,
            steps,
        } => {
            let window = window.map(|w| parse_window(&w)).transpose()?;
            commands::cmd_steer(&scenario, &x0, &target, window, steps)
        }
        Command::ChainSearch {
            x0,
            target,
            epsilon,
        } => commands::cmd_chain_search(&scenario, &x0, &target, epsilon),
        Command::Recurrence { x0 } => commands::cmd_recurrence(&scenario, &x0),
        Command::Reversibility { x0, epsilon } => {
            commands::cmd_reversibility(&scenario, &x0, epsilon)
        }
        Command::GridDiagnostic {
            x0,
            max_scale_exponent,
        } => commands::cmd_grid_diagnostic(&scenario, &x0, max_scale_exponent),
    }
}

fn parse_window(text: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("window must be \"t0,t,t1\": {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "window must have exactly three times, got {}",
            parts.len()
        )));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
