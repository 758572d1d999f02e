mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "carbamm",
    version,
    about = "Carbon and ammonia market equilibrium of a renewable power-to-ammonia chain"
)]
struct Cli {
    /// Worker threads for weekly solves and sweep points (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MechanismArg {
    M1,
    M2,
    M3,
    Pcim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepParam {
    FixedCarbonPrice,
    CarbonCap,
    RaCapacityMult,
    GaCount,
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; the bundled default when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario's weather seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the equilibrium under one carbon mechanism.
    Solve {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        /// Allowance price for m3, CNY/t.
        #[arg(long)]
        fixed_price: Option<f64>,
    },
    /// Solve once per grid point of a parameter.
    Sweep {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// `START:END:STEP`, end inclusive.
        #[arg(long)]
        range: String,
    },
    /// Split the chain's carbon revenue among its members.
    Allocate {
        #[command(flatten)]
        common: ScenarioArgs,
        /// `pcam`, `cam2` or `cam1:rg|hp|ra`.
        #[arg(long)]
        cam: String,
    },
    /// Pin the traded allowance volume and tabulate revenues.
    PerturbIr {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Volumes in t, as `a,b,c` or `START:END:STEP`.
        #[arg(long)]
        volumes: String,
    },
    /// Print the bundled default scenario.
    DefaultScenario,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => commands::EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(commands::EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let command_line = canonical_command(std::env::args().skip(1));
    let outcome = match cli.command {
        Command::Solve {
            common,
            mechanism,
            fixed_price,
        } => commands::solve(&common, mechanism, fixed_price, &command_line),
        Command::Sweep {
            common,
            param,
            range,
        } => commands::sweep(&common, param, &range, &command_line),
        Command::Allocate { common, cam } => commands::allocate(&common, &cam, &command_line),
        Command::PerturbIr { common, volumes } => {
            commands::perturb(&common, &volumes, &command_line)
        }
        Command::DefaultScenario => {
            print!("{}", carbamm::scenario::Scenario::bundled_default_json());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

/// The command line without options that leave results unchanged, so the
/// run id is the same wherever the outputs go.
fn canonical_command(args: impl Iterator<Item = String>) -> String {
    const IGNORED: [&str; 2] = ["--out", "--jobs"];
    let mut kept = Vec::new();
    let mut skip_value = false;
    for arg in args {
        if std::mem::take(&mut skip_value) {
            continue;
        }
        if IGNORED.contains(&arg.as_str()) {
            skip_value = true;
        } else if !IGNORED.iter().any(|o| arg.starts_with(&format!("{o}="))) {
            kept.push(arg);
        }
    }
    kept.join(" ")
}

#[cfg(test)]
mod tests {
    use super::canonical_command;

    #[test]
    fn output_location_does_not_enter_the_command() {
        let args = [
            "--jobs",
            "4",
            "solve",
            "--out",
            "a",
            "--mechanism",
            "pcim",
            "--out=b",
        ];
        assert_eq!(
            canonical_command(args.iter().map(|s| s.to_string())),
            "solve --mechanism pcim"
        );
    }
}
