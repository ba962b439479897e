use std::path::PathBuf;
use std::process::ExitCode;

use airdroplab_cli::{parse_scenario, run, RunStatus};
use clap::Parser;

/// Solve, simulate and analyse two-chain airdrop markets described by a
/// scenario file.
#[derive(Debug, Parser)]
#[command(name = "airdroplab", version)]
struct Args {
    /// Scenario file (TOML, or JSON as emitted in summary.json).
    scenario: PathBuf,
    /// Where to write results.csv and summary.json. Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override every seed in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

const EXIT_ERROR: u8 = 1;
const EXIT_FLAGGED: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();
    let mut scenario = match parse_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    if let Some(seed) = args.seed {
        scenario.set_seed(seed);
    }
    let out_dir = args
        .output_dir
        .clone()
        .or_else(|| scenario.output_dir.as_ref().map(|p| scenario.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("airdroplab-out"));

    match run(&scenario, &out_dir) {
        Ok(report) => {
            if !args.quiet {
                println!("{}: {}", report.command.name(), report.headline);
                if !report.flags.is_empty() {
                    println!("flags: {}", report.flags.join(", "));
                }
                println!("wrote {}", out_dir.display());
            }
            match report.status {
                RunStatus::Ok => ExitCode::SUCCESS,
                RunStatus::Flagged => {
                    if args.quiet {
                        eprintln!("flagged: {}", report.flags.join(", "));
                    }
                    ExitCode::from(EXIT_FLAGGED)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
