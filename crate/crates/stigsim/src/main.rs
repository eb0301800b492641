use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use stigsim::io::seed_override_from_env;
use stigsim::{cmd_compare, cmd_gen_config, cmd_run, cmd_verify, Divergence, Verdict};

/// Deterministic simulator for agent coordination over a shared ledger.
///
/// Set STIGSIM_SEED_OVERRIDE to replace the seed of any config.
#[derive(Parser)]
#[command(name = "stigsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics.csv, summary.json and digest.txt.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Run every style of a scenario and write a ranked compare.csv.
    Compare {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a scenario and check it against a stored digest.txt.
    Verify { config: PathBuf, digest: PathBuf },
    /// Write the default config of a built-in template.
    GenConfig {
        template: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let seed = seed_override_from_env()?;
    match cli.command {
        Command::Run { config, out, trace } => {
            for p in cmd_run(&config, &out, trace, seed)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Compare { config, out } => {
            let files = cmd_compare(&config, &out, seed)?;
            let table = std::fs::read_to_string(out.join("compare.csv"))
                .context("reading compare.csv back")?;
            print!("{table}");
            for p in files {
                println!("wrote {}", p.display());
            }
        }
        Command::Verify { config, digest } => match cmd_verify(&config, &digest, seed)? {
            Verdict::Match => println!("PASS {}", config.display()),
            Verdict::Mismatch(Divergence::Block { style, height }) => {
                if height == 0 {
                    eprintln!("FAIL: {style} header differs (height 0, config or genesis changed)");
                } else {
                    eprintln!("FAIL: first divergent block at height {height} ({style})");
                }
                return Ok(false);
            }
            Verdict::Mismatch(Divergence::Trace) => {
                eprintln!("FAIL: headers and blocks match but a reorg entry differs");
                return Ok(false);
            }
        },
        Command::GenConfig { template, out } => {
            cmd_gen_config(&template, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
