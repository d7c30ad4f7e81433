//! Command-line front end for the `eve-core` simulator.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "eve-sim", version, about = "Evolutionary digital ecosystem simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Threads {
    /// Worker threads for the per-habitat phases; never changes results.
    #[arg(long, env = "EVE_SIM_THREADS", default_value_t = 1,
          value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub threads: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write report.csv, network_final.edges,
    /// analysis.json and config_resolved.toml.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        threads: Threads,
    },
    /// Print clustering, path length and component count of an edge list as JSON.
    Netstats {
        #[arg(long)]
        edges: PathBuf,
        /// Edges lighter than this are dropped first.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        tau: f64,
    },
    /// Run every value of one numeric parameter against several seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key, e.g. `migration.p_mig`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<String>,
        /// Seeds used per value: config seed, seed + 1, ...
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Run a canned multi-seed experiment and write NAME.json with its verdict.
    Recipe {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, seed, threads } => {
            commands::run(&config, &out, seed, threads.threads as usize)
        }
        Command::Netstats { edges, tau } => {
            println!("{}", commands::netstats(&edges, tau)?);
            Ok(())
        }
        Command::Sweep { config, param, values, seeds, out, threads } => {
            let plan = commands::SweepPlan { param, values, seeds };
            let runs = commands::sweep(&config, &plan, &out, threads.threads as usize)?;
            println!("{runs} runs written to {}", out.display());
            Ok(())
        }
        Command::Recipe { name, out } => {
            let v = commands::recipe(&name, &out)?;
            println!("{}: {}", v.recipe, if v.pass { "PASS" } else { "FAIL" });
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eve-sim: {}", e.one_line());
            e.exit_code()
        }
    }
}
