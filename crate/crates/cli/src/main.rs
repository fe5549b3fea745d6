mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use swab_core::Error;

use args::{Cli, Command};

const EXIT_VALIDATION: u8 = 1;
const EXIT_MISSING: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::MissingAssets(_)) => EXIT_MISSING,
        Some(
            Error::SinkhornNotConverged { .. }
            | Error::PivotLimit(_)
            | Error::NoRelevantSourceClasses { .. }
            | Error::RankDeficient
            | Error::MarginalMismatch { .. },
        ) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("SWAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring SWAB_THREADS={v:?}, expected a positive integer"),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Validate { path } => Ok(commands::validate(&path)?.ok),
        Command::Rank { target, sources, out, config } => {
            let cfg = config.resolve()?;
            commands::echo_config(&cfg)?;
            commands::rank(&target, &sources, out.as_deref(), &cfg)?;
            Ok(true)
        }
        Command::Bench { universe, out, config } => {
            let cfg = config.resolve()?;
            commands::echo_config(&cfg)?;
            commands::bench(&universe, &out, &cfg)?;
            Ok(true)
        }
        Command::Synth { out, seed, synth_config, heterogeneous, csv } => {
            commands::synth(&out, seed, synth_config.as_deref(), heterogeneous, csv)?;
            Ok(true)
        }
        Command::Ot { source, target, partial, out, config } => {
            let cfg = config.resolve()?;
            commands::echo_config(&cfg)?;
            commands::ot(&source, &target, partial, out.as_deref(), &cfg)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
