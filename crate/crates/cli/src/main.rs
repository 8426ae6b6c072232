mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

/// Configuration mistakes are usage errors; everything else the library
/// reports is about the data.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<subarticle::Error>() {
        Some(subarticle::Error::Config(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let argv = match config::merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_DATA);
    }
    let settings = commands::Settings {
        threads: cli.threads,
    };
    match commands::run(&cli.command, &settings) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
