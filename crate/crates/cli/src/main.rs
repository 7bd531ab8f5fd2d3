mod args;
mod commands;
mod error;
mod io;
mod manifest;
mod table;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::{EXIT_TRUE, EXIT_USAGE};
use manifest::RunManifest;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_TRUE,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code);
        }
    };
    let mut manifest = RunManifest::new(cli.command.name());
    let started = Instant::now();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, &mut manifest),
        Command::Reduce(a) => commands::reduce_cmd(a, &mut manifest),
        Command::Verify(a) => commands::verify(a, &mut manifest),
        Command::SolveQvi(a) => commands::solve_qvi_cmd(a, &mut manifest),
        Command::Roundtrip(a) => commands::roundtrip(a, &mut manifest),
        Command::ProbeLipschitz(a) => commands::probe_lipschitz(a, &mut manifest),
    };
    manifest.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    manifest.exit_code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    let text = io::to_json(&manifest);
    match &cli.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None => eprint!("{text}"),
    }
    ExitCode::from(manifest.exit_code)
}
