mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use catmod_core::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Specification => 2,
        ErrorKind::Data => 3,
        ErrorKind::Identification => 4,
        ErrorKind::Numerical => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(out) => {
            for note in &out.notes {
                eprintln!("note: {note}");
            }
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.stdout.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
