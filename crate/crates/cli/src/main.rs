use std::process::ExitCode;

use clap::Parser;
use qnr_cli::{run, RunConfig};

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", config.out.join(f).display());
            }
            if !outcome.passed {
                eprintln!("verification failed; see {}", config.out.join("summary.json").display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("qnr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
