//! Command-line driver: reads a matrix or operator file, runs one engine and
//! writes CSV tables, a JSON summary and optionally an SVG picture.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 the input did not parse,
//! 3 a numerical routine failed.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

pub mod commands;
pub mod input;
pub mod output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Upper bild of a matrix, or of a finite section of an operator.
    Bild,
    /// Essential bild of an operator.
    Essential,
    /// Closure check against the inter-convex hull, with non-closedness probes.
    Lancaster,
    /// S-spectrum as similarity spheres.
    Sspec,
    /// All checks for an operator file.
    Verify,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "qnr", version, about = "Quaternionic numerical ranges at desk scale")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Matrix (`{"n", "entries"}`) or operator (`{"block", "tail", "limit_set", "bound"}`) file.
    pub input_path: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform samples `m` per bild.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    /// Support angles `k`.
    #[arg(long, default_value_t = 360)]
    pub angles: usize,
    /// Section sizes `N`; `bild` and `sspec` use the last one.
    #[arg(long = "section", value_delimiter = ',', default_values_t = [50, 100, 200, 500])]
    pub sections: Vec<usize>,
    /// Depth `p` of the constructive essential sequences.
    #[arg(long, default_value_t = 200)]
    pub depth: usize,
    /// Closure distance tolerance.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[arg(long, default_value = "qnr-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] qnr_core::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Summary skeleton shared by every command.
fn summary(config: &RunConfig, body: Value, passed: bool) -> Value {
    json!({
        "config": config,
        "passed": passed,
        "result": body,
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    if config.sections.is_empty() || config.sections.contains(&0) {
        return Err(CliError::Parse("--section needs positive sizes".into()));
    }
    let input = input::load(&config.input_path)?;
    let mut out = output::OutputDir::create(&config.out)?;
    let (body, passed) = match config.command {
        Command::Bild => commands::bild(config, &input, &mut out)?,
        Command::Essential => commands::essential(config, &input, &mut out)?,
        Command::Lancaster => commands::lancaster(config, &input, &mut out)?,
        Command::Sspec => commands::sspec(config, &input, &mut out)?,
        Command::Verify => commands::verify(config, &input, &mut out)?,
    };
    out.json("summary.json", &summary(config, body, passed))?;
    Ok(Outcome {
        passed,
        files: out.files().to_vec(),
    })
}
