use std::fs;
use std::path::Path;

use qnr_core::essential::ModelOperator;
use qnr_core::{Point2, QMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// An edge of the expected closure whose endpoints are, or are not, attained.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeEdge {
    pub edge: [Point2; 2],
    pub closed: bool,
}

/// Optional fields an operator file may carry next to the operator itself.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Expectations {
    /// Vertices of the expected closure of the upper bild.
    #[serde(default)]
    pub closure_target: Option<Vec<Point2>>,
    #[serde(default)]
    pub probe_edges: Vec<ProbeEdge>,
}

#[derive(Debug, Clone)]
pub enum Input {
    Matrix(QMatrix),
    Operator(ModelOperator, Expectations),
}

impl Input {
    /// Model view of the input; a matrix gets the zero tail.
    pub fn model(&self) -> ModelOperator {
        match self {
            Input::Matrix(m) => ModelOperator::from_matrix(m.clone()),
            Input::Operator(m, _) => m.clone(),
        }
    }

    pub fn expectations(&self) -> Expectations {
        match self {
            Input::Matrix(_) => Expectations::default(),
            Input::Operator(_, e) => e.clone(),
        }
    }
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}: {e}", path.display()))
}

/// Operator files are recognized by their `tail` field; anything else must be a matrix.
pub fn load(path: &Path) -> Result<Input, CliError> {
    let text = fs::read_to_string(path).map_err(|e| parse_error(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    if value.get("tail").is_some() {
        let model: ModelOperator = serde_json::from_value(value.clone()).map_err(|e| parse_error(path, e))?;
        let extra: Expectations = serde_json::from_value(value).map_err(|e| parse_error(path, e))?;
        Ok(Input::Operator(model, extra))
    } else {
        let m: QMatrix = serde_json::from_value(value).map_err(|e| parse_error(path, e))?;
        Ok(Input::Matrix(m))
    }
}
