use thiserror::Error;

use crate::geometry::Point2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("angle {0} outside [0, pi]")]
    AngleOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outer polygon degenerated to the empty set")]
    DegeneratePolygon,

    #[error("no real point of the numerical range found (smallest |Im| reached {best_imag:e})")]
    NoRealPoint { best_imag: f64 },

    #[error("limit set is empty; the essential numerical range is never empty")]
    EmptyLimitSet,

    #[error("declared limit point ({}, {}) is not approached by the first {checked} tail symbols (closest {distance:e})", .point.x, .point.y)]
    UndeclaredLimit {
        point: Point2,
        checked: usize,
        distance: f64,
    },

    #[error("tail symbol {index} has norm {norm} above the declared bound {bound}")]
    BoundViolated { index: usize, norm: f64, bound: f64 },

    #[error("no essential subsequence approaches {target} within {tolerance:e} among the first {checked} tail symbols")]
    MissingEssentialSequence {
        target: crate::quat::Quaternion,
        tolerance: f64,
        checked: usize,
    },

    #[error("quasi-orthogonal partner not found for index {index}; best bounds {best:?} above {epsilon:e}")]
    QuasiOrthExhausted {
        index: usize,
        epsilon: f64,
        best: [f64; 3],
    },

    #[error("empty polygon")]
    EmptyPolygon,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
