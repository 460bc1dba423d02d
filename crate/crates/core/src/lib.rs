//! Quaternionic numerical ranges at desk scale.
//!
//! Scalars and vectors live in [`quat`], matrices and their representations in
//! [`matrix`]. [`nr`] approximates the upper bild of finite matrices from inside
//! (sampling) and outside (support functions), [`essential`] handles model
//! operators with a diagonal tail, and [`lancaster`] puts the two together.

pub mod error;
pub mod essential;
pub mod geometry;
pub mod jacobi;
pub mod lancaster;
pub mod matrix;
pub mod nr;
pub mod operator;
pub mod quat;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, Point2};
pub use matrix::QMatrix;
pub use operator::DirectSum;
pub use quat::{csim, inner, QVector, Quaternion, SimilaritySphere};
