//! Block-diagonal quaternionic operators: dense blocks followed by a diagonal.
//!
//! Finite sections of model operators have this shape, and a dense matrix is
//! the special case of one block and an empty diagonal. Keeping the structure
//! makes matrix-vector products and support computations linear in the
//! diagonal length.

use serde::{Deserialize, Serialize};

use crate::matrix::QMatrix;
use crate::quat::{inner_unchecked, QVector, Quaternion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectSum {
    blocks: Vec<QMatrix>,
    diagonal: Vec<Quaternion>,
}

impl From<QMatrix> for DirectSum {
    fn from(m: QMatrix) -> Self {
        Self::new(vec![m], vec![])
    }
}

impl From<&QMatrix> for DirectSum {
    fn from(m: &QMatrix) -> Self {
        Self::from(m.clone())
    }
}

impl DirectSum {
    pub fn new(blocks: Vec<QMatrix>, diagonal: Vec<Quaternion>) -> Self {
        let blocks = blocks.into_iter().filter(|b| b.n() > 0).collect();
        Self { blocks, diagonal }
    }

    pub fn blocks(&self) -> &[QMatrix] {
        &self.blocks
    }

    pub fn diagonal(&self) -> &[Quaternion] {
        &self.diagonal
    }

    /// Offset of the diagonal part.
    pub fn block_dim(&self) -> usize {
        self.blocks.iter().map(QMatrix::n).sum()
    }

    pub fn dim(&self) -> usize {
        self.block_dim() + self.diagonal.len()
    }

    /// Upper bound on the operator norm: the largest block Frobenius norm or diagonal modulus.
    pub fn norm_bound(&self) -> f64 {
        let b = self
            .blocks
            .iter()
            .map(QMatrix::frobenius_norm)
            .fold(0.0, f64::max);
        self.diagonal.iter().map(|q| q.norm()).fold(b, f64::max)
    }

    pub fn to_dense(&self) -> QMatrix {
        let n = self.dim();
        let mut m = QMatrix::zeros(n);
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.n() {
                for j in 0..b.n() {
                    m[(off + i, off + j)] = b[(i, j)];
                }
            }
            off += b.n();
        }
        for (k, &d) in self.diagonal.iter().enumerate() {
            m[(off + k, off + k)] = d;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(QMatrix::adjoint).collect(),
            diagonal: self.diagonal.iter().map(|q| q.conj()).collect(),
        }
    }

    /// `a·T + b·I` for real `a`, `b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let shift = Quaternion::real(b);
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|m| m.scale(a).add(&QMatrix::scalar(m.n(), shift)))
                .collect(),
            diagonal: self.diagonal.iter().map(|&q| q * a + shift).collect(),
        }
    }

    /// `T x` into `out`.
    pub fn apply_into(&self, x: &[Quaternion], out: &mut [Quaternion]) {
        let mut off = 0;
        for b in &self.blocks {
            let n = b.n();
            b.apply_into(&x[off..off + n], &mut out[off..off + n]);
            off += n;
        }
        for (k, &d) in self.diagonal.iter().enumerate() {
            out[off + k] = d * x[off + k];
        }
    }

    /// `T* x` into `out`.
    pub fn apply_adjoint_into(&self, x: &[Quaternion], out: &mut [Quaternion]) {
        let mut off = 0;
        for b in &self.blocks {
            let n = b.n();
            b.apply_adjoint_into(&x[off..off + n], &mut out[off..off + n]);
            off += n;
        }
        for (k, &d) in self.diagonal.iter().enumerate() {
            out[off + k] = d.conj() * x[off + k];
        }
    }

    /// `⟨Tx, x⟩` without allocating.
    pub fn form_slice(&self, x: &[Quaternion]) -> Quaternion {
        let mut acc = Quaternion::ZERO;
        let mut off = 0;
        let mut buf = Vec::new();
        for b in &self.blocks {
            let n = b.n();
            buf.resize(n, Quaternion::ZERO);
            b.apply_into(&x[off..off + n], &mut buf);
            acc += inner_unchecked(&buf, &x[off..off + n]);
            off += n;
        }
        for (k, &d) in self.diagonal.iter().enumerate() {
            let xk = x[off + k];
            acc += xk.conj() * d * xk;
        }
        acc
    }

    pub fn form(&self, x: &QVector) -> Quaternion {
        assert_eq!(x.len(), self.dim(), "vector dimension mismatch");
        self.form_slice(x.entries())
    }
}
