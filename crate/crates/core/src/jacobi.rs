//! Cyclic Jacobi eigensolver for real symmetric matrices.
//!
//! The sweep order is fixed (row-major over the strict upper triangle), so the
//! result is bit-reproducible for a given input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which sweeping stops, relative to `‖M‖_F` (floored at 1).
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-11;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in nondecreasing order with the largest residual `‖Mv − λv‖`.
#[derive(Debug, Clone)]
pub struct SymSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub residual: f64,
}

impl SymSpectrum {
    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.first().unwrap_or(&0.0)
    }

    pub fn max_vector(&self) -> DVector<f64> {
        let n = self.eigenvalues.len();
        self.eigenvectors.column(n - 1).into_owned()
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Full eigendecomposition of a real symmetric matrix.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymSpectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let asym = asymmetry(m);
    if asym > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if n == 0 {
        return Ok(SymSpectrum {
            eigenvalues: vec![],
            eigenvectors: DMatrix::zeros(0, 0),
            residual: 0.0,
        });
    }

    // symmetrize exactly so rotations act on a symmetric array
    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = a.norm();
    let threshold = OFF_DIAGONAL_TOLERANCE * norm.max(1.0);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);

    let mut residual: f64 = 0.0;
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let col = eigenvectors.column(k);
        let r = m * col - col * lambda;
        residual = residual.max(r.norm());
    }
    let tolerance = 1e-9 * (1.0 + norm);
    if residual > tolerance || !residual.is_finite() {
        return Err(Error::EigenResidual {
            residual,
            tolerance,
        });
    }
    Ok(SymSpectrum {
        eigenvalues,
        eigenvectors,
        residual,
    })
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn sym_eig_max(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eig(m)?.max())
}

/// Smallest singular value of a real square matrix, via the symmetric embedding
/// `[[0, A], [Aᵀ, 0]]` whose eigenvalues are `±σ_i`.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, n), (n, n)).copy_from(m);
    big.view_mut((n, 0), (n, n)).copy_from(&m.transpose());
    let spec = sym_eig(&big)?;
    Ok(spec
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(f64::INFINITY, f64::min))
}
