//! Dense quaternionic matrices and their real and complex representations.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{inner_unchecked, QVector, Quaternion};

/// Dense `n × n` quaternionic matrix, row-major.
///
/// File form: `{"n": 2, "entries": [[[w,x,y,z], ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct QMatrix {
    n: usize,
    data: Vec<Quaternion>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    entries: Vec<Vec<Quaternion>>,
}

impl TryFrom<MatrixFile> for QMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<Self> {
        QMatrix::from_rows(f.n, f.entries)
    }
}

impl From<QMatrix> for MatrixFile {
    fn from(m: QMatrix) -> Self {
        MatrixFile {
            n: m.n,
            entries: (0..m.n).map(|i| m.row(i).to_vec()).collect(),
        }
    }
}

impl QMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Quaternion::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, Quaternion::ONE)
    }

    /// `q·I`.
    pub fn scalar(n: usize, q: Quaternion) -> Self {
        Self::diag(&vec![q; n])
    }

    pub fn diag(d: &[Quaternion]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &q) in d.iter().enumerate() {
            m[(i, i)] = q;
        }
        m
    }

    pub fn from_rows(n: usize, rows: Vec<Vec<Quaternion>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::Parse(format!("expected {n} rows, found {}", rows.len())));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|q| !q.is_finite()) {
            return Err(Error::Parse("non-finite matrix entry".into()));
        }
        Ok(Self { n, data })
    }

    /// Entries with independent standard normal coordinates.
    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            n,
            data: (0..n * n).map(|_| Quaternion::random_gaussian(rng)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[Quaternion] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    /// `(T + T*)/2`.
    pub fn hermitian_part(&self) -> Self {
        self.add(&self.adjoint()).scale(0.5)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matrix dimension mismatch");
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matrix dimension mismatch");
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&q| q * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matrix dimension mismatch");
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Quaternion::ZERO {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * other[(k, j)];
                }
            }
        }
        m
    }

    /// `T x` written into `out`.
    pub fn apply_into(&self, x: &[Quaternion], out: &mut [Quaternion]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row
                .iter()
                .zip(x)
                .fold(Quaternion::ZERO, |acc, (&a, &xk)| acc + a * xk);
        }
    }

    /// `T* x` written into `out`.
    pub fn apply_adjoint_into(&self, x: &[Quaternion], out: &mut [Quaternion]) {
        let n = self.n;
        for o in out.iter_mut().take(n) {
            *o = Quaternion::ZERO;
        }
        for (i, &xi) in x.iter().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a.conj() * xi;
            }
        }
    }

    pub fn apply(&self, x: &QVector) -> Result<QVector> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut out = QVector::zeros(self.n);
        self.apply_into(x.entries(), &mut out.0);
        Ok(out)
    }

    /// `⟨Tx, x⟩`.
    pub fn form(&self, x: &QVector) -> Result<Quaternion> {
        let tx = self.apply(x)?;
        Ok(inner_unchecked(tx.entries(), x.entries()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max)
    }

    /// Real `4n × 4n` matrix of `x ↦ Tx` on `ℍⁿ ≅ ℝ^{4n}`; multiplicative.
    pub fn real_rep(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut r = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            for j in 0..n {
                let l = left_mul_matrix(self[(i, j)]);
                for a in 0..4 {
                    for b in 0..4 {
                        r[(4 * i + a, 4 * j + b)] = l[a][b];
                    }
                }
            }
        }
        r
    }

    /// Complex adjoint `[[A1, A2], [-conj(A2), conj(A1)]]` for `T = A1 + A2·j`.
    pub fn complex_rep(&self) -> DMatrix<Complex<f64>> {
        let n = self.n;
        let mut c = DMatrix::from_element(2 * n, 2 * n, Complex::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let q = self[(i, j)];
                let z1 = Complex::new(q.w, q.x);
                let z2 = Complex::new(q.y, q.z);
                c[(i, j)] = z1;
                c[(i, j + n)] = z2;
                c[(i + n, j)] = -z2.conj();
                c[(i + n, j + n)] = z1.conj();
            }
        }
        c
    }
}

impl std::ops::Index<(usize, usize)> for QMatrix {
    type Output = Quaternion;
    fn index(&self, (i, j): (usize, usize)) -> &Quaternion {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Quaternion {
        &mut self.data[i * self.n + j]
    }
}

/// 4×4 real matrix of `v ↦ p·v`.
pub fn left_mul_matrix(p: Quaternion) -> [[f64; 4]; 4] {
    let (w, x, y, z) = (p.w, p.x, p.y, p.z);
    [
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ]
}

/// 4×4 real matrix of `v ↦ v·p`.
pub fn right_mul_matrix(p: Quaternion) -> [[f64; 4]; 4] {
    let (w, x, y, z) = (p.w, p.x, p.y, p.z);
    [
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ]
}

/// `Δ_q(T) = T² − 2 Re(q) T + |q|² I`.
pub fn delta(t: &QMatrix, q: Quaternion) -> QMatrix {
    let n = t.n();
    t.matmul(t)
        .sub(&t.scale(2.0 * q.re()))
        .add(&QMatrix::scalar(n, Quaternion::real(q.norm_sqr())))
}

/// Right-hand side of the eight-term polarization identity, divided by four.
///
/// Uses only values of the quadratic form `v ↦ ⟨Tv, v⟩`; equals `⟨Tx, y⟩`.
pub fn polarization(t: &QMatrix, x: &QVector, y: &QVector) -> Result<Quaternion> {
    for v in [x, y] {
        if v.len() != t.n() {
            return Err(Error::DimensionMismatch {
                expected: t.n(),
                found: v.len(),
            });
        }
    }
    let diff = |eta: Quaternion| -> Result<Quaternion> {
        let ye = y.mul_right(eta);
        Ok(t.form(&x.add(&ye))? - t.form(&x.sub(&ye))?)
    };
    let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
    let total = diff(Quaternion::ONE)? + diff(i)? * i + k * diff(k)? + k * diff(j)? * i;
    Ok(total * 0.25)
}
