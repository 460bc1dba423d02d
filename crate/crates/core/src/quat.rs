//! Real quaternions, quaternionic column vectors and similarity classes.
//!
//! Vectors in `ℍⁿ` are right modules: scalars act on the right, operators on
//! the left. The inner product is `⟨x, y⟩ = Σ conj(y_k)·x_k`, right-linear in
//! the first slot, so that `⟨T(xq), xq⟩ = conj(q)·⟨Tx, x⟩·q`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `q = w + x·i + y·j + z·k`.
///
/// Serialized as the literal `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl From<f64> for Quaternion {
    fn from(r: f64) -> Self {
        Self::real(r)
    }
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    /// `a + b·i`, the canonical complex representative of a similarity class.
    #[inline]
    pub const fn complex(a: f64, b: f64) -> Self {
        Self::new(a, b, 0.0, 0.0)
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.w
    }

    #[inline]
    pub fn im(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `|Im q|`.
    #[inline]
    pub fn im_norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn inverse(self) -> Self {
        self.conj() / self.norm_sqr()
    }

    /// Unit quaternion in the direction of `self`; zero stays zero.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self / n
        }
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// `conj(u)·self·u`.
    #[inline]
    pub fn similar_by(self, u: Self) -> Self {
        u.conj() * self * u
    }

    /// Unit quaternion with independent standard normal coordinates, normalized.
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q = Self::random_gaussian(rng);
            let n = q.norm();
            if n > 1e-12 {
                return q / n;
            }
        }
    }

    /// Quaternion with independent standard normal coordinates.
    pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        )
    }

    /// Uniformly distributed unit imaginary quaternion (normalized Gaussian triple).
    pub fn random_unit_imaginary<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q = Self::new(
                0.0,
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            let n = q.norm();
            if n > 1e-12 {
                return q / n;
            }
        }
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.w, self.x, self.y, self.z)
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Quaternion {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, q: Self) -> Self {
        let p = self;
        Self::new(
            p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
            p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
            p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
            p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl Div<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        Self::new(self.w / s, self.x / s, self.y / s, self.z / s)
    }
}

/// Hamilton product.
pub fn mul(p: Quaternion, q: Quaternion) -> Quaternion {
    p * q
}

/// A similarity class `[q] = {a + b·u : u unit imaginary}` in bild coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySphere {
    pub a: f64,
    pub b: f64,
}

impl SimilaritySphere {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b: b.abs() }
    }

    /// `a + b·i`.
    pub fn representative(self) -> Quaternion {
        Quaternion::complex(self.a, self.b)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.a - other.a).hypot(self.b - other.b)
    }

    pub fn is_real(self) -> bool {
        self.b == 0.0
    }
}

/// `(Re q, |Im q|)`, constant on similarity orbits.
pub fn csim(q: Quaternion) -> SimilaritySphere {
    SimilaritySphere {
        a: q.re(),
        b: q.im_norm(),
    }
}

/// A unit quaternion `u` with `conj(u)·from·u = to` for unit imaginary `from`, `to`.
///
/// Falls back to `1` when either argument is (numerically) zero.
pub fn rotation_between(from: Quaternion, to: Quaternion) -> Quaternion {
    let f = from.im().normalized();
    let t = to.im().normalized();
    if f.norm_sqr() == 0.0 || t.norm_sqr() == 0.0 {
        return Quaternion::ONE;
    }
    // conj(u) f u = t  <=>  f u = u t. With u = 1 - f t (when f != -t) this holds:
    // f(1 - f t) = f + t and (1 - f t) t = t + f.
    let u = Quaternion::ONE - f * t;
    if u.norm() > 1e-8 {
        return u.normalized();
    }
    // f = -t: rotate by pi about any axis orthogonal to f.
    let probe = if f.x.abs() < 0.9 {
        Quaternion::I
    } else {
        Quaternion::J
    };
    (probe - f * f.dot(probe)).normalized()
}

/// Unit quaternion `u` with `conj(u)·q·u = csim(q).representative()`.
pub fn canonical_rotation(q: Quaternion) -> Quaternion {
    rotation_between(q, Quaternion::I)
}

/// Column vector in `ℍⁿ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QVector(pub Vec<Quaternion>);

impl QVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Quaternion::ZERO; n])
    }

    pub fn from_slice(entries: &[Quaternion]) -> Self {
        Self(entries.to_vec())
    }

    /// Standard basis vector `e_k` (0-based).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = Quaternion::ONE;
        v
    }

    /// Uniformly distributed unit vector (normalized Gaussian coordinates).
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let v = Self((0..n).map(|_| Quaternion::random_gaussian(rng)).collect());
            let norm = v.norm();
            if norm > 1e-300 {
                return v.scale(1.0 / norm);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Quaternion] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|&q| q * s).collect())
    }

    /// Right scalar multiplication `x·q`.
    pub fn mul_right(&self, q: Quaternion) -> Self {
        Self(self.0.iter().map(|&e| e * q).collect())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    /// Real Euclidean dot product of the underlying `ℝ^{4n}` coordinates.
    pub fn real_dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(*b)).sum()
    }
}

/// `⟨x, y⟩ = Σ conj(y_k)·x_k`.
pub fn inner(x: &QVector, y: &QVector) -> Result<Quaternion> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(inner_unchecked(x.entries(), y.entries()))
}

pub(crate) fn inner_unchecked(x: &[Quaternion], y: &[Quaternion]) -> Quaternion {
    x.iter()
        .zip(y)
        .fold(Quaternion::ZERO, |acc, (&xk, &yk)| acc + yk.conj() * xk)
}
