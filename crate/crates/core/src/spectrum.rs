//! S-spectrum of a quaternionic matrix.
//!
//! Candidate spheres come from the eigenvalues of the complex adjoint; every
//! candidate is then confirmed by the singularity of `Δ_q(T)` at its
//! representative.

use nalgebra::linalg::Schur;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::smallest_singular_value;
use crate::matrix::{delta, QMatrix};
use crate::operator::DirectSum;
use crate::quat::{csim, Quaternion, SimilaritySphere};

/// Canonical representatives closer than this are the same sphere.
pub const SPHERE_MERGE_TOLERANCE: f64 = 1e-6;
/// Residual bound for the complex Schur eigenvalues, relative to `1 + ‖T‖_F`.
pub const SCHUR_TOLERANCE: f64 = 1e-9;

/// Finite union of similarity spheres, sorted by `(a, b)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SphereSet(pub Vec<SimilaritySphere>);

impl SphereSet {
    pub fn spheres(&self) -> &[SimilaritySphere] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distance in `(a, b)` coordinates from `s` to the nearest sphere.
    pub fn distance(&self, s: SimilaritySphere) -> f64 {
        self.0
            .iter()
            .map(|t| t.distance(s))
            .fold(f64::INFINITY, f64::min)
    }

    fn from_candidates(mut c: Vec<SimilaritySphere>) -> Self {
        c.sort_by(|p, q| p.a.total_cmp(&q.a).then(p.b.total_cmp(&q.b)));
        let mut merged: Vec<SimilaritySphere> = Vec::new();
        for s in c {
            if merged.iter().all(|m| m.distance(s) > SPHERE_MERGE_TOLERANCE) {
                merged.push(s);
            }
        }
        Self(merged)
    }
}

/// Singularity threshold for `Δ_q(T)`: `1e-8·(1 + ‖T‖²)`.
pub fn singularity_threshold(t: &QMatrix) -> f64 {
    let f = t.frobenius_norm();
    1e-8 * (1.0 + f * f)
}

/// Smallest singular value of `Δ_q(T)` over `ℝ^{4n}`.
pub fn delta_sigma_min(t: &QMatrix, q: Quaternion) -> Result<f64> {
    smallest_singular_value(&delta(t, q).real_rep())
}

/// Similarity spheres of the S-spectrum of `t`.
pub fn s_spectrum(t: &QMatrix) -> Result<SphereSet> {
    let n = t.n();
    if n == 0 {
        return Ok(SphereSet::default());
    }
    let chi = t.complex_rep();
    let scale = 1.0 + t.frobenius_norm();
    let schur = Schur::try_new(chi.clone(), 1e-15 * scale, 10_000)
        .ok_or_else(|| Error::EigenFailure("complex Schur iteration did not converge".into()))?;
    let (q, upper) = schur.unpack();
    // the eigenvalues are the diagonal of the triangular factor; check the factorization
    let recon = &q * &upper * q.adjoint();
    let err = (&recon - &chi)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if err > SCHUR_TOLERANCE * scale {
        return Err(Error::EigenResidual {
            residual: err,
            tolerance: SCHUR_TOLERANCE * scale,
        });
    }
    let candidates: Vec<SimilaritySphere> = (0..2 * n)
        .map(|k| {
            let z = upper[(k, k)];
            SimilaritySphere::new(z.re, z.im)
        })
        .collect();
    let set = SphereSet::from_candidates(candidates);

    let threshold = singularity_threshold(t);
    for s in set.spheres() {
        let sigma = delta_sigma_min(t, s.representative())?;
        if sigma > threshold {
            return Err(Error::EigenFailure(format!(
                "sphere ({}, {}) fails the Δ_q singularity check: σ_min = {sigma:e}",
                s.a, s.b
            )));
        }
    }
    Ok(set)
}

/// S-spectrum of a direct sum: the block spectra together with the diagonal spheres.
pub fn direct_sum_spectrum(op: &DirectSum) -> Result<SphereSet> {
    let mut candidates: Vec<SimilaritySphere> = op.diagonal().iter().map(|&q| csim(q)).collect();
    for b in op.blocks() {
        candidates.extend_from_slice(s_spectrum(b)?.spheres());
    }
    Ok(SphereSet::from_candidates(candidates))
}
