//! Numerical range, bild and upper bild of finite operators.
//!
//! The upper bild `B⁺(T) = {(Re q, |Im q|) : q ∈ W(T)}` is convex. It is
//! bracketed from outside by support lines in the upper directions (each one a
//! symmetric eigenproblem) and from inside by attained values: uniform samples
//! of the unit sphere plus points reached by local optimization of the
//! quadratic form. Only attained values ever enter the inner set.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon, Point2};
use crate::jacobi::sym_eig;
use crate::matrix::{left_mul_matrix, right_mul_matrix, QMatrix};
use crate::operator::DirectSum;
use crate::quat::{canonical_rotation, csim, inner_unchecked, rotation_between, QVector, Quaternion};
use crate::rng::stream;

const SAMPLE_CHUNK: usize = 2048;
/// Downward probe directions tracked during sampling to seed the lower sweep.
const PROBES: usize = 16;
/// Imaginary-part tolerance for a value to count as real.
pub const REAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BildConfig {
    /// Uniform samples `m`.
    pub samples: usize,
    /// Support angles `k`, equispaced in `[0, π]` including both ends.
    pub angles: usize,
    pub seed: u64,
    /// Run the optimization passes that add attained boundary points.
    pub refine: bool,
}

impl Default for BildConfig {
    fn default() -> Self {
        Self {
            samples: 200_000,
            angles: 360,
            seed: 0,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BildRegion {
    /// Attained points: sampled values followed by optimized ones.
    pub inner_points: Vec<Point2>,
    /// Number of leading entries of `inner_points` that are uniform samples.
    pub sampled: usize,
    pub inner_hull: ConvexPolygon,
    pub outer_polygon: ConvexPolygon,
    pub hausdorff_gap: f64,
    pub supports: Vec<Support>,
    pub norm_bound: f64,
}

impl BildRegion {
    /// Attained points beyond the uniform samples.
    pub fn witnesses(&self) -> &[Point2] {
        &self.inner_points[self.sampled..]
    }
}

/// Angle grid `θ_t = π t / (k − 1)`.
pub fn angle_grid(k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![0.0],
        // clamped: rounding can push the last angle one ulp past π
        _ => (0..k).map(|t| (PI * t as f64 / (k - 1) as f64).min(PI)).collect(),
    }
}

fn fill_unit<R: Rng + ?Sized>(buf: &mut [Quaternion], rng: &mut R) {
    loop {
        let mut s = 0.0;
        for q in buf.iter_mut() {
            *q = Quaternion::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            s += q.norm_sqr();
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            for q in buf.iter_mut() {
                *q = *q * inv;
            }
            return;
        }
    }
}

/// Best sampled vector for the linear functional `c·a + s·b`.
type ProbeBest = Option<(f64, Vec<Quaternion>)>;

/// Sampled values plus, for each probe `(c, s)`, the best sample vector.
fn sample_pass(
    op: &DirectSum,
    m: usize,
    seed: u64,
    label: &str,
    probes: &[(f64, f64)],
) -> (Vec<Quaternion>, Vec<ProbeBest>) {
    let n = op.dim();
    let chunks = m.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<(Vec<Quaternion>, Vec<ProbeBest>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, label, c as u64);
            let count = SAMPLE_CHUNK.min(m - c * SAMPLE_CHUNK);
            let mut buf = vec![Quaternion::ZERO; n];
            let mut values = Vec::with_capacity(count);
            let mut best: Vec<ProbeBest> = vec![None; probes.len()];
            for _ in 0..count {
                fill_unit(&mut buf, &mut rng);
                let q = op.form_slice(&buf);
                let p = csim(q);
                for (slot, &(pc, ps)) in best.iter_mut().zip(probes) {
                    let v = pc * p.a + ps * p.b;
                    if slot.as_ref().is_none_or(|(bv, _)| v > *bv) {
                        *slot = Some((v, buf.clone()));
                    }
                }
                values.push(q);
            }
            (values, best)
        })
        .collect();
    let mut values = Vec::with_capacity(m);
    let mut best: Vec<ProbeBest> = vec![None; probes.len()];
    for (v, b) in parts {
        values.extend(v);
        for (slot, cand) in best.iter_mut().zip(b) {
            if let Some((cv, cx)) = cand {
                if slot.as_ref().is_none_or(|(bv, _)| cv > *bv) {
                    *slot = Some((cv, cx));
                }
            }
        }
    }
    (values, best)
}

/// `m` values `⟨Tx, x⟩` at uniformly distributed unit vectors.
pub fn nr_sample(op: &DirectSum, m: usize, seed: u64) -> Vec<Quaternion> {
    sample_pass(op, m, seed, "nr_sample", &[]).0
}

/// Symmetric part of the real matrix of `x ↦ Re(μ⟨Tx, x⟩)`.
fn form_matrix(t: &QMatrix, mu: Quaternion) -> DMatrix<f64> {
    let n = t.n();
    let r = right_mul_matrix(mu);
    let mut b = DMatrix::zeros(4 * n, 4 * n);
    for k in 0..n {
        for l in 0..n {
            let lm = left_mul_matrix(t[(k, l)]);
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = 0.0;
                    for p in 0..4 {
                        s += lm[i][p] * r[p][j];
                    }
                    b[(4 * k + i, 4 * l + j)] = s;
                }
            }
        }
    }
    let bt = b.transpose();
    (b + bt) * 0.5
}

fn check_angle(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::AngleOutOfRange(theta));
    }
    Ok(())
}

/// `h(θ) = max_{‖x‖=1} cos θ·Re⟨Tx,x⟩ + sin θ·|Im⟨Tx,x⟩|`.
pub fn upper_bild_support(op: &DirectSum, theta: f64) -> Result<f64> {
    Ok(support_with_vector(op, theta)?.0)
}

/// Support value together with a unit vector attaining it.
pub fn support_with_vector(op: &DirectSum, theta: f64) -> Result<(f64, QVector)> {
    check_angle(theta)?;
    let dim = op.dim();
    if dim == 0 {
        return Err(Error::InvalidArgument("operator of dimension zero".into()));
    }
    let (c, s) = (theta.cos(), theta.sin());
    // Re(μ q) = c·Re q + s·q_x, and the rotation aligning Im q with i shows the maxima agree
    let mu = Quaternion::new(c, -s, 0.0, 0.0);
    let mut best: Option<(f64, QVector)> = None;
    let mut off = 0;
    for b in op.blocks() {
        let spec = sym_eig(&form_matrix(b, mu))?;
        let v = spec.max_vector();
        if best.as_ref().is_none_or(|(h, _)| spec.max() > *h) {
            let mut x = QVector::zeros(dim);
            for k in 0..b.n() {
                x.0[off + k] = Quaternion::new(v[4 * k], v[4 * k + 1], v[4 * k + 2], v[4 * k + 3]);
            }
            best = Some((spec.max(), x.normalized()));
        }
        off += b.n();
    }
    for (k, &d) in op.diagonal().iter().enumerate() {
        let h = c * d.re() + s * d.im_norm();
        if best.as_ref().is_none_or(|(bh, _)| h > *bh) {
            let mut x = QVector::zeros(dim);
            x.0[off + k] = canonical_rotation(d);
            best = Some((h, x));
        }
    }
    Ok(best.expect("nonzero dimension"))
}

/// Smooth-enough functions of `q = ⟨Tx, x⟩` maximized over the unit sphere.
#[derive(Debug, Clone, Copy)]
enum Objective {
    /// `c·Re q + s·|Im q|`.
    Direction { c: f64, s: f64 },
    /// `−|csim(q) − (a, b)|²`.
    Target { a: f64, b: f64 },
}

impl Objective {
    /// Value and the quaternion `μ` with `dφ = Re(μ dq)`.
    fn eval(self, q: Quaternion) -> (f64, Quaternion) {
        let v = q.im();
        let nb = v.norm();
        let u = if nb > 1e-300 { v / nb } else { Quaternion::I };
        match self {
            Objective::Direction { c, s } => (c * q.re() + s * nb, Quaternion::real(c) - u * s),
            Objective::Target { a, b } => {
                let da = q.re() - a;
                let db = nb - b;
                (
                    -(da * da + db * db),
                    u * (2.0 * db) - Quaternion::real(2.0 * da),
                )
            }
        }
    }
}

/// Scratch buffers for `Tx`, `T*x` at the current point.
struct Evaluator<'a> {
    op: &'a DirectSum,
    tx: Vec<Quaternion>,
    tsx: Vec<Quaternion>,
}

impl<'a> Evaluator<'a> {
    fn new(op: &'a DirectSum) -> Self {
        let n = op.dim();
        Self {
            op,
            tx: vec![Quaternion::ZERO; n],
            tsx: vec![Quaternion::ZERO; n],
        }
    }

    /// Evaluates at `x` and caches both products for later gradients.
    fn at(&mut self, x: &[Quaternion]) -> Quaternion {
        self.op.apply_into(x, &mut self.tx);
        self.op.apply_adjoint_into(x, &mut self.tsx);
        inner_unchecked(&self.tx, x)
    }

    fn value(&mut self, x: &[Quaternion]) -> Quaternion {
        self.op.apply_into(x, &mut self.tx);
        inner_unchecked(&self.tx, x)
    }

    /// Euclidean gradient of `x ↦ Re(μ⟨Tx, x⟩)` at the cached point.
    fn gradient(&self, mu: Quaternion, out: &mut [Quaternion]) {
        let mc = mu.conj();
        for ((o, &a), &b) in out.iter_mut().zip(&self.tx).zip(&self.tsx) {
            *o = a * mu + b * mc;
        }
    }
}

fn real_dot(x: &[Quaternion], y: &[Quaternion]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.dot(*b)).sum()
}

fn normalize(x: &mut [Quaternion]) {
    let n = real_dot(x, x).sqrt();
    if n > 0.0 {
        for q in x.iter_mut() {
            *q = *q * (1.0 / n);
        }
    }
}

/// Attained value with the vector that attains it.
#[derive(Debug, Clone)]
struct Witness {
    x: Vec<Quaternion>,
    q: Quaternion,
}

impl Witness {
    fn point(&self) -> Point2 {
        let s = csim(self.q);
        Point2::new(s.a, s.b)
    }
}

/// Riemannian gradient ascent with Armijo backtracking on the unit sphere.
fn ascend(op: &DirectSum, x0: &[Quaternion], obj: Objective, max_iter: usize) -> Witness {
    let n = op.dim();
    let scale = 1.0 + op.norm_bound();
    let mut ev = Evaluator::new(op);
    let mut x = x0.to_vec();
    normalize(&mut x);
    let mut q = ev.at(&x);
    let (mut f, mut mu) = obj.eval(q);
    let mut g = vec![Quaternion::ZERO; n];
    let mut y = vec![Quaternion::ZERO; n];
    let mut step = 1.0 / scale;
    for _ in 0..max_iter {
        ev.gradient(mu, &mut g);
        let gx = real_dot(&g, &x);
        for (gi, &xi) in g.iter_mut().zip(&x) {
            *gi -= xi * gx;
        }
        let pn2 = real_dot(&g, &g);
        if pn2.sqrt() <= 1e-13 * scale {
            break;
        }
        let mut accepted = false;
        while step > 1e-18 {
            for ((yi, &xi), &gi) in y.iter_mut().zip(&x).zip(&g) {
                *yi = xi + gi * step;
            }
            normalize(&mut y);
            let qy = ev.value(&y);
            let (fy, _) = obj.eval(qy);
            if fy >= f + 1e-4 * step * pn2 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut x, &mut y);
        q = ev.at(&x);
        let (f_new, mu_new) = obj.eval(q);
        let gain = f_new - f;
        f = f_new;
        mu = mu_new;
        step *= 2.0;
        if gain <= 1e-15 * (1.0 + f.abs()) {
            break;
        }
    }
    Witness { x, q }
}

fn perturbed<R: Rng + ?Sized>(x: &[Quaternion], amplitude: f64, rng: &mut R) -> Vec<Quaternion> {
    let mut noise = vec![Quaternion::ZERO; x.len()];
    fill_unit(&mut noise, rng);
    let mut y: Vec<Quaternion> = x.iter().zip(&noise).map(|(&a, &b)| a + b * amplitude).collect();
    normalize(&mut y);
    y
}

/// Gradients of the three imaginary coordinates of `⟨Tx, x⟩`, projected onto the sphere tangent.
fn imag_jacobian(ev: &Evaluator, x: &[Quaternion]) -> [Vec<Quaternion>; 3] {
    let units = [Quaternion::I, Quaternion::J, Quaternion::K];
    units.map(|e| {
        let mut g = vec![Quaternion::ZERO; x.len()];
        // q_m = Re(−e_m q)
        ev.gradient(-e, &mut g);
        let gx = real_dot(&g, x);
        for (gi, &xi) in g.iter_mut().zip(x) {
            *gi -= xi * gx;
        }
        g
    })
}

fn gram_solve(jac: &[Vec<Quaternion>; 3], rhs: Vector3<f64>) -> Vector3<f64> {
    let gram = Matrix3::from_fn(|i, j| real_dot(&jac[i], &jac[j]));
    let eps = 1e-14 * (1.0 + gram.amax());
    match gram.pseudo_inverse(eps) {
        Ok(p) => p * rhs,
        Err(_) => Vector3::zeros(),
    }
}

/// Gauss–Newton projection onto `{Im⟨Tx, x⟩ = 0}` within the unit sphere.
fn restore(op: &DirectSum, x: &mut Vec<Quaternion>) -> Quaternion {
    let tol = 1e-14 * (1.0 + op.norm_bound());
    let mut ev = Evaluator::new(op);
    let mut q = ev.at(x);
    for _ in 0..40 {
        let res = q.im().norm();
        if res <= tol {
            break;
        }
        let jac = imag_jacobian(&ev, x);
        let lambda = gram_solve(&jac, Vector3::new(q.x, q.y, q.z));
        let mut damp = 1.0;
        let mut improved = false;
        while damp > 1e-6 {
            let mut y = x.clone();
            for (m, g) in jac.iter().enumerate() {
                for (yi, &gi) in y.iter_mut().zip(g) {
                    *yi -= gi * (damp * lambda[m]);
                }
            }
            normalize(&mut y);
            let qy = ev.value(&y);
            if qy.im().norm() < res {
                *x = y;
                improved = true;
                break;
            }
            damp *= 0.5;
        }
        if !improved {
            break;
        }
        q = ev.at(x);
    }
    q
}

/// Extremal real parts over `{Im⟨Tx,x⟩ = 0}` by projected gradient steps from `x0`.
fn real_extreme(op: &DirectSum, x0: &[Quaternion], sign: f64) -> Option<Witness> {
    let n = op.dim();
    let mut x = x0.to_vec();
    normalize(&mut x);
    let mut q = restore(op, &mut x);
    if q.im().norm() > REAL_TOLERANCE {
        return None;
    }
    let scale = 1.0 + op.norm_bound();
    let mut ev = Evaluator::new(op);
    let mut step = 1.0 / scale;
    let mut g = vec![Quaternion::ZERO; n];
    for _ in 0..5000 {
        ev.at(&x);
        ev.gradient(Quaternion::real(sign), &mut g);
        let gx = real_dot(&g, &x);
        for (gi, &xi) in g.iter_mut().zip(&x) {
            *gi -= xi * gx;
        }
        let jac = imag_jacobian(&ev, &x);
        let coeff = gram_solve(&jac, Vector3::from_fn(|m, _| real_dot(&jac[m], &g)));
        for (m, j) in jac.iter().enumerate() {
            for (gi, &ji) in g.iter_mut().zip(j) {
                *gi -= ji * coeff[m];
            }
        }
        let pn2 = real_dot(&g, &g);
        if pn2.sqrt() <= 1e-13 * scale {
            break;
        }
        let mut accepted = None;
        while step > 1e-18 {
            let mut y: Vec<Quaternion> = x.iter().zip(&g).map(|(&a, &b)| a + b * step).collect();
            normalize(&mut y);
            let qy = restore(op, &mut y);
            if qy.im().norm() <= REAL_TOLERANCE * 1e-3 && sign * qy.re() > sign * q.re() {
                accepted = Some((y, qy));
                break;
            }
            step *= 0.5;
        }
        let Some((y, qy)) = accepted else { break };
        let gain = sign * (qy.re() - q.re());
        x = y;
        q = qy;
        step *= 2.0;
        if gain <= 1e-15 * scale {
            break;
        }
    }
    Some(Witness { x, q })
}

/// Unit vector `cos t·x + sin t·y·u` whose value interpolates the two witnesses.
///
/// `u` turns the imaginary part of `y`'s value parallel (`flip = false`) or
/// antiparallel to that of `x`; for orthogonal `x`, `y` with no cross terms
/// the value is `(1 − λ)·q_x + λ·conj(u) q_y u`.
fn mixture(w0: &Witness, w1: &Witness, lambda: f64, flip: bool) -> Vec<Quaternion> {
    let target = if flip { -w0.q.im() } else { w0.q.im() };
    let u = rotation_between(w1.q, target);
    let (c, s) = ((1.0 - lambda).max(0.0).sqrt(), lambda.max(0.0).sqrt());
    let mut z: Vec<Quaternion> = w0
        .x
        .iter()
        .zip(&w1.x)
        .map(|(&a, &b)| a * c + b * u * s)
        .collect();
    normalize(&mut z);
    z
}

fn target_distance(q: Quaternion, p: Point2) -> f64 {
    let s = csim(q);
    Point2::new(s.a, s.b).distance(p)
}

/// Fills long edges of the witness hull with attained points near the edge.
fn densify(op: &DirectSum, witnesses: &[Witness], spacing: f64) -> Vec<Witness> {
    let points: Vec<Point2> = witnesses.iter().map(Witness::point).collect();
    let hull = convex_hull(&points);
    if hull.len() < 2 {
        return vec![];
    }
    let index_of = |p: Point2| points.iter().position(|&w| w == p).expect("hull vertex is a witness");
    let ring: Vec<usize> = hull.iter().map(|&p| index_of(p)).collect();
    let edges: Vec<(usize, usize)> = if ring.len() == 2 {
        vec![(ring[0], ring[1])]
    } else {
        (0..ring.len()).map(|i| (ring[i], ring[(i + 1) % ring.len()])).collect()
    };
    let scale = 1.0 + op.norm_bound();
    let mut jobs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, j) in edges {
        let len = points[i].distance(points[j]);
        let count = (len / spacing).ceil() as usize;
        for r in 1..count {
            jobs.push((i, j, r as f64 / count as f64));
        }
    }
    jobs.into_par_iter()
        .map(|(i, j, lambda)| {
            let target = points[i].lerp(points[j], lambda);
            let (dist, seed) = [false, true]
                .into_iter()
                .map(|flip| {
                    let x = mixture(&witnesses[i], &witnesses[j], lambda, flip);
                    let q = op.form_slice(&x);
                    (target_distance(q, target), Witness { x, q })
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("two candidates");
            // mixtures of vectors from different summands land on the edge already
            if dist <= 1e-12 * scale {
                return seed;
            }
            ascend(op, &seed.x, Objective::Target { a: target.x, b: target.y }, 150)
        })
        .collect()
}

/// Outer polygon from the rectangle `[−R, R] × [0, R]` and the support half-planes.
pub fn outer_polygon(supports: &[Support], norm_bound: f64) -> Result<ConvexPolygon> {
    let r = norm_bound;
    let mut poly = ConvexPolygon::rectangle(-r, r, 0.0, r);
    let slack = 1e-12 * (1.0 + r);
    for s in supports {
        let normal = Point2::new(s.theta.cos(), s.theta.sin());
        poly = poly
            .clip(normal, s.value + slack)
            .ok_or(Error::DegeneratePolygon)?;
    }
    Ok(poly)
}

fn probe_directions() -> Vec<(f64, f64)> {
    (0..PROBES)
        .map(|p| {
            let t = PI + PI * (p as f64 + 0.5) / PROBES as f64;
            (t.cos(), t.sin())
        })
        .collect()
}

/// Attained points of a single dense block: supports, a downward sweep and the real axis.
fn block_witnesses(block: &DirectSum, config: &BildConfig, label: u64, probe_best: &[ProbeBest]) -> Result<Vec<Witness>> {
    let thetas = angle_grid(config.angles);
    let support_vectors: Vec<QVector> = thetas
        .par_iter()
        .map(|&t| support_with_vector(block, t).map(|(_, x)| x))
        .collect::<Result<_>>()?;
    let last = support_vectors.len() - 1;
    let anchors = [&support_vectors[last], &support_vectors[0], &support_vectors[last / 2]];
    let sweep_count = (config.angles / 2).max(8);
    let sweep: Vec<Witness> = (0..sweep_count)
        .into_par_iter()
        .map(|j| {
            let t = PI + PI * (j as f64 + 1.0) / (sweep_count as f64 + 1.0);
            let obj = Objective::Direction { c: t.cos(), s: t.sin() };
            let mut rng = stream(config.seed, "bild_sweep", (label << 32) | j as u64);
            let mut seeds: Vec<Vec<Quaternion>> = anchors
                .iter()
                .map(|a| perturbed(a.entries(), 1e-3, &mut rng))
                .collect();
            let probe = (((t - PI) / PI * PROBES as f64).floor() as usize).min(PROBES - 1);
            if let Some((_, x)) = &probe_best[probe] {
                seeds.push(x.clone());
            }
            seeds
                .iter()
                .map(|s| ascend(block, s, obj, 300))
                .map(|w| (obj.eval(w.q).0, w))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, w)| w)
                .expect("at least one seed")
        })
        .collect();

    // the lowest sweep points and the best downward samples seed a search along the real axis
    let mut low: Vec<&Witness> = sweep.iter().collect();
    low.sort_by(|a, b| a.q.im_norm().total_cmp(&b.q.im_norm()));
    let mut real_seeds: Vec<&[Quaternion]> = low.iter().take(4).map(|w| w.x.as_slice()).collect();
    real_seeds.extend(probe_best.iter().flatten().map(|(_, x)| x.as_slice()));
    let real: Vec<Witness> = real_seeds
        .par_iter()
        .flat_map_iter(|x| [1.0, -1.0].map(|sign| real_extreme(block, x, sign)))
        .flatten()
        .collect();

    let mut out: Vec<Witness> = support_vectors
        .into_iter()
        .map(|x| Witness {
            q: block.form_slice(x.entries()),
            x: x.0,
        })
        .collect();
    out.extend(sweep);
    out.extend(real);
    Ok(out)
}

fn embed(w: Witness, offset: usize, dim: usize) -> Witness {
    let mut x = vec![Quaternion::ZERO; dim];
    x[offset..offset + w.x.len()].copy_from_slice(&w.x);
    Witness { x, q: w.q }
}

/// Vertices of the hull of a component's witness points, as indices.
fn hull_indices(ws: &[Witness]) -> Vec<usize> {
    let points: Vec<Point2> = ws.iter().map(Witness::point).collect();
    convex_hull(&points)
        .into_iter()
        .map(|p| points.iter().position(|&w| w == p).expect("hull vertex is a witness"))
        .collect()
}

/// Extreme real values of mixtures across different direct summands.
///
/// Values of different summands rotate independently, so `λ p + (1 − λ) q`
/// is attained with the imaginary parts antiparallel. It is real at
/// `λ = b_q / (b_p + b_q)`, and along hull edges this real point moves
/// monotonically, so hull vertices of each summand suffice.
fn cross_real_witnesses(op: &DirectSum, components: &[Vec<Witness>]) -> Vec<Witness> {
    let verts: Vec<Vec<(Point2, usize)>> = components
        .iter()
        .map(|ws| hull_indices(ws).into_iter().map(|i| (ws[i].point(), i)).collect())
        .collect();
    // (real value, (component, witness) of each end)
    type Pick = (f64, (usize, usize), (usize, usize));
    let mut lo: Option<Pick> = None;
    let mut hi: Option<Pick> = None;
    for (ci, vi) in verts.iter().enumerate() {
        for (cj, vj) in verts.iter().enumerate().skip(ci + 1) {
            for &(p, ip) in vi {
                for &(q, iq) in vj {
                    let s = p.y + q.y;
                    if s <= 0.0 {
                        continue;
                    }
                    let r = (q.y * p.x + p.y * q.x) / s;
                    if lo.is_none_or(|l| r < l.0) {
                        lo = Some((r, (ci, ip), (cj, iq)));
                    }
                    if hi.is_none_or(|h| r > h.0) {
                        hi = Some((r, (ci, ip), (cj, iq)));
                    }
                }
            }
        }
    }
    [lo, hi]
        .into_iter()
        .flatten()
        .map(|(_, (ci, ip), (cj, iq))| {
            let (w0, w1) = (&components[ci][ip], &components[cj][iq]);
            let lambda = w1.q.im_norm() / (w0.q.im_norm() + w1.q.im_norm());
            let x = mixture(w0, w1, 1.0 - lambda, true);
            Witness { q: op.form_slice(&x), x }
        })
        .collect()
}

/// Attained values: supports, per-summand refinement, cross-summand real points and hull densification.
fn collect_witnesses(op: &DirectSum, config: &BildConfig, support_vectors: &[QVector], probe_best: &[ProbeBest]) -> Result<Vec<Witness>> {
    let dim = op.dim();
    let mut witnesses: Vec<Witness> = support_vectors
        .iter()
        .map(|x| Witness {
            q: op.form_slice(x.entries()),
            x: x.0.clone(),
        })
        .collect();
    if !config.refine {
        return Ok(witnesses);
    }
    let single = op.blocks().len() == 1 && op.diagonal().is_empty();
    let probes = probe_directions();
    let mut components: Vec<Vec<Witness>> = Vec::new();
    let mut off = 0;
    for (bi, b) in op.blocks().iter().enumerate() {
        let sub = DirectSum::from(b.clone());
        let local = if single {
            block_witnesses(&sub, config, bi as u64, probe_best)?
        } else {
            let m = config.samples.min(20_000);
            let best = sample_pass(&sub, m, config.seed ^ bi as u64, "bild_block", &probes).1;
            block_witnesses(&sub, config, bi as u64, &best)?
        };
        components.push(local.into_iter().map(|w| embed(w, off, dim)).collect());
        off += b.n();
    }
    for (k, &d) in op.diagonal().iter().enumerate() {
        let u = canonical_rotation(d);
        let mut x = vec![Quaternion::ZERO; dim];
        x[off + k] = u;
        components.push(vec![Witness { q: d.similar_by(u), x }]);
    }
    let cross = cross_real_witnesses(op, &components);
    witnesses.extend(components.into_iter().flatten());
    witnesses.extend(cross);
    let spacing = 0.004 * (1.0 + op.norm_bound());
    let dense = densify(op, &witnesses, spacing);
    witnesses.extend(dense);
    Ok(witnesses)
}

/// Inner and outer approximation of the upper bild with a Hausdorff gap certificate.
pub fn upper_bild(op: &DirectSum, config: &BildConfig) -> Result<BildRegion> {
    if config.samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if config.angles < 3 {
        return Err(Error::InvalidArgument("at least three support angles are required".into()));
    }
    if op.dim() == 0 {
        return Err(Error::InvalidArgument("operator of dimension zero".into()));
    }
    let norm_bound = op.norm_bound();
    let thetas = angle_grid(config.angles);
    let supported: Vec<(f64, QVector)> = thetas
        .par_iter()
        .map(|&t| support_with_vector(op, t))
        .collect::<Result<_>>()?;
    let supports: Vec<Support> = thetas
        .iter()
        .zip(&supported)
        .map(|(&theta, (value, _))| Support { theta, value: *value })
        .collect();
    let support_vectors: Vec<QVector> = supported.into_iter().map(|(_, x)| x).collect();

    let probes = if config.refine { probe_directions() } else { vec![] };
    let (values, probe_best) = sample_pass(op, config.samples, config.seed, "nr_sample", &probes);
    let mut inner_points: Vec<Point2> = values
        .iter()
        .map(|&q| {
            let s = csim(q);
            Point2::new(s.a, s.b)
        })
        .collect();
    let sampled = inner_points.len();
    let witnesses = collect_witnesses(op, config, &support_vectors, &probe_best)?;
    inner_points.extend(witnesses.iter().map(Witness::point));

    let inner_hull = ConvexPolygon::hull(&inner_points)?;
    let outer = outer_polygon(&supports, norm_bound)?;
    let hausdorff_gap = inner_hull.hausdorff(&outer);
    Ok(BildRegion {
        inner_points,
        sampled,
        inner_hull,
        outer_polygon: outer,
        hausdorff_gap,
        supports,
        norm_bound,
    })
}

/// Attained interval `[min, max]` of `W(T) ∩ ℝ`.
///
/// Candidates are the real values reached by the refinement passes of
/// [`upper_bild`] (with 180 support angles) seeded from `m` samples.
pub fn real_section(op: &DirectSum, m: usize, seed: u64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if op.dim() == 0 {
        return Err(Error::InvalidArgument("operator of dimension zero".into()));
    }
    let config = BildConfig {
        samples: m,
        angles: 180,
        seed,
        refine: true,
    };
    let support_vectors: Vec<QVector> = angle_grid(config.angles)
        .par_iter()
        .map(|&t| support_with_vector(op, t).map(|(_, x)| x))
        .collect::<Result<_>>()?;
    let (values, probe_best) = sample_pass(op, m, seed, "real_section", &probe_directions());
    let witnesses = collect_witnesses(op, &config, &support_vectors, &probe_best)?;
    let real: Vec<f64> = witnesses
        .iter()
        .map(|w| w.q)
        .chain(values.iter().copied())
        .filter(|q| q.im_norm() <= REAL_TOLERANCE)
        .map(Quaternion::re)
        .collect();
    if real.is_empty() {
        let best_imag = witnesses
            .iter()
            .map(|w| w.q)
            .chain(values.iter().copied())
            .map(Quaternion::im_norm)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoRealPoint { best_imag });
    }
    let lo = real.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = real.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const I: Quaternion = Quaternion::I;
    const J: Quaternion = Quaternion::J;

    fn corner_block() -> DirectSum {
        DirectSum::from(QMatrix::diag(&[Quaternion::complex(-1.0, 1.0), Quaternion::complex(1.0, 1.0)]))
    }

    fn small(seed: u64) -> BildConfig {
        BildConfig {
            samples: 20_000,
            angles: 90,
            seed,
            refine: true,
        }
    }

    #[test]
    fn samples_of_identity_and_single_entry() {
        let id = DirectSum::from(QMatrix::identity(3));
        for q in nr_sample(&id, 500, 1) {
            assert!((q - Quaternion::ONE).norm() < 1e-14);
        }
        let q0 = Quaternion::new(0.5, -1.0, 2.0, 0.25);
        for q in nr_sample(&DirectSum::from(QMatrix::diag(&[q0])), 500, 2) {
            assert!(csim(q).distance(csim(q0)) < 1e-13);
        }
    }

    #[test]
    fn samples_of_nilpotent_are_bounded_by_half() {
        let mut t = QMatrix::zeros(2);
        t[(0, 1)] = Quaternion::ONE;
        let samples = nr_sample(&DirectSum::from(t), 5000, 3);
        let top = samples.iter().map(|q| q.norm()).fold(0.0, f64::max);
        assert!(top <= 0.5 + 1e-14);
        assert!(top > 0.45);
    }

    #[test]
    fn sampling_is_deterministic_and_chunk_independent() {
        let op = corner_block();
        assert_eq!(nr_sample(&op, 5000, 9), nr_sample(&op, 5000, 9));
        let long = nr_sample(&op, 2 * SAMPLE_CHUNK, 9);
        let short = nr_sample(&op, SAMPLE_CHUNK + 3, 9);
        assert_eq!(&long[..short.len()], &short[..]);
    }

    #[test]
    fn support_examples() {
        let q = Quaternion::new(0.3, 0.4, -1.2, 0.0);
        let single = DirectSum::from(QMatrix::diag(&[q]));
        let id = DirectSum::from(QMatrix::identity(2));
        for t in angle_grid(13) {
            let expected = q.re() * t.cos() + q.im_norm() * t.sin();
            assert!((upper_bild_support(&single, t).unwrap() - expected).abs() < 1e-12);
            assert!((upper_bild_support(&id, t).unwrap() - t.cos()).abs() < 1e-12);
        }
        let h = upper_bild_support(&corner_block(), PI / 2.0).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        assert!(matches!(upper_bild_support(&id, -0.1), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(upper_bild_support(&id, 3.2), Err(Error::AngleOutOfRange(_))));
    }

    #[test]
    fn support_vector_attains_support_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = DirectSum::new(
            vec![QMatrix::random_gaussian(3, &mut rng)],
            vec![Quaternion::new(0.1, 2.0, 0.0, 0.0)],
        );
        for t in angle_grid(17) {
            let (h, x) = support_with_vector(&op, t).unwrap();
            let s = csim(op.form(&x));
            assert!((x.norm() - 1.0).abs() < 1e-12);
            assert!((s.a * t.cos() + s.b * t.sin() - h).abs() < 1e-9);
        }
    }

    #[test]
    fn support_dominates_samples_of_dense_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let op = DirectSum::from(QMatrix::random_gaussian(3, &mut rng));
        let samples = nr_sample(&op, 4000, 1);
        for t in angle_grid(25) {
            let h = upper_bild_support(&op, t).unwrap();
            for q in &samples {
                let s = csim(*q);
                assert!(s.a * t.cos() + s.b * t.sin() <= h + 1e-9);
            }
        }
    }

    #[test]
    fn scalar_operator_degenerates_to_a_point() {
        let op = DirectSum::from(QMatrix::scalar(2, Quaternion::real(3.0)));
        let r = upper_bild(&op, &small(1)).unwrap();
        assert!(r.hausdorff_gap <= 1e-9);
        for v in r.outer_polygon.vertices() {
            assert!(v.distance(Point2::new(3.0, 0.0)) < 1e-9);
        }
    }

    #[test]
    fn single_imaginary_entry() {
        let op = DirectSum::from(QMatrix::diag(&[I]));
        let r = upper_bild(&op, &small(2)).unwrap();
        for p in &r.inner_points {
            assert!(p.distance(Point2::new(0.0, 1.0)) < 1e-12);
        }
        // supports only see the top, so the outer polygon is the segment down to the axis
        let segment = ConvexPolygon::hull(&[Point2::new(0.0, 0.0), Point2::new(0.0, 1.0)]).unwrap();
        assert!(r.outer_polygon.hausdorff(&segment) < 1e-9);
        assert!((r.hausdorff_gap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn corner_block_inner_hull_is_the_triangle() {
        let r = upper_bild(&corner_block(), &small(3)).unwrap();
        let triangle = ConvexPolygon::hull(&[
            Point2::new(-1.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(r.inner_hull.hausdorff(&triangle) < 1e-6, "{:?}", r.inner_hull);
        for p in &r.inner_points {
            assert!(r.outer_polygon.contains(*p, 1e-9));
        }
    }

    #[test]
    fn region_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let op = DirectSum::from(QMatrix::random_gaussian(2, &mut rng));
        let a = upper_bild(&op, &small(4)).unwrap();
        let b = upper_bild(&op, &small(4)).unwrap();
        assert_eq!(a.inner_points, b.inner_points);
        assert_eq!(a.outer_polygon, b.outer_polygon);
        assert_eq!(a.hausdorff_gap.to_bits(), b.hausdorff_gap.to_bits());
    }

    #[test]
    fn real_section_examples() {
        let id = DirectSum::from(QMatrix::identity(2));
        let (lo, hi) = real_section(&id, 1000, 1).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let (lo, hi) = real_section(&DirectSum::from(QMatrix::diag(&[I, J])), 2000, 2).unwrap();
        assert!(lo.abs() < 1e-9 && hi.abs() < 1e-9);

        let (lo, hi) = real_section(&corner_block(), 2000, 3).unwrap();
        assert!(lo.abs() < 1e-6 && hi.abs() < 1e-6, "[{lo}, {hi}]");
    }

    #[test]
    fn real_section_of_imaginary_scalar_is_empty() {
        let op = DirectSum::from(QMatrix::diag(&[I]));
        assert!(matches!(real_section(&op, 500, 1), Err(Error::NoRealPoint { .. })));
    }

    #[test]
    fn real_section_of_hermitian_matrix_spans_its_spectrum() {
        let op = DirectSum::from(QMatrix::diag(&[
            Quaternion::real(-2.0),
            Quaternion::real(0.5),
            Quaternion::real(4.0),
        ]));
        let (lo, hi) = real_section(&op, 2000, 4).unwrap();
        assert!((lo + 2.0).abs() < 1e-6 && (hi - 4.0).abs() < 1e-6, "[{lo}, {hi}]");
    }
}
