//! Model operators `T = B ⊕ diag(s_1, s_2, …)` and their essential numerical range.
//!
//! A model operator is a finite block followed by a diagonal tail produced by a
//! symbol generator. Its limit points are declared by the author and checked
//! against the first `N_check` symbols. Essential sequences are built from
//! tail basis vectors, and convex combinations of them follow the
//! quasi-orthogonal pairing `z = α x_N + β y_M`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Point2};
use crate::matrix::QMatrix;
use crate::operator::DirectSum;
use crate::quat::{csim, rotation_between, Quaternion};

/// Tail symbols checked against the declared bound and limit set.
pub const DEFAULT_CHECK: usize = 100_000;
/// Distance within which a declared limit point must be approached.
pub const LIMIT_TOLERANCE: f64 = 1e-3;
/// Step used to discretize declared limit segments.
pub const SEGMENT_STEP: f64 = 1e-4;

/// Generator of the diagonal symbols `s_n`, `n = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    Constant {
        value: Quaternion,
    },
    /// `s_n = values[(n − 1) mod len]`.
    Periodic {
        values: Vec<Quaternion>,
    },
    /// Every rational in `(−w, w)` times `i`, each exactly once, by increasing denominator.
    RationalsI {
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
    /// `s_n = value / n`.
    Harmonic {
        value: Quaternion,
    },
    /// A finite prefix followed by another tail (zero when absent).
    Explicit {
        prefix: Vec<Quaternion>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        then: Option<Box<Tail>>,
    },
    Conjugate {
        of: Box<Tail>,
    },
    /// `scale·s_n + shift`.
    Affine {
        of: Box<Tail>,
        scale: f64,
        shift: f64,
    },
    /// `conj(u)·s_n·u` for unit `u`.
    Rotate {
        of: Box<Tail>,
        u: Quaternion,
    },
    Sum {
        left: Box<Tail>,
        right: Box<Tail>,
    },
}

fn default_half_width() -> f64 {
    0.5
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduced fractions `p/d` with `|p/d| < 1/2`, ordered by denominator then numerator.
fn farey_half(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut d: i64 = 1;
    while out.len() < count {
        // |p| < d/2
        let pmax = (d - 1) / 2;
        for p in -pmax..=pmax {
            if out.len() == count {
                break;
            }
            if gcd(p.unsigned_abs(), d as u64) == 1 {
                out.push(p as f64 / d as f64);
            }
        }
        d += 1;
    }
    out
}

impl Tail {
    /// The first `count` symbols `s_1, …, s_count`.
    pub fn symbols(&self, count: usize) -> Vec<Quaternion> {
        match self {
            Tail::Constant { value } => vec![*value; count],
            Tail::Periodic { values } => {
                if values.is_empty() {
                    return vec![Quaternion::ZERO; count];
                }
                (0..count).map(|n| values[n % values.len()]).collect()
            }
            Tail::RationalsI { half_width } => farey_half(count)
                .into_iter()
                .map(|r| Quaternion::complex(0.0, 2.0 * half_width * r))
                .collect(),
            Tail::Harmonic { value } => (1..=count).map(|n| *value / n as f64).collect(),
            Tail::Explicit { prefix, then } => {
                let mut out: Vec<Quaternion> = prefix.iter().copied().take(count).collect();
                let rest = count - out.len();
                match then {
                    Some(t) => out.extend(t.symbols(rest)),
                    None => out.extend(std::iter::repeat_n(Quaternion::ZERO, rest)),
                }
                out
            }
            Tail::Conjugate { of } => of.symbols(count).into_iter().map(Quaternion::conj).collect(),
            Tail::Affine { of, scale, shift } => of
                .symbols(count)
                .into_iter()
                .map(|s| s * *scale + Quaternion::real(*shift))
                .collect(),
            Tail::Rotate { of, u } => {
                let u = u.normalized();
                of.symbols(count).into_iter().map(|s| s.similar_by(u)).collect()
            }
            Tail::Sum { left, right } => left
                .symbols(count)
                .into_iter()
                .zip(right.symbols(count))
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Tail::Periodic { values } if values.is_empty() => {
                Err(Error::InvalidArgument("periodic tail needs at least one value".into()))
            }
            Tail::RationalsI { half_width } if !(half_width.is_finite() && *half_width > 0.0) => {
                Err(Error::InvalidArgument("rationals tail needs a positive half width".into()))
            }
            Tail::Explicit { then: Some(t), .. } => t.validate(),
            Tail::Conjugate { of } | Tail::Affine { of, .. } | Tail::Rotate { of, .. } => of.validate(),
            Tail::Sum { left, right } => {
                left.validate()?;
                right.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Declared accumulation point of `csim(s_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitPoint {
    /// Canonical representative `(a, b)`.
    Sphere([f64; 2]),
    /// All `a + b·i` with `b ∈ [b0, b1]`.
    Segment { a: f64, b0: f64, b1: f64 },
}

impl LimitPoint {
    /// Bild points represented; segments are discretized at [`SEGMENT_STEP`].
    pub fn points(&self) -> Vec<Point2> {
        match *self {
            LimitPoint::Sphere([a, b]) => vec![Point2::new(a, b.abs())],
            LimitPoint::Segment { a, b0, b1 } => {
                let (lo, hi) = (b0.min(b1), b0.max(b1));
                let steps = ((hi - lo) / SEGMENT_STEP).ceil().max(0.0) as usize;
                (0..=steps)
                    .map(|k| {
                        let b = if k == steps {
                            hi
                        } else {
                            lo + (hi - lo) * k as f64 / steps.max(1) as f64
                        };
                        Point2::new(a, b.abs())
                    })
                    .collect()
            }
        }
    }

    fn map(&self, scale: f64, shift: f64) -> Self {
        match *self {
            LimitPoint::Sphere([a, b]) => LimitPoint::Sphere([scale * a + shift, scale.abs() * b.abs()]),
            LimitPoint::Segment { a, b0, b1 } => LimitPoint::Segment {
                a: scale * a + shift,
                b0: scale.abs() * b0,
                b1: scale.abs() * b1,
            },
        }
    }
}

/// Finite block `⊕` diagonal tail, with a declared limit set and symbol bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ModelOperator {
    block: QMatrix,
    tail: Tail,
    limit_set: Vec<LimitPoint>,
    bound: f64,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(default = "empty_block")]
    block: QMatrix,
    tail: Tail,
    limit_set: Vec<LimitPoint>,
    bound: f64,
}

fn empty_block() -> QMatrix {
    QMatrix::zeros(0)
}

impl TryFrom<RawModel> for ModelOperator {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        Self::new(r.block, r.tail, r.limit_set, r.bound)
    }
}

impl ModelOperator {
    /// Rejects an empty limit set: the essential numerical range is never empty.
    pub fn new(block: QMatrix, tail: Tail, limit_set: Vec<LimitPoint>, bound: f64) -> Result<Self> {
        if limit_set.is_empty() {
            return Err(Error::EmptyLimitSet);
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidArgument(format!("bound must be finite and nonnegative, got {bound}")));
        }
        tail.validate()?;
        Ok(Self {
            block,
            tail,
            limit_set,
            bound,
        })
    }

    /// `diag(−1+i, 1+i) ⊕ diag(s_n)` with `s_n` running over `(−w, w)i ∩ ℚi`.
    pub fn rationals(half_width: f64) -> Self {
        Self::new(
            QMatrix::diag(&[Quaternion::complex(-1.0, 1.0), Quaternion::complex(1.0, 1.0)]),
            Tail::RationalsI { half_width },
            vec![LimitPoint::Segment {
                a: 0.0,
                b0: 0.0,
                b1: half_width,
            }],
            half_width,
        )
        .expect("valid model")
    }

    /// Empty block with a constant tail `q`.
    pub fn constant(q: Quaternion) -> Self {
        let s = csim(q);
        Self::new(QMatrix::zeros(0), Tail::Constant { value: q }, vec![LimitPoint::Sphere([s.a, s.b])], q.norm())
            .expect("valid model")
    }

    /// A matrix viewed as a model operator: zero tail, limit point at the origin.
    pub fn from_matrix(block: QMatrix) -> Self {
        Self::new(
            block,
            Tail::Constant { value: Quaternion::ZERO },
            vec![LimitPoint::Sphere([0.0, 0.0])],
            0.0,
        )
        .expect("valid model")
    }

    /// Gaussian block with a periodic tail of `period` Gaussian symbols.
    pub fn random_periodic<R: Rng + ?Sized>(rng: &mut R, block_dim: usize, period: usize) -> Self {
        let block = QMatrix::random_gaussian(block_dim, rng);
        let values: Vec<Quaternion> = (0..period.max(1)).map(|_| Quaternion::random_gaussian(rng)).collect();
        let limit_set = values
            .iter()
            .map(|&q| {
                let s = csim(q);
                LimitPoint::Sphere([s.a, s.b])
            })
            .collect();
        let bound = values.iter().map(|q| q.norm()).fold(0.0, f64::max);
        Self::new(block, Tail::Periodic { values }, limit_set, bound).expect("valid model")
    }

    pub fn block(&self) -> &QMatrix {
        &self.block
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn limit_set(&self) -> &[LimitPoint] {
        &self.limit_set
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Upper bound for `‖T‖`: the larger of the block's Frobenius norm and the tail bound.
    pub fn norm_bound(&self) -> f64 {
        self.block.frobenius_norm().max(self.bound)
    }

    pub fn with_block(&self, block: QMatrix) -> Self {
        Self {
            block,
            ..self.clone()
        }
    }

    /// `T*`: conjugate-transposed block and conjugated tail; the limit set is unchanged.
    pub fn adjoint(&self) -> Self {
        Self {
            block: self.block.adjoint(),
            tail: Tail::Conjugate {
                of: Box::new(self.tail.clone()),
            },
            ..self.clone()
        }
    }

    /// `aT + bI` for real `a`, `b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let n = self.block.n();
        Self {
            block: self.block.scale(a).add(&QMatrix::scalar(n, Quaternion::real(b))),
            tail: Tail::Affine {
                of: Box::new(self.tail.clone()),
                scale: a,
                shift: b,
            },
            limit_set: self.limit_set.iter().map(|l| l.map(a, b)).collect(),
            bound: a.abs() * self.bound + b.abs(),
        }
    }

    /// Checks the bound and the declared limit points against `s_1, …, s_check`.
    pub fn validate(&self, check: usize) -> Result<()> {
        let symbols = self.tail.symbols(check);
        let slack = 1e-12 * (1.0 + self.bound);
        for (k, s) in symbols.iter().enumerate() {
            if s.norm() > self.bound + slack {
                return Err(Error::BoundViolated {
                    index: k + 1,
                    norm: s.norm(),
                    bound: self.bound,
                });
            }
        }
        let cell = LIMIT_TOLERANCE;
        let key = |p: Point2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<Point2>> = HashMap::new();
        for s in &symbols {
            let c = csim(*s);
            let p = Point2::new(c.a, c.b);
            grid.entry(key(p)).or_default().push(p);
        }
        for limit in &self.limit_set {
            for p in limit.points() {
                let (kx, ky) = key(p);
                let mut nearest = f64::INFINITY;
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(v) = grid.get(&(kx + dx, ky + dy)) {
                            for q in v {
                                nearest = nearest.min(p.distance(*q));
                            }
                        }
                    }
                }
                if nearest > LIMIT_TOLERANCE {
                    return Err(Error::UndeclaredLimit {
                        point: p,
                        checked: check,
                        distance: nearest,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Finite section `diag(B, s_1, …, s_N)`.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    operator: DirectSum,
    section: usize,
}

impl TruncatedOperator {
    pub fn operator(&self) -> &DirectSum {
        &self.operator
    }

    pub fn section(&self) -> usize {
        self.section
    }

    /// Index of the first tail coordinate.
    pub fn block_dim(&self) -> usize {
        self.operator.block_dim()
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Tail symbol `s_n`, `n ≥ 1`.
    pub fn symbol(&self, n: usize) -> Quaternion {
        self.operator.diagonal()[n - 1]
    }

    pub fn matrix(&self) -> QMatrix {
        self.operator.to_dense()
    }

    pub fn apply(&self, x: &SparseVector) -> SparseVector {
        self.apply_with(x, false)
    }

    pub fn apply_adjoint(&self, x: &SparseVector) -> SparseVector {
        self.apply_with(x, true)
    }

    fn apply_with(&self, x: &SparseVector, adjoint: bool) -> SparseVector {
        let m = self.block_dim();
        let mut out = Vec::with_capacity(x.entries.len() + m);
        if x.entries.first().is_some_and(|&(i, _)| i < m) {
            let mut dense = vec![Quaternion::ZERO; m];
            for &(i, q) in x.entries.iter().take_while(|(i, _)| *i < m) {
                dense[i] = q;
            }
            let mut image = vec![Quaternion::ZERO; m];
            let mut off = 0;
            for b in self.operator.blocks() {
                let n = b.n();
                let (src, dst) = (&dense[off..off + n], &mut image[off..off + n]);
                if adjoint {
                    b.apply_adjoint_into(src, dst);
                } else {
                    b.apply_into(src, dst);
                }
                off += n;
            }
            out.extend(image.into_iter().enumerate().filter(|(_, q)| *q != Quaternion::ZERO));
        }
        let diag = self.operator.diagonal();
        for &(i, q) in x.entries.iter().filter(|(i, _)| *i >= m) {
            let d = diag[i - m];
            let d = if adjoint { d.conj() } else { d };
            out.push((i, d * q));
        }
        SparseVector { entries: out }
    }

    /// `⟨Tx, x⟩`.
    pub fn form(&self, x: &SparseVector) -> Quaternion {
        self.apply(x).inner(x)
    }
}

/// `diag(block, s_1, …, s_N)`.
pub fn truncate(model: &ModelOperator, n: usize) -> Result<TruncatedOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("section size must be at least 1".into()));
    }
    Ok(TruncatedOperator {
        operator: DirectSum::new(vec![model.block.clone()], model.tail.symbols(n)),
        section: n,
    })
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, Quaternion)>,
}

impl SparseVector {
    /// `e_i·u`.
    pub fn unit(i: usize, u: Quaternion) -> Self {
        Self {
            entries: vec![(i, u)],
        }
    }

    pub fn from_entries(mut entries: Vec<(usize, Quaternion)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, Quaternion)> = Vec::with_capacity(entries.len());
        for (i, q) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += q,
                _ => merged.push((i, q)),
            }
        }
        Self { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, Quaternion)] {
        &self.entries
    }

    /// Largest index plus one (zero when empty).
    pub fn support_end(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0 + 1)
    }

    /// `⟨self, other⟩ = Σ conj(other_k)·self_k`.
    pub fn inner(&self, other: &Self) -> Quaternion {
        let (mut i, mut j) = (0, 0);
        let mut acc = Quaternion::ZERO;
        while i < self.entries.len() && j < other.entries.len() {
            let (a, p) = self.entries[i];
            let (b, q) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += q.conj() * p;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, q)| q.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `a·self + b·other` for real `a`, `b`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(i, q)| (i, q * a))
            .chain(other.entries.iter().map(|&(i, q)| (i, q * b)))
            .collect();
        Self::from_entries(entries)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(i, q)| (i, q * s)).collect(),
        }
    }
}

/// Unit vectors `x_n` with `⟨Tx_n, x_n⟩ → target` and `x_n ⇀ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct EssentialSequence {
    pub target: Quaternion,
    pub vectors: Vec<SparseVector>,
    pub values: Vec<Quaternion>,
}

impl EssentialSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `|value_n − target|`.
    pub fn errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (*v - self.target).norm()).collect()
    }
}

/// Essential sequence of tail basis vectors `e_n·u_n` for `ω`.
///
/// The `k`-th element (0-based) is the first unused tail coordinate whose
/// symbol lies within `1/max(k, 1)` of `[ω]`; `u_n` turns `Im s_n` onto `Im ω`,
/// so the values converge to `ω` itself and not only to its sphere.
pub fn basis_subsequence(t: &TruncatedOperator, omega: Quaternion, len: usize) -> Result<EssentialSequence> {
    let target = csim(omega);
    let m = t.block_dim();
    let mut vectors = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    let mut n = 1;
    for k in 0..len {
        let tol = 1.0 / k.max(1) as f64;
        loop {
            if n > t.section() {
                return Err(Error::MissingEssentialSequence {
                    target: omega,
                    tolerance: tol,
                    checked: t.section(),
                });
            }
            let s = t.symbol(n);
            n += 1;
            if csim(s).distance(target) <= tol {
                let u = rotation_between(s, omega);
                let x = SparseVector::unit(m + n - 2, u);
                values.push(s.similar_by(u));
                vectors.push(x);
                break;
            }
        }
    }
    Ok(EssentialSequence {
        target: omega,
        vectors,
        values,
    })
}

/// The three quantities that must be small for a quasi-orthogonal pair.
pub fn quasi_orth_bounds(t: &TruncatedOperator, x: &SparseVector, y: &SparseVector) -> [f64; 3] {
    [
        x.inner(y).norm(),
        t.apply(x).inner(y).norm(),
        t.apply_adjoint(x).inner(y).norm(),
    ]
}

/// Smallest `M ≥ N` with `|⟨x_N, y_M⟩|`, `|⟨Tx_N, y_M⟩|`, `|⟨T*x_N, y_M⟩|` all at most `ε`.
pub fn quasi_orth_select(
    t: &TruncatedOperator,
    xs: &[SparseVector],
    ys: &[SparseVector],
    n: usize,
    eps: f64,
) -> Result<usize> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("ε must be positive".into()));
    }
    let x = xs.get(n).ok_or_else(|| Error::InvalidArgument(format!("index {n} beyond the x sequence")))?;
    let (tx, tsx) = (t.apply(x), t.apply_adjoint(x));
    let mut best = [f64::INFINITY; 3];
    for (m, y) in ys.iter().enumerate().skip(n) {
        let bounds = [x.inner(y).norm(), tx.inner(y).norm(), tsx.inner(y).norm()];
        if bounds.iter().all(|&b| b <= eps) {
            return Ok(m);
        }
        let worst = |b: &[f64; 3]| b.iter().copied().fold(0.0, f64::max);
        if worst(&bounds) < worst(&best) {
            best = bounds;
        }
    }
    Err(Error::QuasiOrthExhausted {
        index: n,
        epsilon: eps,
        best,
    })
}

/// One step `p` of the convex combination construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinationStep {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub bounds: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct Combination {
    pub sequence: EssentialSequence,
    pub steps: Vec<CombinationStep>,
}

/// `z̃_p = z_p/‖z_p‖` with `z_p = α x_{N_p} + β y_{M_p}`, `α² + β² = 1`, for `p = 1..=depth`.
///
/// `N_p = p`, and `M_p` is chosen by [`quasi_orth_select`] with `ε = 1/p`.
/// `alpha_sq` is the weight `α²` given to the first sequence.
pub fn convex_combination(
    t: &TruncatedOperator,
    first: &EssentialSequence,
    second: &EssentialSequence,
    alpha_sq: f64,
    depth: usize,
) -> Result<Combination> {
    if !(0.0..=1.0).contains(&alpha_sq) {
        return Err(Error::InvalidArgument(format!("α² = {alpha_sq} outside [0, 1]")));
    }
    let alpha = alpha_sq.sqrt();
    let beta = (1.0 - alpha_sq).sqrt();
    let target = first.target * alpha_sq + second.target * (1.0 - alpha_sq);
    let mut vectors = Vec::with_capacity(depth);
    let mut values = Vec::with_capacity(depth);
    let mut steps = Vec::with_capacity(depth);
    for p in 1..=depth {
        if p >= first.len() {
            return Err(Error::MissingEssentialSequence {
                target: first.target,
                tolerance: 1.0 / p as f64,
                checked: first.len(),
            });
        }
        let eps = 1.0 / p as f64;
        let m = quasi_orth_select(t, &first.vectors, &second.vectors, p, eps)?;
        let bounds = quasi_orth_bounds(t, &first.vectors[p], &second.vectors[m]);
        let z = first.vectors[p].combine(alpha, &second.vectors[m], beta);
        let z = z.scale(1.0 / z.norm());
        values.push(t.form(&z));
        vectors.push(z);
        steps.push(CombinationStep { p, n: p, m, bounds });
    }
    Ok(Combination {
        sequence: EssentialSequence {
            target,
            vectors,
            values,
        },
        steps,
    })
}

/// Constructive essential sequence for `α²ω₁ + β²ω₂` from the tail.
pub fn convex_combination_sequence(
    t: &TruncatedOperator,
    omega1: Quaternion,
    omega2: Quaternion,
    alpha_sq: f64,
    depth: usize,
) -> Result<Combination> {
    let len = 2 * depth + 2;
    let first = basis_subsequence(t, omega1, len)?;
    let second = basis_subsequence(t, omega2, len)?;
    convex_combination(t, &first, &second, alpha_sq, depth)
}

/// All bild points of the declared limit set together with their mirror images.
fn mirrored_limit_points(model: &ModelOperator) -> Vec<Point2> {
    model
        .limit_set
        .iter()
        .flat_map(|l| l.points())
        // `+ 0.0` keeps the mirror of the real axis at +0
        .flat_map(|p| [p, Point2::new(p.x, -p.y + 0.0)])
        .collect()
}

/// `B_e(T)` as a convex polygon in `(a, b)` with `b` of both signs.
pub fn essential_bild(model: &ModelOperator) -> Result<ConvexPolygon> {
    if model.limit_set.is_empty() {
        return Err(Error::EmptyLimitSet);
    }
    ConvexPolygon::hull(&mirrored_limit_points(model))
}

/// `B_e(T) ∩ {b ≥ 0}`.
pub fn essential_upper(model: &ModelOperator) -> Result<ConvexPolygon> {
    essential_bild(model)?
        .clip(Point2::new(0.0, -1.0), 0.0)
        .ok_or(Error::EmptyPolygon)
}

#[derive(Debug, Clone, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Distance from `csim(q)` to `B_e`.
    pub distance: f64,
    /// For members: final error of a constructive sequence for `csim(q)`.
    pub sequence_error: Option<f64>,
}

/// Whether `csim(q)` lies in `B_e(T)` up to `ε`, with a constructive cross-check for members.
///
/// The cross-check writes the point as a barycentric combination of a fan
/// triangle of polygon vertices and nests two convex combinations of their
/// basis subsequences.
pub fn we_membership(t: &TruncatedOperator, model: &ModelOperator, q: Quaternion, eps: f64, depth: usize) -> Result<Membership> {
    let poly = essential_bild(model)?;
    let s = csim(q);
    let p = Point2::new(s.a, s.b);
    let distance = poly.distance(p);
    let member = distance <= eps;
    let sequence_error = if member {
        let target = poly_nearest(&poly, p);
        Some(constructive_error(t, &poly, target, depth)?)
    } else {
        None
    };
    Ok(Membership {
        member,
        distance,
        sequence_error,
    })
}

fn poly_nearest(poly: &ConvexPolygon, p: Point2) -> Point2 {
    if poly.distance(p) == 0.0 {
        return p;
    }
    let v = poly.vertices();
    if v.len() == 1 {
        return v[0];
    }
    let mut best = (f64::INFINITY, v[0]);
    for (a, b) in poly.edges() {
        let d = b - a;
        let len2 = d.dot(d);
        let tt = if len2 == 0.0 { 0.0 } else { ((p - a).dot(d) / len2).clamp(0.0, 1.0) };
        let c = a.lerp(b, tt);
        if c.distance(p) < best.0 {
            best = (c.distance(p), c);
        }
    }
    best.1
}

fn complex_of(p: Point2) -> Quaternion {
    Quaternion::complex(p.x, p.y)
}

/// Barycentric weights of `p` in the triangle `(a, b, c)`, clamped for degenerate ones.
fn barycentric(p: Point2, a: Point2, b: Point2, c: Point2) -> Option<[f64; 3]> {
    let det = (b - a).cross(c - a);
    if det.abs() < 1e-300 {
        return None;
    }
    let l1 = (p - a).cross(c - a) / det;
    let l2 = (b - a).cross(p - a) / det;
    let l0 = 1.0 - l1 - l2;
    let tol = -1e-12;
    (l0 >= tol && l1 >= tol && l2 >= tol).then(|| [l0.max(0.0), l1.max(0.0), l2.max(0.0)])
}

/// `|⟨T z̃_depth, z̃_depth⟩ − target|` in bild coordinates for a nested construction.
fn constructive_error(t: &TruncatedOperator, poly: &ConvexPolygon, target: Point2, depth: usize) -> Result<f64> {
    let v = poly.vertices();
    let len = 4 * depth + 4;
    let (weights, corners): ([f64; 3], [Point2; 3]) = match v.len() {
        1 => ([1.0, 0.0, 0.0], [v[0]; 3]),
        2 => {
            let d = v[1] - v[0];
            let lam = ((target - v[0]).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            ([1.0 - lam, lam, 0.0], [v[0], v[1], v[1]])
        }
        _ => (1..v.len() - 1)
            .find_map(|k| barycentric(target, v[0], v[k], v[k + 1]).map(|w| (w, [v[0], v[k], v[k + 1]])))
            .ok_or(Error::EmptyPolygon)?,
    };
    let seqs: Vec<EssentialSequence> = corners
        .iter()
        .map(|&c| basis_subsequence(t, complex_of(c), len))
        .collect::<Result<_>>()?;
    let w01 = weights[0] + weights[1];
    let inner = if w01 > 0.0 {
        convex_combination(t, &seqs[0], &seqs[1], weights[0] / w01, 2 * depth + 1)?.sequence
    } else {
        seqs[0].clone()
    };
    let outer = convex_combination(t, &inner, &seqs[2], w01, depth)?.sequence;
    let last = *outer.values.last().expect("depth ≥ 1");
    let c = csim(last);
    Ok(Point2::new(c.a, c.b).distance(Point2::new(target.x, target.y.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const I: Quaternion = Quaternion::I;

    #[test]
    fn rational_enumeration_is_injective_and_dense() {
        let r = farey_half(2000);
        assert_eq!(r[0], 0.0);
        assert_eq!(&r[1..5], &[-1.0 / 3.0, 1.0 / 3.0, -0.25, 0.25]);
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), r.len());
        assert!(r.iter().all(|x| x.abs() < 0.5));
        let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(gap < 0.02);
    }

    #[test]
    fn truncation_examples() {
        let harmonic = ModelOperator::new(
            QMatrix::zeros(0),
            Tail::Harmonic { value: I },
            vec![LimitPoint::Sphere([0.0, 0.0])],
            1.0,
        )
        .unwrap();
        let t = truncate(&harmonic, 2).unwrap();
        assert_eq!(t.matrix(), QMatrix::diag(&[I, I * 0.5]));

        let rationals = ModelOperator::rationals(0.5);
        let t = truncate(&rationals, 1).unwrap();
        assert_eq!(
            t.matrix(),
            QMatrix::diag(&[Quaternion::complex(-1.0, 1.0), Quaternion::complex(1.0, 1.0), Quaternion::ZERO])
        );

        let q = Quaternion::new(1.0, 2.0, 0.0, -1.0);
        let c = ModelOperator::constant(q).with_block(QMatrix::zeros(1));
        assert_eq!(truncate(&c, 3).unwrap().matrix(), QMatrix::diag(&[Quaternion::ZERO, q, q, q]));
        assert!(truncate(&c, 0).is_err());
    }

    #[test]
    fn essential_bild_examples() {
        let e = essential_bild(&ModelOperator::rationals(0.5)).unwrap();
        assert_eq!(e.sorted_vertices(), vec![Point2::new(0.0, -0.5), Point2::new(0.0, 0.5)]);

        let e = essential_bild(&ModelOperator::constant(Quaternion::real(2.0))).unwrap();
        assert_eq!(e.vertices(), &[Point2::new(2.0, 0.0)]);

        let alt = ModelOperator::new(
            QMatrix::zeros(0),
            Tail::Periodic { values: vec![I, -I] },
            vec![LimitPoint::Sphere([0.0, 1.0])],
            1.0,
        )
        .unwrap();
        alt.validate(1000).unwrap();
        let e = essential_bild(&alt).unwrap();
        assert_eq!(e.sorted_vertices(), vec![Point2::new(0.0, -1.0), Point2::new(0.0, 1.0)]);
    }

    #[test]
    fn empty_limit_set_is_rejected() {
        let r = ModelOperator::new(QMatrix::zeros(0), Tail::Constant { value: I }, vec![], 1.0);
        assert!(matches!(r, Err(Error::EmptyLimitSet)));
        let json = r#"{"tail": {"kind": "constant", "value": [0, 1, 0, 0]}, "limit_set": [], "bound": 1}"#;
        assert!(serde_json::from_str::<ModelOperator>(json).is_err());
    }

    #[test]
    fn validation_catches_bad_declarations() {
        let rationals = ModelOperator::rationals(0.5);
        rationals.validate(DEFAULT_CHECK).unwrap();
        let wrong = ModelOperator::new(
            QMatrix::zeros(0),
            Tail::Constant { value: I },
            vec![LimitPoint::Sphere([0.0, 0.5])],
            1.0,
        )
        .unwrap();
        assert!(matches!(wrong.validate(100), Err(Error::UndeclaredLimit { .. })));
        let loose = ModelOperator::new(
            QMatrix::zeros(0),
            Tail::Constant { value: I * 2.0 },
            vec![LimitPoint::Sphere([0.0, 2.0])],
            1.0,
        )
        .unwrap();
        assert!(matches!(loose.validate(10), Err(Error::BoundViolated { index: 1, .. })));
    }

    #[test]
    fn operator_file_round_trip() {
        let json = r#"{
            "block": {"n": 2, "entries": [[[-1, 1, 0, 0], [0, 0, 0, 0]], [[0, 0, 0, 0], [1, 1, 0, 0]]]},
            "tail": {"kind": "rationals_i", "half_width": 0.5},
            "limit_set": [{"segment": {"a": 0, "b0": 0, "b1": 0.5}}],
            "bound": 0.5
        }"#;
        let m: ModelOperator = serde_json::from_str(json).unwrap();
        assert_eq!(m, ModelOperator::rationals(0.5));
        let back: ModelOperator = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn sparse_application_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = ModelOperator::new(
            QMatrix::random_gaussian(3, &mut rng),
            Tail::Harmonic { value: Quaternion::new(1.0, 2.0, 3.0, 4.0) },
            vec![LimitPoint::Sphere([0.0, 0.0])],
            5.5,
        )
        .unwrap();
        let t = truncate(&model, 5).unwrap();
        let dense = t.matrix();
        let x = SparseVector::from_entries(vec![
            (1, Quaternion::random_gaussian(&mut rng)),
            (4, Quaternion::random_gaussian(&mut rng)),
            (6, Quaternion::random_gaussian(&mut rng)),
        ]);
        let mut xd = crate::quat::QVector::zeros(8);
        for &(i, q) in x.entries() {
            xd.0[i] = q;
        }
        let yd = dense.apply(&xd).unwrap();
        let y = t.apply(&x);
        for k in 0..8 {
            let v = y.entries().iter().find(|e| e.0 == k).map_or(Quaternion::ZERO, |e| e.1);
            assert!((v - yd.0[k]).norm() < 1e-12);
        }
        let ya = dense.adjoint().apply(&xd).unwrap();
        let y = t.apply_adjoint(&x);
        for k in 0..8 {
            let v = y.entries().iter().find(|e| e.0 == k).map_or(Quaternion::ZERO, |e| e.1);
            assert!((v - ya.0[k]).norm() < 1e-12);
        }
        assert!((t.form(&x) - dense.form(&xd).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn quasi_orth_select_examples() {
        let model = ModelOperator::new(
            QMatrix::diag(&[I]),
            Tail::Periodic { values: vec![I, Quaternion::J] },
            vec![LimitPoint::Sphere([0.0, 1.0])],
            1.0,
        )
        .unwrap();
        let t = truncate(&model, 20).unwrap();
        let xs: Vec<SparseVector> = (0..10).map(|k| SparseVector::unit(2 * k, Quaternion::ONE)).collect();
        let ys: Vec<SparseVector> = (0..10).map(|k| SparseVector::unit(2 * k + 1, Quaternion::ONE)).collect();
        assert_eq!(quasi_orth_select(&t, &xs, &ys, 3, 1e-9).unwrap(), 3);
        // identical sequences: the partner must move past the shared coordinate
        assert_eq!(quasi_orth_select(&t, &xs, &xs, 3, 1e-9).unwrap(), 4);
        // huge ε accepts the first candidate
        assert_eq!(quasi_orth_select(&t, &xs, &xs, 3, 3.0).unwrap(), 3);
        let short = &xs[..4];
        assert!(matches!(
            quasi_orth_select(&t, short, short, 3, 0.5),
            Err(Error::QuasiOrthExhausted { index: 3, .. })
        ));
    }

    #[test]
    fn rationals_quasi_orth_on_tail_subsequence() {
        let model = ModelOperator::rationals(0.5);
        let t = truncate(&model, 2000).unwrap();
        let seq = basis_subsequence(&t, I * 0.5, 30).unwrap();
        let m = quasi_orth_select(&t, &seq.vectors, &seq.vectors, 5, 1e-6).unwrap();
        // the first later element with different support
        assert_eq!(m, 6);
        let b = quasi_orth_bounds(&t, &seq.vectors[5], &seq.vectors[6]);
        assert_eq!(b, [0.0; 3]);
    }

    #[test]
    fn combination_examples() {
        let model = ModelOperator::rationals(0.5);
        let t = truncate(&model, DEFAULT_CHECK).unwrap();
        let depth = 200;
        let tol = 5.0 * (2.0 + model.norm_bound()) / depth as f64;

        let c = convex_combination_sequence(&t, I * 0.5, -I * 0.5, 0.5, depth).unwrap();
        let last = *c.sequence.values.last().unwrap();
        assert!(last.norm() <= tol, "{last}");
        for s in &c.steps {
            assert!(s.bounds.iter().all(|&b| b <= 1.0 / s.p as f64));
        }

        let c = convex_combination_sequence(&t, I * 0.5, -I * 0.5, 1.0, depth).unwrap();
        assert!((*c.sequence.values.last().unwrap() - I * 0.5).norm() <= tol);

        let q = Quaternion::new(0.5, -0.25, 1.0, 0.0);
        let constant = ModelOperator::constant(q);
        let t = truncate(&constant, 1000).unwrap();
        let c = convex_combination_sequence(&t, q, q, 0.3, 100).unwrap();
        for v in &c.sequence.values {
            assert!((*v - q).norm() < 1e-12);
        }
    }

    #[test]
    fn membership_examples() {
        let model = ModelOperator::rationals(0.5);
        let t = truncate(&model, DEFAULT_CHECK).unwrap();
        let m = we_membership(&t, &model, I * 0.25, 1e-9, 100).unwrap();
        assert!(m.member);
        assert!(m.sequence_error.unwrap() < 5.0 * (2.0 + model.norm_bound()) / 100.0);
        assert!(!we_membership(&t, &model, Quaternion::ONE, 1e-9, 100).unwrap().member);
        let far = Quaternion::real(model.bound() + model.block().frobenius_norm() + 1.0);
        assert!(!we_membership(&t, &model, far, 1e-3, 100).unwrap().member);
    }
}
