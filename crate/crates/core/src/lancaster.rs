//! Inter-convex hulls and the closure of the bild of model operators.
//!
//! `iconv{A, B} = {αa + (1 − α)b : a ∈ A, b ∈ B, α ∈ [0, 1]}`. For a convex
//! polygon `P` and a finite point set `S` this is the union of the polygons
//! `conv(P ∪ {s})`, which is how the region is stored.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::essential::{essential_upper, truncate, ModelOperator};
use crate::geometry::{ConvexPolygon, Point2};
use crate::nr::{upper_bild, BildConfig, BildRegion};

/// Samples per unit length when probing a polygon for its distance to a region.
const PROBE_DENSITY: f64 = 1000.0;

/// Union of `conv(P ∪ {s})` over the kept satellites `s`.
#[derive(Debug, Clone, Serialize)]
pub struct IconvRegion {
    pub base: ConvexPolygon,
    /// Satellites not already covered by another member.
    pub satellites: Vec<Point2>,
    pub members: Vec<ConvexPolygon>,
}

/// `iconv(P, S)`; satellites inside earlier members are dropped, farthest first.
pub fn iconv(base: &ConvexPolygon, satellites: &[Point2]) -> Result<IconvRegion> {
    if base.is_empty() {
        return Err(Error::EmptyPolygon);
    }
    let mut order: Vec<(f64, Point2)> = satellites
        .iter()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .map(|&p| (base.distance(p), p))
        .filter(|(d, _)| *d > 0.0)
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.x.total_cmp(&b.1.x)).then(a.1.y.total_cmp(&b.1.y)));
    let mut kept: Vec<Point2> = Vec::new();
    let mut members: Vec<ConvexPolygon> = Vec::new();
    for (_, s) in order {
        if members.iter().any(|m| m.distance(s) == 0.0) {
            continue;
        }
        let mut pts = base.vertices().to_vec();
        pts.push(s);
        members.push(ConvexPolygon::hull(&pts)?);
        kept.push(s);
    }
    if members.is_empty() {
        members.push(base.clone());
    }
    Ok(IconvRegion {
        base: base.clone(),
        satellites: kept,
        members,
    })
}

impl IconvRegion {
    pub fn distance(&self, p: Point2) -> f64 {
        let mut best = f64::INFINITY;
        for m in &self.members {
            best = best.min(m.distance(p));
            if best == 0.0 {
                break;
            }
        }
        best
    }

    pub fn contains(&self, p: Point2, slack: f64) -> bool {
        self.distance(p) <= slack
    }

    /// Hull of the whole region.
    pub fn hull(&self) -> ConvexPolygon {
        let pts: Vec<Point2> = self.members.iter().flat_map(|m| m.vertices().iter().copied()).collect();
        ConvexPolygon::hull(&pts).expect("members are nonempty")
    }

    /// Hausdorff distance to a convex polygon.
    ///
    /// The region-to-polygon half is exact (attained at member vertices). The
    /// other half is a maximum over the polygon's vertices, its boundary at
    /// spacing `1/1000` and an interior grid, so it may underestimate by at
    /// most half the grid diagonal.
    pub fn hausdorff(&self, other: &ConvexPolygon) -> f64 {
        let one = self
            .members
            .iter()
            .flat_map(|m| m.vertices().iter())
            .map(|&v| other.distance(v))
            .fold(0.0, f64::max);
        let probes = polygon_probes(other);
        let two = probes
            .par_iter()
            .map(|&p| self.distance(p))
            .reduce(|| 0.0, f64::max);
        one.max(two)
    }
}

/// Vertices, dense boundary points and an interior grid of a convex polygon.
fn polygon_probes(poly: &ConvexPolygon) -> Vec<Point2> {
    let mut out: Vec<Point2> = poly.vertices().to_vec();
    for (a, b) in poly.edges() {
        let count = (a.distance(b) * PROBE_DENSITY).ceil() as usize;
        for k in 1..count {
            out.push(a.lerp(b, k as f64 / count as f64));
        }
    }
    if poly.len() >= 3 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in poly.vertices() {
            x0 = x0.min(v.x);
            x1 = x1.max(v.x);
            y0 = y0.min(v.y);
            y1 = y1.max(v.y);
        }
        let cells = 200usize;
        for i in 0..=cells {
            for j in 0..=cells {
                let p = Point2::new(
                    x0 + (x1 - x0) * i as f64 / cells as f64,
                    y0 + (y1 - y0) * j as f64 / cells as f64,
                );
                if poly.distance(p) == 0.0 {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Upper bild of the finite sections at each `N`.
pub fn section_regions(model: &ModelOperator, sections: &[usize], config: &BildConfig) -> Result<Vec<(usize, BildRegion)>> {
    sections
        .iter()
        .map(|&n| {
            let t = truncate(model, n)?;
            Ok((n, upper_bild(t.operator(), config)?))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LancasterRow {
    pub section: usize,
    /// Hausdorff distance from `iconv(B_e⁺, inner points)` to the hull of the inner points.
    pub to_inner_hull: f64,
    /// Hausdorff distance to the support-function outer polygon.
    pub to_outer: f64,
    /// Hausdorff distance to the expected closure, when one is given.
    pub to_target: Option<f64>,
    pub bild_gap: f64,
    pub satellites: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LancasterReport {
    pub rows: Vec<LancasterRow>,
    /// Primary distances never grow by more than `1e-3` from one section to the next.
    pub monotone: bool,
    pub final_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl LancasterRow {
    /// Distance to the target when given, otherwise to the inner hull.
    pub fn primary(&self) -> f64 {
        self.to_target.unwrap_or(self.to_inner_hull)
    }
}

/// Iconv region of `B_e⁺` with the attained points of one section.
pub fn section_iconv(model: &ModelOperator, region: &BildRegion) -> Result<IconvRegion> {
    iconv(&essential_upper(model)?, &region.inner_points)
}

/// Compares `iconv(B_e⁺, B(T_N))` with the section bilds and an optional expected closure.
pub fn lancaster_from_regions(
    model: &ModelOperator,
    regions: &[(usize, BildRegion)],
    target: Option<&ConvexPolygon>,
    tolerance: f64,
) -> Result<(LancasterReport, Vec<IconvRegion>)> {
    let mut rows = Vec::with_capacity(regions.len());
    let mut iconvs = Vec::with_capacity(regions.len());
    for (n, region) in regions {
        let l = section_iconv(model, region)?;
        rows.push(LancasterRow {
            section: *n,
            to_inner_hull: l.hausdorff(&region.inner_hull),
            to_outer: l.hausdorff(&region.outer_polygon),
            to_target: target.map(|t| l.hausdorff(t)),
            bild_gap: region.hausdorff_gap,
            satellites: l.satellites.len(),
        });
        iconvs.push(l);
    }
    let monotone = rows.windows(2).all(|w| w[1].primary() <= w[0].primary() + 1e-3);
    let final_distance = rows.last().map_or(f64::INFINITY, LancasterRow::primary);
    let passed = monotone && final_distance <= tolerance;
    Ok((
        LancasterReport {
            rows,
            monotone,
            final_distance,
            tolerance,
            passed,
        },
        iconvs,
    ))
}

pub fn lancaster_check(
    model: &ModelOperator,
    sections: &[usize],
    config: &BildConfig,
    target: Option<&ConvexPolygon>,
    tolerance: f64,
) -> Result<LancasterReport> {
    let regions = section_regions(model, sections, config)?;
    Ok(lancaster_from_regions(model, &regions, target, tolerance)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub edge: [Point2; 2],
    /// `(N, residual)`.
    pub residuals: Vec<(usize, f64)>,
    pub strictly_decreasing: bool,
    pub all_positive: bool,
}

/// Distance from the edge to the attained hull of a section.
///
/// Distance to a convex set is convex, so its maximum over the edge sits at an
/// endpoint.
pub fn edge_residual(region: &BildRegion, edge: [Point2; 2]) -> f64 {
    region.inner_hull.distance(edge[0]).max(region.inner_hull.distance(edge[1]))
}

pub fn nonclosedness_from_regions(regions: &[(usize, BildRegion)], edge: [Point2; 2]) -> ProbeReport {
    let residuals: Vec<(usize, f64)> = regions.iter().map(|(n, r)| (*n, edge_residual(r, edge))).collect();
    ProbeReport {
        edge,
        strictly_decreasing: residuals.windows(2).all(|w| w[1].1 < w[0].1),
        all_positive: residuals.iter().all(|r| r.1 > 0.0),
        residuals,
    }
}

pub fn nonclosedness_probe(model: &ModelOperator, edge: [Point2; 2], sections: &[usize], config: &BildConfig) -> Result<ProbeReport> {
    let regions = section_regions(model, sections, config)?;
    Ok(nonclosedness_from_regions(&regions, edge))
}

/// Closure of the upper bild of the rationals example with half-width 1/2:
/// `conv{(−1,1), (1,1), (1/3,0), (−1/3,0)}`.
pub fn rationals_closure() -> ConvexPolygon {
    ConvexPolygon::hull(&[
        Point2::new(-1.0, 1.0),
        Point2::new(1.0, 1.0),
        Point2::new(1.0 / 3.0, 0.0),
        Point2::new(-1.0 / 3.0, 0.0),
    ])
    .expect("four points")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::essential::{LimitPoint, Tail};
    use crate::matrix::QMatrix;
    use crate::quat::Quaternion;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn small(seed: u64) -> BildConfig {
        BildConfig {
            samples: 5_000,
            angles: 60,
            seed,
            refine: true,
        }
    }

    #[test]
    fn singletons_give_a_segment() {
        let base = ConvexPolygon::hull(&[p(0., 0.)]).unwrap();
        let r = iconv(&base, &[p(1., 1.)]).unwrap();
        assert_eq!(r.members.len(), 1);
        assert_eq!(r.members[0].sorted_vertices(), vec![p(0., 0.), p(1., 1.)]);
        assert!(r.contains(p(0.5, 0.5), 1e-15));
        assert!(!r.contains(p(0.5, 0.4), 1e-3));
    }

    #[test]
    fn absorbed_satellites_leave_the_base() {
        let base = ConvexPolygon::rectangle(0., 1., 0., 1.);
        let r = iconv(&base, &[p(0.5, 0.5), p(1., 1.)]).unwrap();
        assert!(r.satellites.is_empty());
        assert_eq!(r.members, vec![base]);
    }

    #[test]
    fn segment_base_with_corner_satellites() {
        let base = ConvexPolygon::hull(&[p(0., -0.5), p(0., 0.5)]).unwrap();
        let r = iconv(&base, &[p(-1., 1.), p(1., 1.), p(0., 0.)]).unwrap();
        assert_eq!(r.satellites.len(), 2);
        // the region is not convex: the midpoint of the two satellites is missing
        assert!(!r.contains(p(0., 1.), 1e-3));
        assert!(r.contains(p(-0.5, 0.75), 1e-12));
    }

    #[test]
    fn hausdorff_to_own_hull_detects_the_notch() {
        let base = ConvexPolygon::hull(&[p(0., 0.)]).unwrap();
        let r = iconv(&base, &[p(-1., 1.), p(1., 1.)]).unwrap();
        let hull = r.hull();
        // (0, 1) is at distance 1/√2 from both segments
        assert!((r.hausdorff(&hull) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn constant_tails() {
        // a real constant gives a single point
        let model = ModelOperator::constant(Quaternion::real(-0.5));
        let point = ConvexPolygon::hull(&[p(-0.5, 0.)]).unwrap();
        let report = lancaster_check(&model, &[5, 10], &small(1), Some(&point), 1e-9).unwrap();
        assert!(report.passed, "{report:?}");

        // otherwise averages over the sphere fill the chord down to the real axis
        let q = Quaternion::new(0.5, 0.0, 2.0, 0.0);
        let model = ModelOperator::constant(q);
        let chord = ConvexPolygon::hull(&[p(0.5, 0.), p(0.5, 2.)]).unwrap();
        let report = lancaster_check(&model, &[5, 10], &small(1), Some(&chord), 1e-9).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn block_with_vanishing_tail_closes_to_a_segment() {
        let model = ModelOperator::new(
            QMatrix::diag(&[Quaternion::real(3.0)]),
            Tail::Harmonic { value: Quaternion::ONE },
            vec![LimitPoint::Sphere([0.0, 0.0])],
            1.0,
        )
        .unwrap();
        let target = ConvexPolygon::hull(&[p(0., 0.), p(3., 0.)]).unwrap();
        let report = lancaster_check(&model, &[10, 40], &small(2), Some(&target), 1e-9).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn pure_matrix_matches_padded_bild() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
        let block = QMatrix::random_gaussian(2, &mut rng);
        let model = ModelOperator::from_matrix(block);
        let regions = section_regions(&model, &[1], &small(3)).unwrap();
        let (report, _) = lancaster_from_regions(&model, &regions, None, 1e-2).unwrap();
        // the padded bild is convex and contains the origin, so the star of segments fills it
        assert!(report.rows[0].to_inner_hull < 2e-2, "{report:?}");
    }

    #[test]
    fn closed_edge_has_zero_residual() {
        let model = ModelOperator::new(
            QMatrix::diag(&[Quaternion::real(2.0), Quaternion::complex(0.0, 2.0)]),
            Tail::Constant { value: Quaternion::complex(0.0, 2.0) },
            vec![LimitPoint::Sphere([0.0, 2.0])],
            2.0,
        )
        .unwrap();
        let report = nonclosedness_probe(&model, [p(2., 0.), p(0., 2.)], &[3, 6], &small(4)).unwrap();
        for (_, r) in &report.residuals {
            assert!(*r <= 1e-9);
        }
    }
}
