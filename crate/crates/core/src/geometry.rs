//! Planar convex geometry in bild coordinates `(a, b) = (Re q, |Im q|)`.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        Self::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

/// `(b - a) × (c - a)`; positive for a counter-clockwise turn.
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let along = (p - a).dot(d);
    // exactly collinear points between the ends are on the segment; skip the rounding of lerp
    if orient(a, b, p) == 0.0 && (0.0..=len2).contains(&along) {
        return 0.0;
    }
    let t = (along / len2).clamp(0.0, 1.0);
    p.distance(a.lerp(b, t))
}

/// Convex hull by Andrew's monotone chain; counter-clockwise, collinear points dropped.
///
/// Returns one vertex for a point set and two for a collinear one.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points
        .iter()
        .copied()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .collect();
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && lower[0] == lower[1] {
        lower.truncate(1);
    }
    lower
}

/// Convex polygon with counter-clockwise vertices; may degenerate to a segment or a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Hull of an arbitrary point set.
    pub fn hull(points: &[Point2]) -> Result<Self> {
        let vertices = convex_hull(points);
        if vertices.is_empty() {
            return Err(Error::EmptyPolygon);
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            s += self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        0.5 * s
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max(p.distance(*q));
            }
        }
        d
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        let count = match n {
            0 | 1 => 0,
            2 => 1,
            _ => n,
        };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Euclidean distance from `p` to the polygon (zero inside).
    pub fn distance(&self, p: Point2) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => p.distance(self.vertices[0]),
            2 => point_segment_distance(p, self.vertices[0], self.vertices[1]),
            n => {
                let inside = (0..n).all(|i| {
                    orient(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0.0
                });
                if inside {
                    return 0.0;
                }
                self.edges()
                    .map(|(a, b)| point_segment_distance(p, a, b))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, p: Point2, slack: f64) -> bool {
        self.distance(p) <= slack
    }

    /// `max` of `n·p` over the polygon.
    pub fn support(&self, n: Point2) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(n))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Hausdorff distance between two convex polygons, attained at vertices.
    pub fn hausdorff(&self, other: &Self) -> f64 {
        let one = self
            .vertices
            .iter()
            .map(|&v| other.distance(v))
            .fold(0.0, f64::max);
        let two = other
            .vertices
            .iter()
            .map(|&v| self.distance(v))
            .fold(0.0, f64::max);
        one.max(two)
    }

    /// Intersection with the half-plane `{p : normal·p <= offset}`.
    pub fn clip(&self, normal: Point2, offset: f64) -> Option<Self> {
        let n = self.vertices.len();
        let side = |p: Point2| normal.dot(p) - offset;
        let mut out: Vec<Point2> = Vec::with_capacity(n + 1);
        if n == 1 {
            return (side(self.vertices[0]) <= 0.0).then(|| self.clone());
        }
        let ring: Vec<(Point2, Point2)> = if n == 2 {
            vec![(self.vertices[0], self.vertices[1])]
        } else {
            self.edges().collect()
        };
        for (a, b) in ring {
            let (sa, sb) = (side(a), side(b));
            if sa <= 0.0 {
                out.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                out.push(a.lerp(b, t));
            }
            if n == 2 && sb <= 0.0 {
                out.push(b);
            }
        }
        let hull = convex_hull(&out);
        (!hull.is_empty()).then_some(Self { vertices: hull })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pts = [
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ];
        Self {
            vertices: convex_hull(&pts),
        }
    }

    /// Image under `(x, y) ↦ (sx·x + tx, sy·y + ty)`.
    pub fn map_affine(&self, sx: f64, tx: f64, sy: f64, ty: f64) -> Self {
        let pts: Vec<Point2> = self
            .vertices
            .iter()
            .map(|p| Point2::new(sx * p.x + tx, sy * p.y + ty))
            .collect();
        Self {
            vertices: convex_hull(&pts),
        }
    }

    /// Vertices sorted lexicographically, for orientation-free comparison.
    pub fn sorted_vertices(&self) -> Vec<Point2> {
        let mut v = self.vertices.clone();
        v.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = [p(0., 0.), p(1., 0.), p(2., 0.), p(2., 2.), p(0., 2.), p(1., 1.), p(0., 1.)];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![p(0., 0.), p(2., 0.), p(2., 2.), p(0., 2.)]);
    }

    #[test]
    fn hull_degenerate_cases() {
        assert_eq!(convex_hull(&[p(1., 1.), p(1., 1.)]), vec![p(1., 1.)]);
        assert_eq!(
            convex_hull(&[p(0., -0.5), p(0., 0.), p(0., 0.25), p(0., 0.5)]),
            vec![p(0., -0.5), p(0., 0.5)]
        );
        assert!(convex_hull(&[]).is_empty());
    }

    #[test]
    fn distance_inside_outside_and_degenerate() {
        let sq = ConvexPolygon::rectangle(0., 1., 0., 1.);
        assert_eq!(sq.distance(p(0.5, 0.5)), 0.0);
        assert!((sq.distance(p(2., 0.5)) - 1.0).abs() < 1e-15);
        let seg = ConvexPolygon::hull(&[p(0., -1.), p(0., 1.)]).unwrap();
        assert!((seg.distance(p(3., 0.)) - 3.0).abs() < 1e-15);
        let pt = ConvexPolygon::hull(&[p(1., 1.)]).unwrap();
        assert!((pt.distance(p(4., 5.)) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_of_nested_squares() {
        let a = ConvexPolygon::rectangle(0., 1., 0., 1.);
        let b = ConvexPolygon::rectangle(0., 2., 0., 1.);
        assert!((a.hausdorff(&b) - 1.0).abs() < 1e-15);
        assert_eq!(a.hausdorff(&a), 0.0);
    }

    #[test]
    fn clip_square_by_diagonal() {
        let sq = ConvexPolygon::rectangle(0., 1., 0., 1.);
        let tri = sq.clip(p(1., 1.), 1.0).unwrap();
        assert!((tri.area() - 0.5).abs() < 1e-15);
        assert!(sq.clip(p(1., 0.), -1.0).is_none());
        // clipping a square through a single vertex leaves that vertex
        let corner = sq.clip(p(1., 1.), 0.0).unwrap();
        assert_eq!(corner.vertices(), &[p(0., 0.)]);
    }

    #[test]
    fn clip_segment() {
        let seg = ConvexPolygon::hull(&[p(0., 0.), p(2., 0.)]).unwrap();
        let half = seg.clip(p(1., 0.), 1.0).unwrap();
        assert_eq!(half.vertices(), &[p(0., 0.), p(1., 0.)]);
    }

    #[test]
    fn affine_map_reflects_orientation_consistently() {
        let tri = ConvexPolygon::hull(&[p(0., 0.), p(1., 0.), p(0., 1.)]).unwrap();
        let m = tri.map_affine(-2.0, 1.0, 2.0, 0.0);
        assert!((m.area() - 2.0).abs() < 1e-15);
    }
}
