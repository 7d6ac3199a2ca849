//! Gauss-type quadrature on segments, triangles, squares and on the convex
//! pieces of cut elements.
//!
//! Reference rules live on `[0, 1]`, the triangle `(0,0), (1,0), (0,1)` and
//! the square `[0, 1]²`; they are built once per degree and shared.

use std::sync::OnceLock;

use thiserror::Error;

use crate::geometry::{polygon_area, Point};

pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("unsupported quadrature degree {0} (supported: 1..={MAX_DEGREE})")]
    UnsupportedDegree(usize),
    #[error("degenerate polygon with area {area:e}")]
    DegeneratePolygon { area: f64 },
}

/// Points and positive weights, exact for polynomials up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    fn with_capacity(degree: usize, n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(Point) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    fn extend(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// One-dimensional rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SegmentRule {
    /// Map onto the segment `p0–p1`; weights become physical lengths.
    pub fn map_to(&self, p0: Point, p1: Point) -> QuadratureRule {
        let len = p0.distance(p1);
        let mut rule = QuadratureRule::with_capacity(self.degree, self.points.len());
        for (&t, &w) in self.points.iter().zip(&self.weights) {
            rule.points.push(p0.lerp(p1, t));
            rule.weights.push(w * len);
        }
        rule
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn check_degree(degree: usize) -> Result<(), QuadratureError> {
    if (1..=MAX_DEGREE).contains(&degree) {
        Ok(())
    } else {
        Err(QuadratureError::UnsupportedDegree(degree))
    }
}

/// Gauss points needed for exactness at `degree` (`2n − 1 ≥ degree`).
fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

fn cached<T: Clone>(
    cells: &'static [OnceLock<T>; MAX_DEGREE + 1],
    degree: usize,
    build: impl FnOnce() -> T,
) -> Result<&'static T, QuadratureError> {
    check_degree(degree)?;
    Ok(cells[degree].get_or_init(build))
}

/// Gauss–Legendre rule on `[0, 1]` exact to `degree`.
pub fn segment_rule(degree: usize) -> Result<&'static SegmentRule, QuadratureError> {
    static CACHE: [OnceLock<SegmentRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    cached(&CACHE, degree, || {
        let (x, w) = gauss_legendre(points_for_degree(degree));
        SegmentRule {
            points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
            degree,
        }
    })
}

/// Tensor Gauss–Legendre rule on `[0, 1]²`.
pub fn rect_rule(degree: usize) -> Result<&'static QuadratureRule, QuadratureError> {
    static CACHE: [OnceLock<QuadratureRule>; MAX_DEGREE + 1] =
        [const { OnceLock::new() }; MAX_DEGREE + 1];
    let seg = segment_rule(degree)?;
    cached(&CACHE, degree, || {
        let n = seg.points.len();
        let mut rule = QuadratureRule::with_capacity(degree, n * n);
        for (j, &y) in seg.points.iter().enumerate() {
            for (i, &x) in seg.points.iter().enumerate() {
                rule.points.push(Point::new(x, y));
                rule.weights.push(seg.weights[i] * seg.weights[j]);
            }
        }
        rule
    })
}

/// Rule on the reference triangle `(0,0), (1,0), (0,1)` (weights sum to ½).
///
/// Degrees 1, 2 and 3–5 use the symmetric centroid, three-point and
/// seven-point rules; higher degrees use a collapsed (Duffy) Gauss product
/// rule, which keeps all weights positive.
pub fn triangle_rule(degree: usize) -> Result<&'static QuadratureRule, QuadratureError> {
    static CACHE: [OnceLock<QuadratureRule>; MAX_DEGREE + 1] =
        [const { OnceLock::new() }; MAX_DEGREE + 1];
    cached(&CACHE, degree, || match degree {
        1 => QuadratureRule {
            points: vec![Point::new(1.0 / 3.0, 1.0 / 3.0)],
            weights: vec![0.5],
            degree,
        },
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            QuadratureRule {
                points: vec![Point::new(a, a), Point::new(b, a), Point::new(a, b)],
                weights: vec![1.0 / 6.0; 3],
                degree,
            }
        }
        3..=5 => {
            let s15 = 15f64.sqrt();
            let a1 = (6.0 - s15) / 21.0;
            let a2 = (6.0 + s15) / 21.0;
            let w1 = (155.0 - s15) / 2400.0;
            let w2 = (155.0 + s15) / 2400.0;
            let mut rule = QuadratureRule::with_capacity(degree, 7);
            rule.points.push(Point::new(1.0 / 3.0, 1.0 / 3.0));
            rule.weights.push(9.0 / 80.0);
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                for p in [Point::new(a, a), Point::new(b, a), Point::new(a, b)] {
                    rule.points.push(p);
                    rule.weights.push(w);
                }
            }
            rule
        }
        _ => {
            // the Jacobian adds one degree in u
            let n = points_for_degree(degree + 1);
            let (x, w) = gauss_legendre(n);
            let mut rule = QuadratureRule::with_capacity(degree, n * n);
            for i in 0..n {
                let u = 0.5 * (x[i] + 1.0);
                for j in 0..n {
                    let v = 0.5 * (x[j] + 1.0);
                    rule.points.push(Point::new(u, (1.0 - u) * v));
                    rule.weights.push(0.25 * w[i] * w[j] * (1.0 - u));
                }
            }
            rule
        }
    })
}

/// Map a reference triangle rule onto triangle `a, b, c`.
pub fn map_triangle(rule: &QuadratureRule, a: Point, b: Point, c: Point) -> QuadratureRule {
    let (e1, e2) = (b - a, c - a);
    let jac = e1.cross(e2).abs();
    let mut out = QuadratureRule::with_capacity(rule.degree, rule.len());
    for (p, w) in rule.iter() {
        out.points.push(a + e1 * p.x + e2 * p.y);
        out.weights.push(w * jac);
    }
    out
}

/// Map a reference square rule onto the axis-aligned square with lower-left
/// corner `origin` and side `h`.
pub fn map_square(rule: &QuadratureRule, origin: Point, h: f64) -> QuadratureRule {
    let mut out = QuadratureRule::with_capacity(rule.degree, rule.len());
    for (p, w) in rule.iter() {
        out.points.push(origin + p * h);
        out.weights.push(w * h * h);
    }
    out
}

fn diameter_sq(poly: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in poly.iter().enumerate() {
        for q in &poly[i + 1..] {
            d = d.max((*p - *q).dot(*p - *q));
        }
    }
    d
}

/// Fan-triangulate a convex polygon from its first vertex and map a triangle
/// rule onto every fan triangle.
pub fn split_polygon_rule(poly: &[Point], degree: usize) -> Result<QuadratureRule, QuadratureError> {
    refined_polygon_rule(poly, degree, 0)
}

/// As [`split_polygon_rule`], with every fan triangle uniformly refined
/// `depth` times (4^depth sub-triangles each).
pub fn refined_polygon_rule(
    poly: &[Point],
    degree: usize,
    depth: u32,
) -> Result<QuadratureRule, QuadratureError> {
    let base = triangle_rule(degree)?;
    let area = polygon_area(poly).abs();
    let scale = diameter_sq(poly);
    if poly.len() < 3 || area < 1e-14 * scale || area == 0.0 {
        return Err(QuadratureError::DegeneratePolygon { area });
    }
    let mut rule = QuadratureRule::with_capacity(degree, base.len() * (poly.len() - 2) * 4usize.pow(depth));
    for i in 1..poly.len() - 1 {
        let (a, b, c) = (poly[0], poly[i], poly[i + 1]);
        if (b - a).cross(c - a).abs() <= 1e-15 * scale {
            continue;
        }
        push_refined(&mut rule, base, a, b, c, depth);
    }
    Ok(rule)
}

fn push_refined(
    rule: &mut QuadratureRule,
    base: &QuadratureRule,
    a: Point,
    b: Point,
    c: Point,
    depth: u32,
) {
    if depth == 0 {
        rule.extend(map_triangle(base, a, b, c));
        return;
    }
    let (ab, bc, ca) = (a.midpoint(b), b.midpoint(c), c.midpoint(a));
    push_refined(rule, base, a, ab, ca, depth - 1);
    push_refined(rule, base, ab, b, bc, depth - 1);
    push_refined(rule, base, ca, bc, c, depth - 1);
    push_refined(rule, base, ab, bc, ca, depth - 1);
}

/// Gauss rule on the segment `p0–p1`, split at `intersection` when present.
pub fn split_edge_rule(
    p0: Point,
    p1: Point,
    intersection: Option<Point>,
    degree: usize,
) -> Result<QuadratureRule, QuadratureError> {
    let seg = segment_rule(degree)?;
    Ok(match intersection {
        None => seg.map_to(p0, p1),
        Some(x) => {
            let mut rule = seg.map_to(p0, x);
            rule.extend(seg.map_to(x, p1));
            rule
        }
    })
}
