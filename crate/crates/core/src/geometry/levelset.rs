use std::fmt;

use super::{GeometryError, Point, Side};

/// Implicit interface curve. Negative values are inside `Ω⁻`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSet {
    /// `φ = (x − cx)² + (y − cy)² − r²`
    Circle { cx: f64, cy: f64, r: f64 },
    /// `φ = a·x + b·y + c`
    Line { a: f64, b: f64, c: f64 },
}

impl LevelSet {
    pub fn value(&self, p: Point) -> f64 {
        match *self {
            LevelSet::Circle { cx, cy, r } => {
                let (dx, dy) = (p.x - cx, p.y - cy);
                dx * dx + dy * dy - r * r
            }
            LevelSet::Line { a, b, c } => a * p.x + b * p.y + c,
        }
    }

    pub fn gradient(&self, p: Point) -> Point {
        match *self {
            LevelSet::Circle { cx, cy, .. } => Point::new(2.0 * (p.x - cx), 2.0 * (p.y - cy)),
            LevelSet::Line { a, b, .. } => Point::new(a, b),
        }
    }

    /// Parse `circle(cx,cy,r)` or `line(a,b,c)`.
    pub fn parse(s: &str) -> Result<Self, GeometryError> {
        let bad = || GeometryError::UnknownLevelSet(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if args.len() != 3 || args.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        match name.as_str() {
            "circle" if args[2] > 0.0 => Ok(LevelSet::Circle {
                cx: args[0],
                cy: args[1],
                r: args[2],
            }),
            "line" if args[0] != 0.0 || args[1] != 0.0 => Ok(LevelSet::Line {
                a: args[0],
                b: args[1],
                c: args[2],
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSet::Circle { cx, cy, r } => write!(f, "circle({cx},{cy},{r})"),
            LevelSet::Line { a, b, c } => write!(f, "line({a},{b},{c})"),
        }
    }
}

/// Number of sub-segments sampled when checking a segment for repeated sign
/// changes.
const CROSSING_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceGeometry {
    pub levelset: LevelSet,
    /// Vertices with `|φ| < snap_tol · h` are treated as lying on the interface.
    pub snap_tol: f64,
}

impl InterfaceGeometry {
    pub fn new(levelset: LevelSet) -> Self {
        Self {
            levelset,
            snap_tol: 1e-10,
        }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.levelset.value(p)
    }

    /// Exact side of a point; points on the curve belong to `Ω⁻`.
    pub fn side(&self, p: Point) -> Side {
        if self.levelset.value(p) <= 0.0 {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    /// Sign of `φ` after vertex snapping: −1, 0 (on the interface) or +1.
    pub fn snapped_sign(&self, value: f64, h: f64) -> i8 {
        if value.abs() < self.snap_tol * h {
            0
        } else if value < 0.0 {
            -1
        } else {
            1
        }
    }

    /// Interface crossing strictly inside the segment `p0–p1`.
    ///
    /// Returns `None` if the endpoint signs agree or either endpoint snaps onto
    /// the interface. Fails if `φ` changes sign more than once along a
    /// 16-piece sampling of the segment.
    pub fn edge_intersection(
        &self,
        p0: Point,
        p1: Point,
        h: f64,
    ) -> Result<Option<Point>, GeometryError> {
        let phi = |t: f64| self.levelset.value(p0.lerp(p1, t));
        let mut samples = [0.0; CROSSING_SAMPLES + 1];
        for (k, s) in samples.iter_mut().enumerate() {
            *s = phi(k as f64 / CROSSING_SAMPLES as f64);
        }
        let s0 = self.snapped_sign(samples[0], h);
        let s1 = self.snapped_sign(samples[CROSSING_SAMPLES], h);

        let mut changes = 0;
        let mut bracket = None;
        let mut prev: Option<(usize, bool)> = None;
        for (k, &v) in samples.iter().enumerate() {
            let snapped = (k == 0 && s0 == 0) || (k == CROSSING_SAMPLES && s1 == 0);
            if snapped || v == 0.0 {
                continue;
            }
            let neg = v < 0.0;
            if let Some((j, pneg)) = prev {
                if pneg != neg {
                    changes += 1;
                    bracket = Some((j, k));
                }
            }
            prev = Some((k, neg));
        }
        if changes > 1 {
            return Err(GeometryError::MultipleCrossings { p0, p1 });
        }
        if s0 == 0 || s1 == 0 || s0 == s1 {
            return Ok(None);
        }
        let (j, k) = bracket.expect("opposite endpoint signs imply a bracket");
        let mut lo = j as f64 / CROSSING_SAMPLES as f64;
        let mut hi = k as f64 / CROSSING_SAMPLES as f64;
        let lo_neg = samples[j] < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = phi(mid);
            if v == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (v < 0.0) == lo_neg {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(p0.lerp(p1, 0.5 * (lo + hi))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64) -> InterfaceGeometry {
        InterfaceGeometry::new(LevelSet::Circle { cx: 0.0, cy: 0.0, r })
    }

    #[test]
    fn line_crossing() {
        let g = InterfaceGeometry::new(LevelSet::Line { a: 1.0, b: 0.0, c: -0.5 });
        let x = g
            .edge_intersection(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0)
            .unwrap()
            .unwrap();
        assert!((x.x - 0.5).abs() < 1e-15 && x.y == 0.0);
    }

    #[test]
    fn circle_axis_crossing() {
        let x = circle(0.5)
            .edge_intersection(Point::new(0.0, 0.0), Point::new(0.0, 1.0), 1.0)
            .unwrap()
            .unwrap();
        assert!(x.x == 0.0 && (x.y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn paper_radius_crossing_matches_scalar_root() {
        let r0 = std::f64::consts::PI / 6.28;
        // independent scalar root of x² − r0² on [0.4, 0.6] by regula falsi
        let f = |x: f64| x * x - r0 * r0;
        let (mut a, mut b) = (0.4_f64, 0.6_f64);
        let mut root = a;
        for _ in 0..200 {
            let c = b - f(b) * (b - a) / (f(b) - f(a));
            if f(c) * f(a) < 0.0 {
                b = c;
            } else {
                a = c;
            }
            root = c;
        }
        let x = circle(r0)
            .edge_intersection(Point::new(0.4, 0.0), Point::new(0.6, 0.0), 0.2)
            .unwrap()
            .unwrap();
        assert!((x.x - root).abs() < 1e-12, "{} vs {}", x.x, root);
        assert!((x.x - 0.500_253).abs() < 1e-6);
    }

    #[test]
    fn snapped_endpoint_reports_no_crossing() {
        let g = InterfaceGeometry::new(LevelSet::Line { a: 1.0, b: 0.0, c: 0.0 });
        let r = g
            .edge_intersection(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0)
            .unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn double_crossing_is_rejected() {
        // chord through a small circle: both endpoints outside
        let g = circle(0.3);
        let r = g.edge_intersection(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 2.0);
        assert!(matches!(r, Err(GeometryError::MultipleCrossings { .. })));
    }

    #[test]
    fn parse_builtins() {
        assert_eq!(
            LevelSet::parse("circle(0, 0, 0.5)").unwrap(),
            LevelSet::Circle { cx: 0.0, cy: 0.0, r: 0.5 }
        );
        assert_eq!(
            LevelSet::parse(" line(1,-1,0.25) ").unwrap(),
            LevelSet::Line { a: 1.0, b: -1.0, c: 0.25 }
        );
        assert!(LevelSet::parse("ellipse(1,2,3)").is_err());
        assert!(LevelSet::parse("circle(1,2)").is_err());
        assert!(LevelSet::parse("circle(0,0,-1)").is_err());
        let c = LevelSet::Circle { cx: 0.5, cy: -0.25, r: 0.125 };
        assert_eq!(LevelSet::parse(&c.to_string()).unwrap(), c);
    }
}
