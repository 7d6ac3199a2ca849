use rayon::prelude::*;

use super::{
    polygon_area, polygon_centroid, CartesianMesh, GeometryError, InterfaceGeometry, Point,
};

/// Subdomain label: `Ω⁻` or `Ω⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn from_sign(s: i8) -> Self {
        if s < 0 {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    pub fn select<T>(self, minus: T, plus: T) -> T {
        match self {
            Side::Minus => minus,
            Side::Plus => plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutStatus {
    NonInterface(Side),
    Interface,
}

/// Rectangle cut classes: chord ends on two adjacent edges (I) or on two
/// opposite edges (II).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectCutType {
    TypeI,
    TypeII,
}

/// Straight chord `DE` with its unit normal pointing from `K⁻` into `K⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub d: Point,
    pub e: Point,
    pub normal: Point,
}

impl Chord {
    pub fn length(&self) -> f64 {
        self.d.distance(self.e)
    }

    pub fn midpoint(&self) -> Point {
        self.d.midpoint(self.e)
    }

    /// Signed distance from the chord line, positive on the `K⁺` side.
    pub fn signed_distance(&self, p: Point) -> f64 {
        (p - self.d).dot(self.normal)
    }
}

/// Geometry of an interface element split by its chord.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGeometry {
    pub chord: Chord,
    /// Edges that contain `D` and `E`: global ids from [`classify_elements`],
    /// local edge indices from [`cut_polygon`].
    pub cut_edges: [usize; 2],
    pub minus_poly: Vec<Point>,
    pub plus_poly: Vec<Point>,
    /// Piece that each element vertex belongs to (vertices on the chord are
    /// assigned to `K⁻`).
    pub vertex_sides: Vec<Side>,
    pub rect_type: Option<RectCutType>,
}

impl CutGeometry {
    pub fn poly(&self, side: Side) -> &[Point] {
        side.select(&self.minus_poly, &self.plus_poly)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementCut {
    pub element: usize,
    pub status: CutStatus,
    pub geometry: Option<CutGeometry>,
}

impl ElementCut {
    pub fn is_interface(&self) -> bool {
        self.status == CutStatus::Interface
    }

    pub fn non_interface(element: usize, side: Side) -> Self {
        Self {
            element,
            status: CutStatus::NonInterface(side),
            geometry: None,
        }
    }
}

/// Result of splitting one polygon by a level set.
#[derive(Debug, Clone, PartialEq)]
pub enum PolygonCut {
    /// No proper cut; `None` means the side must be decided by the caller.
    Uncut(Option<Side>),
    Cut(CutGeometry),
}

#[derive(Debug, Clone, Copy)]
enum BoundaryItem {
    Vertex(usize),
    Crossing(usize, Point),
}

/// Split a convex counterclockwise polygon.
///
/// `signs[i]` is the snapped sign of `φ` at vertex `i` and `crossings[i]` the
/// interface point strictly inside the local edge from vertex `i` to `i + 1`.
/// Cuts whose chord is shorter than `min_chord` are reported as uncut.
pub fn cut_polygon(
    vertices: &[Point],
    signs: &[i8],
    crossings: &[Option<Point>],
    min_chord: f64,
) -> Result<PolygonCut, GeometryError> {
    let n = vertices.len();
    let has_minus = signs.iter().any(|&s| s < 0);
    let has_plus = signs.iter().any(|&s| s > 0);
    if !(has_minus && has_plus) {
        let side = if has_minus {
            Some(Side::Minus)
        } else if has_plus {
            Some(Side::Plus)
        } else {
            None
        };
        return Ok(PolygonCut::Uncut(side));
    }

    let mut items = Vec::with_capacity(2 * n);
    for i in 0..n {
        items.push(BoundaryItem::Vertex(i));
        let (a, b) = (signs[i], signs[(i + 1) % n]);
        match crossings[i] {
            Some(p) if a * b < 0 => items.push(BoundaryItem::Crossing(i, p)),
            None if a * b < 0 => {
                return Err(GeometryError::InconsistentCut(format!(
                    "edge {i} has opposite vertex signs but no crossing"
                )))
            }
            _ => {}
        }
    }
    let m = items.len();
    let sign_of = |it: &BoundaryItem| match *it {
        BoundaryItem::Vertex(i) => signs[i],
        BoundaryItem::Crossing(..) => 0,
    };
    let nearest_strict = |start: usize, step: isize| -> i8 {
        let mut k = start as isize;
        for _ in 0..m {
            k = (k + step).rem_euclid(m as isize);
            let s = sign_of(&items[k as usize]);
            if s != 0 {
                return s;
            }
        }
        0
    };
    // zero items where the sign actually changes are the chord endpoints
    let cut_points: Vec<usize> = (0..m)
        .filter(|&k| sign_of(&items[k]) == 0)
        .filter(|&k| nearest_strict(k, -1) != nearest_strict(k, 1))
        .collect();
    if cut_points.len() != 2 {
        return Err(GeometryError::InconsistentCut(format!(
            "interface meets the element boundary at {} points",
            cut_points.len()
        )));
    }
    let (i0, i1) = (cut_points[0], cut_points[1]);
    let point_of = |it: &BoundaryItem| match *it {
        BoundaryItem::Vertex(i) => vertices[i],
        BoundaryItem::Crossing(_, p) => p,
    };
    let d = point_of(&items[i0]);
    let e = point_of(&items[i1]);
    if d.distance(e) < min_chord {
        return Ok(PolygonCut::Uncut(None));
    }

    let first: Vec<usize> = (i0..=i1).collect();
    let second: Vec<usize> = (i1..m).chain(0..=i0).collect();
    let strict_sign = |idx: &[usize]| -> Result<i8, GeometryError> {
        let mut sign = 0;
        for &k in idx {
            let s = sign_of(&items[k]);
            if s != 0 {
                if sign != 0 && s != sign {
                    return Err(GeometryError::InconsistentCut(
                        "interface crosses the element more than twice".into(),
                    ));
                }
                sign = s;
            }
        }
        Ok(sign)
    };
    let s_first = strict_sign(&first)?;
    let s_second = strict_sign(&second)?;
    if s_first == 0 || s_second == 0 || s_first == s_second {
        return Err(GeometryError::InconsistentCut(
            "chord does not separate the element".into(),
        ));
    }
    let poly_of = |idx: &[usize]| idx.iter().map(|k| point_of(&items[*k])).collect::<Vec<_>>();
    let (minus_idx, plus_idx) = if s_first < 0 {
        (first, second)
    } else {
        (second, first)
    };
    let minus_poly = poly_of(&minus_idx);
    let plus_poly = poly_of(&plus_idx);

    let mut vertex_sides = vec![Side::Minus; n];
    for &k in &plus_idx {
        if let BoundaryItem::Vertex(i) = items[k] {
            vertex_sides[i] = Side::Plus;
        }
    }
    for &k in &minus_idx {
        if let BoundaryItem::Vertex(i) = items[k] {
            vertex_sides[i] = Side::Minus;
        }
    }

    let mut normal = (e - d).perp().normalized();
    if (polygon_centroid(&plus_poly) - d.midpoint(e)).dot(normal) < 0.0 {
        normal = -normal;
    }

    let candidate_edges = |it: &BoundaryItem| -> Vec<usize> {
        match *it {
            BoundaryItem::Crossing(i, _) => vec![i],
            BoundaryItem::Vertex(i) => vec![(i + n - 1) % n, i],
        }
    };
    let ed = candidate_edges(&items[i0]);
    let ee = candidate_edges(&items[i1]);
    let mut pair = None;
    for &a in &ed {
        for &b in &ee {
            if a == b {
                continue;
            }
            let adjacent = (a + 1) % n == b || (b + 1) % n == a;
            match pair {
                None => pair = Some((a, b, adjacent)),
                Some((_, _, false)) if adjacent => pair = Some((a, b, adjacent)),
                _ => {}
            }
        }
    }
    let (ea, eb, adjacent) = pair.ok_or_else(|| {
        GeometryError::InconsistentCut("chord endpoints lie on a single edge".into())
    })?;
    let rect_type = (n == 4).then(|| {
        if adjacent {
            RectCutType::TypeI
        } else {
            RectCutType::TypeII
        }
    });

    Ok(PolygonCut::Cut(CutGeometry {
        chord: Chord { d, e, normal },
        cut_edges: [ea, eb],
        minus_poly,
        plus_poly,
        vertex_sides,
        rect_type,
    }))
}

/// Cut a single element by the straight line through `d` and `e`; the
/// vertices on the positive side of `(x − d)·normal` form `K⁺`.
///
/// `d` and `e` must lie on the element boundary. Used to build reference
/// interface elements directly from chord endpoints.
pub fn cut_by_chord(
    vertices: &[Point],
    d: Point,
    e: Point,
    plus_direction: Point,
    h: f64,
    snap_tol: f64,
) -> Result<PolygonCut, GeometryError> {
    let mut normal = (e - d).perp().normalized();
    if normal.dot(plus_direction) < 0.0 {
        normal = -normal;
    }
    let phi = |p: Point| (p - d).dot(normal);
    let n = vertices.len();
    let signs: Vec<i8> = vertices
        .iter()
        .map(|&v| {
            let s = phi(v);
            if s.abs() < snap_tol * h {
                0
            } else if s < 0.0 {
                -1
            } else {
                1
            }
        })
        .collect();
    let crossings: Vec<Option<Point>> = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if signs[i] * signs[(i + 1) % n] >= 0 {
                return None;
            }
            // snap to whichever chord endpoint lies on this edge
            for p in [d, e] {
                let t = (b - a).dot(p - a) / (b - a).dot(b - a);
                let q = a.lerp(b, t);
                if (0.0..=1.0).contains(&t) && q.distance(p) <= 1e-12 * h {
                    return Some(p);
                }
            }
            let (fa, fb) = (phi(a), phi(b));
            Some(a.lerp(b, fa / (fa - fb)))
        })
        .collect();
    cut_polygon(vertices, &signs, &crossings, snap_tol * h)
}

/// Label every element as non-interface (with its side) or interface (with
/// its chord data).
pub fn classify_elements(
    mesh: &CartesianMesh,
    iface: &InterfaceGeometry,
) -> Result<Vec<ElementCut>, GeometryError> {
    let h = mesh.h;
    let node_phi: Vec<f64> = mesh.nodes.iter().map(|&p| iface.value(p)).collect();
    let node_sign: Vec<i8> = node_phi
        .iter()
        .map(|&v| iface.snapped_sign(v, h))
        .collect();
    let crossings: Vec<Option<Point>> = mesh
        .edges
        .par_iter()
        .map(|e| {
            iface.edge_intersection(mesh.nodes[e.nodes[0]], mesh.nodes[e.nodes[1]], h)
        })
        .collect::<Result<_, _>>()?;

    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let el = &mesh.elements[k];
            let nv = el.len();
            let pts = mesh.element_points(k);
            let signs: Vec<i8> = el.vertices().iter().map(|&v| node_sign[v]).collect();
            let local_crossings: Vec<Option<Point>> = (0..nv)
                .map(|i| crossings[mesh.element_edges[k][i]])
                .collect();
            let cut = cut_polygon(&pts, &signs, &local_crossings, iface.snap_tol * h)
                .map_err(|err| match err {
                    GeometryError::InconsistentCut(msg) => {
                        GeometryError::InconsistentCut(format!("element {k}: {msg}"))
                    }
                    other => other,
                })?;
            Ok(match cut {
                PolygonCut::Cut(mut g) => {
                    g.cut_edges = [
                        mesh.element_edges[k][g.cut_edges[0]],
                        mesh.element_edges[k][g.cut_edges[1]],
                    ];
                    ElementCut {
                        element: k,
                        status: CutStatus::Interface,
                        geometry: Some(g),
                    }
                }
                PolygonCut::Uncut(_) => {
                    let c = mesh.element_centroid(k);
                    let vc = iface.value(c);
                    let side = if vc.abs() >= iface.snap_tol * h {
                        Side::from_sign(if vc < 0.0 { -1 } else { 1 })
                    } else {
                        let total: i32 = signs.iter().map(|&s| s as i32).sum();
                        Side::from_sign(if total < 0 { -1 } else { 1 })
                    };
                    ElementCut::non_interface(k, side)
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    InteriorInterface,
    InteriorNonInterface,
    Boundary,
}

/// An interior edge is an interface edge when at least one adjacent element
/// is an interface element.
pub fn classify_edges(mesh: &CartesianMesh, cuts: &[ElementCut]) -> Vec<EdgeLabel> {
    mesh.edges
        .iter()
        .map(|e| match e.right {
            None => EdgeLabel::Boundary,
            Some(r) if cuts[e.left].is_interface() || cuts[r].is_interface() => {
                EdgeLabel::InteriorInterface
            }
            Some(_) => EdgeLabel::InteriorNonInterface,
        })
        .collect()
}

/// Area of `Ω⁻` and `Ω⁺` as seen by the chord-approximated mesh.
pub fn discrete_subdomain_areas(mesh: &CartesianMesh, cuts: &[ElementCut]) -> (f64, f64) {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (k, c) in cuts.iter().enumerate() {
        match (&c.status, &c.geometry) {
            (CutStatus::NonInterface(Side::Minus), _) => minus += mesh.element_area(k),
            (CutStatus::NonInterface(Side::Plus), _) => plus += mesh.element_area(k),
            (CutStatus::Interface, Some(g)) => {
                minus += polygon_area(&g.minus_poly);
                plus += polygon_area(&g.plus_poly);
            }
            (CutStatus::Interface, None) => unreachable!("interface element without geometry"),
        }
    }
    (minus, plus)
}
