use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[serde(alias = "tri")]
    Triangular,
    #[serde(alias = "rect")]
    Rectangular,
}

impl CellKind {
    pub fn vertices_per_element(self) -> usize {
        match self {
            CellKind::Triangular => 3,
            CellKind::Rectangular => 4,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tri" | "triangular" => Some(CellKind::Triangular),
            "rect" | "rectangular" => Some(CellKind::Rectangular),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CellKind::Triangular => "tri",
            CellKind::Rectangular => "rect",
        }
    }
}

/// Rectangular domain split into `n × n` congruent square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub n: usize,
    pub cell_kind: CellKind,
}

impl DomainSpec {
    pub fn new(
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        n: usize,
        cell_kind: CellKind,
    ) -> Result<Self, GeometryError> {
        let spec = Self {
            xmin,
            xmax,
            ymin,
            ymax,
            n,
            cell_kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The square `(-1, 1)²`.
    pub fn reference_square(n: usize, cell_kind: CellKind) -> Result<Self, GeometryError> {
        Self::new(-1.0, 1.0, -1.0, 1.0, n, cell_kind)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.xmax <= self.xmin || self.ymax <= self.ymin {
            return Err(GeometryError::InvalidDomain(format!(
                "need xmin < xmax and ymin < ymax, got x: [{}, {}], y: [{}, {}]",
                self.xmin, self.xmax, self.ymin, self.ymax
            )));
        }
        if self.n < 2 {
            return Err(GeometryError::InvalidDomain(format!(
                "need at least 2 cells per side, got {}",
                self.n
            )));
        }
        let (wx, wy) = (self.xmax - self.xmin, self.ymax - self.ymin);
        if (wx - wy).abs() > 1e-12 * wx.max(wy) {
            return Err(GeometryError::InvalidDomain(format!(
                "cells must be square: domain is {wx} × {wy}"
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.xmax - self.xmin) / self.n as f64
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }
}

/// Vertex indices of one element, counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    vertices: [usize; 4],
    len: u8,
}

impl Element {
    fn tri(a: usize, b: usize, c: usize) -> Self {
        Self {
            vertices: [a, b, c, usize::MAX],
            len: 3,
        }
    }

    fn quad(a: usize, b: usize, c: usize, d: usize) -> Self {
        Self {
            vertices: [a, b, c, d],
            len: 4,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Mesh edge with its one or two adjacent elements.
///
/// `left` always has the lower element index; `normal` is the unit normal
/// pointing out of `left` (towards `right` for interior edges).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub nodes: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
    pub normal: Point,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct CartesianMesh {
    pub spec: DomainSpec,
    pub nodes: Vec<Point>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// `element_edges[k][i]` is the edge from local vertex `i` to `i + 1`.
    pub element_edges: Vec<[usize; 4]>,
    pub boundary_node: Vec<bool>,
    pub h: f64,
}

/// Build the Cartesian mesh. Triangular meshes split every square cell along
/// its lower-left to upper-right diagonal.
pub fn build_mesh(spec: &DomainSpec) -> Result<CartesianMesh, GeometryError> {
    spec.validate()?;
    let n = spec.n;
    let h = spec.h();
    let node_id = |i: usize, j: usize| j * (n + 1) + i;

    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary_node = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { spec.xmax } else { spec.xmin + i as f64 * h };
            let y = if j == n { spec.ymax } else { spec.ymin + j as f64 * h };
            nodes.push(Point::new(x, y));
            boundary_node.push(i == 0 || j == 0 || i == n || j == n);
        }
    }

    let mut elements = Vec::with_capacity(n * n * 2);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (
                node_id(i, j),
                node_id(i + 1, j),
                node_id(i + 1, j + 1),
                node_id(i, j + 1),
            );
            match spec.cell_kind {
                CellKind::Rectangular => elements.push(Element::quad(a, b, c, d)),
                CellKind::Triangular => {
                    elements.push(Element::tri(a, b, c));
                    elements.push(Element::tri(a, c, d));
                }
            }
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut element_edges = Vec::with_capacity(elements.len());
    for (k, el) in elements.iter().enumerate() {
        let vs = el.vertices();
        let mut local = [usize::MAX; 4];
        for i in 0..vs.len() {
            let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
            let key = (a.min(b), a.max(b));
            let id = *lookup.entry(key).or_insert_with(|| {
                let t = nodes[b] - nodes[a];
                let length = t.norm();
                edges.push(Edge {
                    nodes: [a, b],
                    left: k,
                    right: None,
                    // outward for a counterclockwise element
                    normal: Point::new(t.y / length, -t.x / length),
                    length,
                });
                edges.len() - 1
            });
            if edges[id].left != k {
                edges[id].right = Some(k);
            }
            local[i] = id;
        }
        element_edges.push(local);
    }

    Ok(CartesianMesh {
        spec: *spec,
        nodes,
        elements,
        edges,
        element_edges,
        boundary_node,
        h,
    })
}

impl CartesianMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn cell_kind(&self) -> CellKind {
        self.spec.cell_kind
    }

    pub fn element_points(&self, k: usize) -> Vec<Point> {
        self.elements[k]
            .vertices()
            .iter()
            .map(|&v| self.nodes[v])
            .collect()
    }

    /// Lower-left corner of the square cell that contains element `k`.
    pub fn cell_origin(&self, k: usize) -> Point {
        self.nodes[self.elements[k].vertices()[0]]
    }

    pub fn element_area(&self, k: usize) -> f64 {
        super::polygon_area(&self.element_points(k))
    }

    pub fn element_centroid(&self, k: usize) -> Point {
        let pts = self.element_points(k);
        let mut c = Point::default();
        for p in &pts {
            c += *p;
        }
        c * (1.0 / pts.len() as f64)
    }

    /// Element containing `p`; points outside the domain are clamped to the
    /// nearest cell.
    pub fn locate(&self, p: Point) -> usize {
        let n = self.spec.n;
        let fx = ((p.x - self.spec.xmin) / self.h).floor();
        let fy = ((p.y - self.spec.ymin) / self.h).floor();
        let i = (fx.max(0.0) as usize).min(n - 1);
        let j = (fy.max(0.0) as usize).min(n - 1);
        match self.spec.cell_kind {
            CellKind::Rectangular => j * n + i,
            CellKind::Triangular => {
                let o = self.nodes[j * (n + 1) + i];
                // lower triangle (a, b, c) lies below the diagonal
                if p.y - o.y <= p.x - o.x {
                    2 * (j * n + i)
                } else {
                    2 * (j * n + i) + 1
                }
            }
        }
    }

    pub fn interior_node_count(&self) -> usize {
        self.boundary_node.iter().filter(|b| !**b).count()
    }

    /// Plain-text dump: one `node`, `element` or `edge` record per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# nodes {} elements {} edges {} h {:e}",
            self.n_nodes(),
            self.n_elements(),
            self.edges.len(),
            self.h
        )?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "node {} {:.17e} {:.17e} {}", i, p.x, p.y, u8::from(self.boundary_node[i]))?;
        }
        for (k, el) in self.elements.iter().enumerate() {
            let vs: Vec<String> = el.vertices().iter().map(|v| v.to_string()).collect();
            writeln!(w, "element {} {}", k, vs.join(" "))?;
        }
        for (k, e) in self.edges.iter().enumerate() {
            let right = e.right.map_or(-1, |r| r as i64);
            writeln!(w, "edge {} {} {} {} {}", k, e.nodes[0], e.nodes[1], e.left, right)?;
        }
        Ok(())
    }
}
