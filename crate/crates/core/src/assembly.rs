//! Global assembly of the classic and partially penalized IFE systems.
//!
//! Row `i` of every matrix is the test function `φᵢ`, column `j` the trial
//! function `φⱼ`. The system matrix is
//!
//! ```text
//! A = V + δ·C + ε·Cᵀ + P,   C_ij = Σ_B ∫_B {β∇φⱼ·n_B}[φᵢ] ds
//! ```
//!
//! with `V` the volume stiffness and `P_ij = Σ_B σ⁰_B/|B|^α ∫_B [φⱼ][φᵢ] ds`.
//! On an edge `B` the normal `n_B` points from the lower-numbered element
//! `T₁` to `T₂` and `[v] = v|_{T₁} − v|_{T₂}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    CartesianMesh, CellKind, ClassifiedMesh, CutStatus, DomainSpec, EdgeLabel, InterfaceGeometry,
    Point, Side,
};
use crate::ife_local::{build_all_bases, LocalIFEBasis};
use crate::linsolve::CsrMatrix;
use crate::quadrature::{
    map_square, map_triangle, rect_rule, refined_polygon_rule, split_edge_rule,
    split_polygon_rule, triangle_rule, QuadratureRule,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Classic,
    Spp,
    Ipp,
    Npp,
    Custom,
}

impl Scheme {
    pub const PAPER: [Scheme; 4] = [Scheme::Classic, Scheme::Spp, Scheme::Ipp, Scheme::Npp];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" => Some(Scheme::Classic),
            "spp" => Some(Scheme::Spp),
            "ipp" => Some(Scheme::Ipp),
            "npp" => Some(Scheme::Npp),
            "custom" => Some(Scheme::Custom),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Classic => "classic",
            Scheme::Spp => "spp",
            Scheme::Ipp => "ipp",
            Scheme::Npp => "npp",
            Scheme::Custom => "custom",
        }
    }

    /// Column label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Classic => "Classic IFE",
            Scheme::Spp => "SPP IFE",
            Scheme::Ipp => "IPP IFE",
            Scheme::Npp => "NPP IFE",
            Scheme::Custom => "Custom",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Penalty parameter `σ⁰_B` of an interface edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma0Rule {
    Constant(f64),
    /// `factor · max(β⁻, β⁺)`
    MaxBeta(f64),
}

impl Sigma0Rule {
    pub fn value(&self, _edge: usize, beta_minus: f64, beta_plus: f64) -> f64 {
        match *self {
            Sigma0Rule::Constant(s) => s,
            Sigma0Rule::MaxBeta(f) => f * beta_minus.max(beta_plus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodParams {
    pub scheme: Scheme,
    pub delta: f64,
    pub epsilon: f64,
    pub sigma0: Sigma0Rule,
    pub alpha: f64,
}

impl MethodParams {
    pub fn preset(scheme: Scheme) -> Self {
        let (delta, epsilon, sigma0) = match scheme {
            Scheme::Classic | Scheme::Custom => (0.0, 0.0, Sigma0Rule::Constant(0.0)),
            Scheme::Spp => (-1.0, -1.0, Sigma0Rule::MaxBeta(10.0)),
            Scheme::Ipp => (-1.0, 0.0, Sigma0Rule::MaxBeta(10.0)),
            Scheme::Npp => (-1.0, 1.0, Sigma0Rule::Constant(1.0)),
        };
        Self {
            scheme,
            delta,
            epsilon,
            sigma0,
            alpha: 1.0,
        }
    }

    pub fn with_sigma0(mut self, sigma0: f64) -> Self {
        self.sigma0 = Sigma0Rule::Constant(sigma0);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn has_edge_terms(&self) -> bool {
        self.delta != 0.0 || self.epsilon != 0.0 || self.sigma0 != Sigma0Rule::Constant(0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.delta == self.epsilon
    }
}

/// Quadrature degrees used by the assembly and the error norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePolicy {
    pub volume_degree: usize,
    pub edge_degree: usize,
    /// Degree for load and error integrals on interface elements.
    pub interface_degree: usize,
    /// Uniform refinement depth of those interface rules.
    pub interface_depth: u32,
    /// How error integrals pick the exact-solution piece on interface elements.
    pub error_side: ErrorSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorSide {
    /// Piece of the sub-element `K±` cut off by the chord.
    #[default]
    Chord,
    /// Sign of the exact level set at each quadrature point.
    LevelSet,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self {
            volume_degree: 4,
            edge_degree: 4,
            interface_degree: 6,
            interface_depth: 1,
            error_side: ErrorSide::Chord,
        }
    }
}

/// Classified mesh, local bases and coefficient data of one discretization.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub cm: ClassifiedMesh,
    pub bases: Vec<LocalIFEBasis>,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub quad: QuadraturePolicy,
}

impl Discretization {
    pub fn new(
        spec: &DomainSpec,
        iface: InterfaceGeometry,
        beta_minus: f64,
        beta_plus: f64,
    ) -> Result<Self> {
        if !(beta_minus > 0.0 && beta_plus > 0.0) {
            return Err(Error::Config(format!(
                "coefficients must be positive, got ({beta_minus}, {beta_plus})"
            )));
        }
        let cm = ClassifiedMesh::new(spec, iface)?;
        let bases = build_all_bases(&cm.mesh, &cm.cuts, beta_minus, beta_plus)?;
        Ok(Self {
            cm,
            bases,
            beta_minus,
            beta_plus,
            quad: QuadraturePolicy::default(),
        })
    }

    pub fn mesh(&self) -> &CartesianMesh {
        &self.cm.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.cm.mesh.n_nodes()
    }

    pub fn beta(&self, side: Side) -> f64 {
        side.select(self.beta_minus, self.beta_plus)
    }

    /// Piece of element `k` used at `p`: the chord side on interface
    /// elements, the element's subdomain otherwise.
    pub fn piece_side(&self, k: usize, p: Point) -> Side {
        match self.cm.cuts[k].status {
            CutStatus::NonInterface(s) => s,
            CutStatus::Interface => self.bases[k].side_of(p),
        }
    }

    pub fn dofs(&self, k: usize) -> &[usize] {
        self.cm.mesh.elements[k].vertices()
    }

    /// Volume rules of element `k`, one per piece, at `degree`; interface
    /// elements may be refined `depth` times.
    pub fn element_rules(&self, k: usize, degree: usize, depth: u32) -> Result<Vec<(Side, QuadratureRule)>> {
        let mesh = &self.cm.mesh;
        let cut = &self.cm.cuts[k];
        Ok(match (&cut.status, &cut.geometry) {
            (CutStatus::NonInterface(s), _) => {
                let rule = match mesh.cell_kind() {
                    CellKind::Rectangular => map_square(rect_rule(degree)?, mesh.cell_origin(k), mesh.h),
                    CellKind::Triangular => {
                        let p = mesh.element_points(k);
                        map_triangle(triangle_rule(degree)?, p[0], p[1], p[2])
                    }
                };
                vec![(*s, rule)]
            }
            (CutStatus::Interface, Some(g)) => {
                let mut out = Vec::with_capacity(2);
                for side in [Side::Minus, Side::Plus] {
                    let rule = if depth == 0 {
                        split_polygon_rule(g.poly(side), degree)?
                    } else {
                        refined_polygon_rule(g.poly(side), degree, depth)?
                    };
                    out.push((side, rule));
                }
                out
            }
            (CutStatus::Interface, None) => unreachable!("interface element without geometry"),
        })
    }

    /// Interface crossing strictly inside edge `e`, if any.
    pub fn edge_breakpoint(&self, e: usize) -> Option<Point> {
        let mesh = &self.cm.mesh;
        let edge = &mesh.edges[e];
        let (a, b) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
        let tol = 1e-12 * mesh.h;
        std::iter::once(edge.left)
            .chain(edge.right)
            .filter_map(|k| self.cm.cuts[k].geometry.as_ref())
            .flat_map(|g| [g.chord.d, g.chord.e])
            .find(|&q| {
                let t = (q - a).dot(b - a) / (b - a).dot(b - a);
                t > 1e-12 && t < 1.0 - 1e-12 && a.lerp(b, t).distance(q) <= tol
            })
    }

    pub fn edge_rule(&self, e: usize) -> Result<QuadratureRule> {
        let mesh = &self.cm.mesh;
        let edge = &mesh.edges[e];
        let (a, b) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
        Ok(split_edge_rule(a, b, self.edge_breakpoint(e), self.quad.edge_degree)?)
    }

    /// `Σⱼ cⱼ φⱼ` of element `k` at `p`.
    pub fn eval_element(&self, k: usize, coeffs: &[f64], p: Point) -> f64 {
        let side = self.piece_side(k, p);
        let b = &self.bases[k];
        self.dofs(k)
            .iter()
            .enumerate()
            .map(|(j, &g)| coeffs[g] * b.eval_on(j, side, p))
            .sum()
    }

    pub fn grad_element(&self, k: usize, coeffs: &[f64], p: Point) -> Point {
        let side = self.piece_side(k, p);
        let b = &self.bases[k];
        let mut g = Point::default();
        for (j, &d) in self.dofs(k).iter().enumerate() {
            g += b.grad_on(j, side, p) * coeffs[d];
        }
        g
    }

    /// Nodal interpolant coefficients of `u`.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, u: F) -> Vec<f64> {
        self.cm.mesh.nodes.iter().map(|&p| u(p)).collect()
    }
}

type Triplets = Vec<(usize, usize, f64)>;

fn merge(parts: Vec<Triplets>, n: usize) -> CsrMatrix {
    let total = parts.iter().map(Vec::len).sum();
    let mut all = Vec::with_capacity(total);
    for p in parts {
        all.extend(p);
    }
    CsrMatrix::from_triplets(n, n, all)
}

/// Volume stiffness `Σ_K ∫_K β∇φⱼ·∇φᵢ`.
pub fn assemble_volume(disc: &Discretization) -> Result<CsrMatrix> {
    let deg = disc.quad.volume_degree;
    let parts = (0..disc.cm.mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let local = element_stiffness(disc, k, deg)?;
            let dofs = disc.dofs(k);
            let nd = dofs.len();
            let mut t = Vec::with_capacity(nd * nd);
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    t.push((gi, gj, local[i * nd + j]));
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(parts, disc.n_dofs()))
}

/// Local stiffness matrix of element `k`, row-major.
pub fn element_stiffness(disc: &Discretization, k: usize, degree: usize) -> Result<Vec<f64>> {
    let b = &disc.bases[k];
    let nd = b.len();
    let mut m = vec![0.0; nd * nd];
    let mut g = [Point::default(); 4];
    for (side, rule) in disc.element_rules(k, degree, 0)? {
        let beta = disc.beta(side);
        for (p, w) in rule.iter() {
            b.grad_all_on(side, p, &mut g[..nd]);
            for i in 0..nd {
                for j in 0..nd {
                    m[i * nd + j] += w * beta * g[i].dot(g[j]);
                }
            }
        }
    }
    Ok(m)
}

/// Traces on edge `e` of the basis functions of both neighbours:
/// `(global dof, [φ]-contribution, {β∇φ·n}-contribution)` per local dof.
fn edge_traces(disc: &Discretization, e: usize, p: Point) -> Vec<(usize, f64, f64)> {
    let edge = &disc.cm.mesh.edges[e];
    let n = edge.normal;
    let mut out = Vec::with_capacity(8);
    for (k, sign) in std::iter::once((edge.left, 1.0)).chain(edge.right.map(|r| (r, -1.0))) {
        let side = disc.piece_side(k, p);
        let beta = disc.beta(side);
        let b = &disc.bases[k];
        for (j, &g) in disc.dofs(k).iter().enumerate() {
            let v = b.eval_on(j, side, p);
            let flux = beta * b.grad_on(j, side, p).dot(n);
            out.push((g, sign * v, 0.5 * flux));
        }
    }
    out
}

/// Interface-edge matrices `C` (consistency) and `P` (penalty, with the
/// per-edge `σ⁰_B/|B|^α` of `params` applied).
pub fn assemble_edges(disc: &Discretization, params: &MethodParams) -> Result<(CsrMatrix, CsrMatrix)> {
    let edges: Vec<usize> = disc.cm.interface_edges().collect();
    let parts = edges
        .par_iter()
        .map(|&e| {
            let rule = disc.edge_rule(e)?;
            let edge = &disc.cm.mesh.edges[e];
            let scale = params.sigma0.value(e, disc.beta_minus, disc.beta_plus)
                / edge.length.powf(params.alpha);
            let mut c = Triplets::new();
            let mut pen = Triplets::new();
            for (p, w) in rule.iter() {
                let tr = edge_traces(disc, e, p);
                for &(gi, ji, _) in &tr {
                    for &(gj, jj, fj) in &tr {
                        c.push((gi, gj, w * fj * ji));
                        pen.push((gi, gj, w * scale * jj * ji));
                    }
                }
            }
            Ok((c, pen))
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, p): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let n = disc.n_dofs();
    Ok((merge(c, n), merge(p, n)))
}

/// Load vector `bᵢ = Σ_K ∫_K f φᵢ`, with `f(p, side)` evaluated on the side
/// of the exact interface.
pub fn assemble_load<F>(disc: &Discretization, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point, Side) -> f64 + Sync,
{
    let q = disc.quad;
    let iface = &disc.cm.iface;
    let parts = (0..disc.cm.mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let b = &disc.bases[k];
            let nd = b.len();
            let mut local = [0.0; 4];
            let mut v = [0.0; 4];
            let rules = if disc.cm.cuts[k].is_interface() {
                disc.element_rules(k, q.interface_degree, q.interface_depth)?
            } else {
                disc.element_rules(k, q.volume_degree, 0)?
            };
            let interface = disc.cm.cuts[k].is_interface();
            for (side, rule) in rules {
                for (p, w) in rule.iter() {
                    let exact_side = if interface { iface.side(p) } else { side };
                    let fv = f(p, exact_side);
                    b.eval_all_on(side, p, &mut v[..nd]);
                    for i in 0..nd {
                        local[i] += w * fv * v[i];
                    }
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rhs = vec![0.0; disc.n_dofs()];
    for (k, local) in parts.iter().enumerate() {
        for (i, &g) in disc.dofs(k).iter().enumerate() {
            rhs[g] += local[i];
        }
    }
    Ok(rhs)
}

/// Separately assembled blocks of the bilinear form.
#[derive(Debug, Clone)]
pub struct SystemParts {
    pub volume: CsrMatrix,
    pub consistency: CsrMatrix,
    pub penalty: CsrMatrix,
}

impl SystemParts {
    pub fn assemble(disc: &Discretization, params: &MethodParams) -> Result<Self> {
        let volume = assemble_volume(disc)?;
        let (consistency, penalty) = assemble_edges(disc, params)?;
        Ok(Self {
            volume,
            consistency,
            penalty,
        })
    }

    /// `V + δC + εCᵀ + s·P`.
    pub fn combine(&self, delta: f64, epsilon: f64, penalty_scale: f64) -> CsrMatrix {
        let n = self.volume.n_rows;
        let mut t = Vec::with_capacity(self.volume.nnz() + 3 * self.penalty.nnz());
        let mut push = |m: &CsrMatrix, s: f64, transpose: bool| {
            if s == 0.0 {
                return;
            }
            for i in 0..m.n_rows {
                let (cols, vals) = m.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    if transpose {
                        t.push((c, i, s * v));
                    } else {
                        t.push((i, c, s * v));
                    }
                }
            }
        };
        push(&self.volume, 1.0, false);
        push(&self.consistency, delta, false);
        push(&self.consistency, epsilon, true);
        push(&self.penalty, penalty_scale, false);
        CsrMatrix::from_triplets(n, n, t)
    }

    pub fn matrix(&self, params: &MethodParams) -> CsrMatrix {
        self.combine(params.delta, params.epsilon, 1.0)
    }

    /// `sqrt(vᵀ(V + P)v)`.
    pub fn energy_norm(&self, v: &[f64]) -> f64 {
        let dot = |m: &CsrMatrix| m.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        (dot(&self.volume) + dot(&self.penalty)).max(0.0).sqrt()
    }
}

/// Full system on all nodes before boundary conditions.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub parts: SystemParts,
}

pub fn assemble_system<F>(disc: &Discretization, params: &MethodParams, f: F) -> Result<SparseSystem>
where
    F: Fn(Point, Side) -> f64 + Sync,
{
    let parts = SystemParts::assemble(disc, params)?;
    let a = parts.matrix(params);
    let b = assemble_load(disc, f)?;
    Ok(SparseSystem { a, b, parts })
}

/// System restricted to the interior nodes.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub free_dofs: Vec<usize>,
    /// Full-length vector holding `g` at boundary nodes and zero elsewhere.
    pub boundary_values: Vec<f64>,
}

impl ReducedSystem {
    /// Scatter a free-dof solution into a full nodal vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.boundary_values.clone();
        for (&d, &v) in self.free_dofs.iter().zip(x) {
            u[d] = v;
        }
        u
    }
}

/// Fix boundary nodes to `g` and move their columns to the right-hand side.
pub fn apply_dirichlet<G: Fn(Point) -> f64>(
    system: &SparseSystem,
    mesh: &CartesianMesh,
    g: G,
) -> ReducedSystem {
    let n = mesh.n_nodes();
    let mut boundary_values = vec![0.0; n];
    let mut free_dofs = Vec::with_capacity(n);
    for i in 0..n {
        if mesh.boundary_node[i] {
            boundary_values[i] = g(mesh.nodes[i]);
        } else {
            free_dofs.push(i);
        }
    }
    let lifted = system.a.matvec(&boundary_values);
    let b = free_dofs.iter().map(|&i| system.b[i] - lifted[i]).collect();
    let a = system.a.submatrix(&free_dofs, &free_dofs);
    ReducedSystem {
        a,
        b,
        free_dofs,
        boundary_values,
    }
}

/// MatrixMarket coordinate dump (1-based indices).
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
    for i in 0..m.n_rows {
        let (cols, vals) = m.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.17e}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}

/// Labels are kept on the classified mesh; this counts the edges that carry
/// edge terms.
pub fn interface_edge_count(disc: &Discretization) -> usize {
    disc.cm
        .edge_labels
        .iter()
        .filter(|l| **l == EdgeLabel::InteriorInterface)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSet;

    fn disc(n: usize, kind: CellKind, beta: (f64, f64)) -> Discretization {
        let spec = DomainSpec::new(-1.0, 1.0, -1.0, 1.0, n, kind).unwrap();
        let iface = InterfaceGeometry::new(LevelSet::Circle {
            cx: 0.0,
            cy: 0.0,
            r: std::f64::consts::PI / 6.28,
        });
        Discretization::new(&spec, iface, beta.0, beta.1).unwrap()
    }

    #[test]
    fn q1_interior_diagonal() {
        let d = disc(2, CellKind::Rectangular, (1.0, 1.0));
        let v = assemble_volume(&d).unwrap();
        // centre node of the 3×3 grid
        assert!((v.get(4, 4) - 8.0 / 3.0).abs() < 1e-13);
        assert!((v.get(4, 0) + 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_row_sums() {
        for kind in [CellKind::Rectangular, CellKind::Triangular] {
            let d = disc(8, kind, (1.0, 10.0));
            for k in 0..d.mesh().n_elements() {
                let m = element_stiffness(&d, k, 4).unwrap();
                let nd = d.bases[k].len();
                for i in 0..nd {
                    let s: f64 = m[i * nd..(i + 1) * nd].iter().sum();
                    assert!(s.abs() < 1e-12, "element {k} row {i}: {s}");
                }
            }
        }
    }

    #[test]
    fn classic_has_no_edge_terms() {
        let d = disc(10, CellKind::Rectangular, (1.0, 10.0));
        let p = MethodParams::preset(Scheme::Classic);
        let parts = SystemParts::assemble(&d, &p).unwrap();
        assert_eq!(parts.matrix(&p).to_dense(), parts.volume.to_dense());
        assert_eq!(parts.penalty.max_abs(), 0.0);
    }

    #[test]
    fn spp_is_symmetric() {
        let d = disc(10, CellKind::Triangular, (1.0, 10.0));
        let p = MethodParams::preset(Scheme::Spp);
        let a = SystemParts::assemble(&d, &p).unwrap().matrix(&p);
        assert!(a.asymmetry() < 1e-12 * a.max_abs());
    }

    #[test]
    fn unit_load_sums_to_area() {
        let d = disc(2, CellKind::Rectangular, (1.0, 1.0));
        let b = assemble_load(&d, |_, _| 1.0).unwrap();
        assert!((b.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        let z = assemble_load(&d, |_, _| 0.0).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matrix_market_header() {
        let a = CsrMatrix::identity(2);
        let mut out = Vec::new();
        write_matrix_market(&a, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 "));
    }
}
