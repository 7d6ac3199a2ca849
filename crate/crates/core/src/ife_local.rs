//! Local nodal bases: standard P1/Q1 on non-interface elements, linear and
//! bilinear IFE bases on interface elements.
//!
//! Every polynomial piece is stored as `c₁ + c₂ξ + c₃η + c₄ξη` in the scaled
//! frame `ξ = (x − x₀)/h`, `η = (y − y₀)/h`, where `(x₀, y₀)` is the lower-left
//! corner of the element's cell. Linear pieces have `c₄ = 0`; the two pieces
//! of a bilinear IFE function share `c₄`.

use thiserror::Error;

use crate::geometry::{CartesianMesh, CellKind, Chord, CutGeometry, ElementCut, Point, Side};

/// Condition estimate above which a local system is rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Bound on the post-construction invariant residuals.
pub const RESIDUAL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("singular local system (condition estimate {cond:e})")]
    SingularLocalSystem { cond: f64 },
    #[error("{what} residual {residual:e} exceeds tolerance")]
    InvariantViolation { what: &'static str, residual: f64 },
    #[error("element is not cut by the interface")]
    NotInterface,
    #[error("{0} vertices do not match the requested basis")]
    WrongShape(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    StandardLinear,
    StandardBilinear,
    IFELinear,
    IFEBilinear,
}

impl BasisKind {
    pub fn is_ife(self) -> bool {
        matches!(self, BasisKind::IFELinear | BasisKind::IFEBilinear)
    }
}

/// Coefficients `(c₁, c₂, c₃, c₄)` of one polynomial piece in the scaled frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Poly(pub [f64; 4]);

impl Poly {
    #[inline]
    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let c = &self.0;
        c[0] + c[1] * xi + c[2] * eta + c[3] * xi * eta
    }

    /// Gradient with respect to `(ξ, η)`.
    #[inline]
    pub fn grad_ref(&self, xi: f64, eta: f64) -> Point {
        let c = &self.0;
        Point::new(c[1] + c[3] * eta, c[2] + c[3] * xi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalIFEBasis {
    pub element: usize,
    pub kind: BasisKind,
    pub origin: Point,
    pub h: f64,
    pub vertices: Vec<Point>,
    /// `pieces[j] = [φⱼ⁻, φⱼ⁺]`; both entries coincide for standard bases.
    pub pieces: Vec<[Poly; 2]>,
    pub chord: Option<Chord>,
    pub beta: (f64, f64),
}

/// Max residuals of the four basis invariants.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantResiduals {
    pub kronecker: f64,
    pub continuity: f64,
    pub flux: f64,
    pub partition: f64,
}

impl InvariantResiduals {
    pub fn max(&self) -> f64 {
        self.kronecker
            .max(self.continuity)
            .max(self.flux)
            .max(self.partition)
    }
}

fn piece_index(side: Side) -> usize {
    side.select(0, 1)
}

impl LocalIFEBasis {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    #[inline]
    pub fn to_ref(&self, p: Point) -> (f64, f64) {
        ((p.x - self.origin.x) / self.h, (p.y - self.origin.y) / self.h)
    }

    /// Piece that the chord side test selects at `p`; points within `1e-13·h`
    /// of the chord get `K⁻`.
    #[inline]
    pub fn side_of(&self, p: Point) -> Side {
        match &self.chord {
            Some(c) if c.signed_distance(p) > 1e-13 * self.h => Side::Plus,
            _ => Side::Minus,
        }
    }

    pub fn piece(&self, j: usize, side: Side) -> &Poly {
        &self.pieces[j][piece_index(side)]
    }

    pub fn eval(&self, j: usize, p: Point) -> f64 {
        self.eval_on(j, self.side_of(p), p)
    }

    pub fn grad(&self, j: usize, p: Point) -> Point {
        self.grad_on(j, self.side_of(p), p)
    }

    #[inline]
    pub fn eval_on(&self, j: usize, side: Side, p: Point) -> f64 {
        let (xi, eta) = self.to_ref(p);
        self.piece(j, side).eval(xi, eta)
    }

    #[inline]
    pub fn grad_on(&self, j: usize, side: Side, p: Point) -> Point {
        let (xi, eta) = self.to_ref(p);
        self.piece(j, side).grad_ref(xi, eta) * (1.0 / self.h)
    }

    /// Values of all basis functions of piece `side` at `p`.
    pub fn eval_all_on(&self, side: Side, p: Point, out: &mut [f64]) {
        let (xi, eta) = self.to_ref(p);
        for (o, pc) in out.iter_mut().zip(&self.pieces) {
            *o = pc[piece_index(side)].eval(xi, eta);
        }
    }

    /// Gradients of all basis functions of piece `side` at `p`.
    pub fn grad_all_on(&self, side: Side, p: Point, out: &mut [Point]) {
        let (xi, eta) = self.to_ref(p);
        let s = 1.0 / self.h;
        for (o, pc) in out.iter_mut().zip(&self.pieces) {
            *o = pc[piece_index(side)].grad_ref(xi, eta) * s;
        }
    }

    /// `Σⱼ cⱼ φⱼ(p)`.
    pub fn combine(&self, coeffs: &[f64], p: Point) -> f64 {
        let side = self.side_of(p);
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.eval_on(j, side, p))
            .sum()
    }

    /// `Σⱼ cⱼ ∇φⱼ(p)`.
    pub fn combine_grad(&self, coeffs: &[f64], p: Point) -> Point {
        let side = self.side_of(p);
        let mut g = Point::default();
        for (j, c) in coeffs.iter().enumerate() {
            g += self.grad_on(j, side, p) * *c;
        }
        g
    }

    /// Residuals of the Kronecker, continuity, flux-jump and partition of
    /// unity conditions, evaluated directly from the stored coefficients.
    ///
    /// The flux residual is measured in the scaled frame and divided by
    /// `max(β⁻, β⁺)`; for bilinear pieces it is the chord integral divided by
    /// `h`.
    pub fn invariant_residuals(&self) -> InvariantResiduals {
        let mut r = InvariantResiduals::default();
        let sides: Vec<Side> = self.vertices.iter().map(|&v| self.side_of(v)).collect();
        for j in 0..self.len() {
            for (i, &v) in self.vertices.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                r.kronecker = r.kronecker.max((self.eval_on(j, sides[i], v) - target).abs());
            }
        }
        for side in [Side::Minus, Side::Plus] {
            for k in 0..4 {
                let s: f64 = self.pieces.iter().map(|p| p[piece_index(side)].0[k]).sum();
                let target = if k == 0 { 1.0 } else { 0.0 };
                r.partition = r.partition.max((s - target).abs());
            }
        }
        let Some(chord) = self.chord else {
            return r;
        };
        let (bm, bp) = self.beta;
        let bmax = bm.max(bp);
        let n = chord.normal;
        for j in 0..self.len() {
            for q in [chord.d, chord.e] {
                let jump = self.eval_on(j, Side::Minus, q) - self.eval_on(j, Side::Plus, q);
                r.continuity = r.continuity.max(jump.abs());
            }
            let flux_at = |q: Point| {
                let (xi, eta) = self.to_ref(q);
                let gm = self.piece(j, Side::Minus).grad_ref(xi, eta);
                let gp = self.piece(j, Side::Plus).grad_ref(xi, eta);
                (gm * bm - gp * bp).dot(n) / bmax
            };
            let flux = match self.kind {
                BasisKind::IFELinear => flux_at(chord.d).abs().max(flux_at(chord.e).abs()),
                _ => {
                    // linear along DE: Simpson is exact
                    let len = chord.length() / self.h;
                    let s = flux_at(chord.d) + 4.0 * flux_at(chord.midpoint()) + flux_at(chord.e);
                    (len * s / 6.0).abs()
                }
            };
            r.flux = r.flux.max(flux);
        }
        r
    }
}

/// Lower-left corner of the bounding box.
fn lower_left(vertices: &[Point]) -> Point {
    vertices.iter().fold(
        Point::new(f64::INFINITY, f64::INFINITY),
        |m, v| Point::new(m.x.min(v.x), m.y.min(v.y)),
    )
}

/// Invert a dense row-major `n × n` matrix by Gaussian elimination with
/// partial pivoting.
///
/// Fails when a pivot vanishes or the 1-norm condition estimate exceeds
/// [`MAX_CONDITION`].
pub fn invert_dense(m: &[f64], n: usize) -> Result<Vec<f64>, BasisError> {
    let norm1 = |a: &[f64]| {
        (0..n)
            .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let anorm = norm1(m);
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap();
        let pv = a[piv * n + col];
        if pv.abs() <= f64::MIN_POSITIVE * anorm.max(1.0) || !pv.is_finite() {
            return Err(BasisError::SingularLocalSystem { cond: f64::INFINITY });
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col] / pv;
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    for r in 0..n {
        let d = a[r * n + r];
        for k in 0..n {
            inv[r * n + k] /= d;
        }
    }
    let cond = anorm * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(BasisError::SingularLocalSystem { cond });
    }
    Ok(inv)
}

/// Monomial row `(1, ξ, η, ξη)` truncated to `len` entries.
fn monomials(xi: f64, eta: f64) -> [f64; 4] {
    [1.0, xi, eta, xi * eta]
}

/// Standard P1 (three vertices) or Q1 (four vertices) nodal basis.
pub fn build_standard_basis(
    element: usize,
    vertices: &[Point],
    h: f64,
) -> Result<LocalIFEBasis, BasisError> {
    let (n, kind) = match vertices.len() {
        3 => (3, BasisKind::StandardLinear),
        4 => (4, BasisKind::StandardBilinear),
        k => return Err(BasisError::WrongShape(k)),
    };
    let origin = lower_left(vertices);
    let mut m = vec![0.0; n * n];
    for (i, &v) in vertices.iter().enumerate() {
        let (xi, eta) = ((v.x - origin.x) / h, (v.y - origin.y) / h);
        m[i * n..(i + 1) * n].copy_from_slice(&monomials(xi, eta)[..n]);
    }
    let inv = invert_dense(&m, n)?;
    let pieces = (0..n)
        .map(|j| {
            let mut c = [0.0; 4];
            for (k, ck) in c.iter_mut().take(n).enumerate() {
                *ck = inv[k * n + j];
            }
            [Poly(c), Poly(c)]
        })
        .collect();
    Ok(LocalIFEBasis {
        element,
        kind,
        origin,
        h,
        vertices: vertices.to_vec(),
        pieces,
        chord: None,
        beta: (1.0, 1.0),
    })
}

/// Unknown layout: linear `(c⁻₁, c⁻₂, c⁻₃, c⁺₁, c⁺₂, c⁺₃)`, bilinear adds the
/// shared `c₄` as the seventh unknown.
fn build_ife(
    element: usize,
    vertices: &[Point],
    h: f64,
    cut: &CutGeometry,
    beta_minus: f64,
    beta_plus: f64,
) -> Result<LocalIFEBasis, BasisError> {
    let nv = vertices.len();
    let (n, kind) = match nv {
        3 => (6, BasisKind::IFELinear),
        4 => (7, BasisKind::IFEBilinear),
        k => return Err(BasisError::WrongShape(k)),
    };
    let origin = lower_left(vertices);
    let rf = |p: Point| ((p.x - origin.x) / h, (p.y - origin.y) / h);
    let mut m = vec![0.0; n * n];

    // Kronecker rows
    for (i, &v) in vertices.iter().enumerate() {
        let (xi, eta) = rf(v);
        let mono = monomials(xi, eta);
        let off = match cut.vertex_sides[i] {
            Side::Minus => 0,
            Side::Plus => 3,
        };
        let row = &mut m[i * n..(i + 1) * n];
        row[off..off + 3].copy_from_slice(&mono[..3]);
        if n == 7 {
            row[6] = mono[3];
        }
    }
    // continuity at D and E; the shared c₄ term cancels
    for (r, q) in [cut.chord.d, cut.chord.e].into_iter().enumerate() {
        let (xi, eta) = rf(q);
        let row = &mut m[(nv + r) * n..(nv + r + 1) * n];
        row[..3].copy_from_slice(&[1.0, xi, eta]);
        row[3..6].copy_from_slice(&[-1.0, -xi, -eta]);
    }
    // flux jump, scaled by max β
    let bmax = beta_minus.max(beta_plus);
    let (bm, bp) = (beta_minus / bmax, beta_plus / bmax);
    let nrm = cut.chord.normal;
    let row = &mut m[(n - 1) * n..n * n];
    row[1] = bm * nrm.x;
    row[2] = bm * nrm.y;
    row[4] = -bp * nrm.x;
    row[5] = -bp * nrm.y;
    if n == 7 {
        // ∇(c₄ξη)·n at the chord midpoint; the integrand is linear along DE
        let (xi, eta) = rf(cut.chord.midpoint());
        row[6] = (bm - bp) * (eta * nrm.x + xi * nrm.y);
    }

    let inv = invert_dense(&m, n)?;
    let pieces = (0..nv)
        .map(|j| {
            let col = |k: usize| inv[k * n + j];
            let c4 = if n == 7 { col(6) } else { 0.0 };
            [
                Poly([col(0), col(1), col(2), c4]),
                Poly([col(3), col(4), col(5), c4]),
            ]
        })
        .collect();
    let basis = LocalIFEBasis {
        element,
        kind,
        origin,
        h,
        vertices: vertices.to_vec(),
        pieces,
        chord: Some(cut.chord),
        beta: (beta_minus, beta_plus),
    };
    let r = basis.invariant_residuals();
    for (what, residual) in [
        ("kronecker", r.kronecker),
        ("continuity", r.continuity),
        ("flux", r.flux),
        ("partition of unity", r.partition),
    ] {
        if !(residual < RESIDUAL_TOL) {
            return Err(BasisError::InvariantViolation { what, residual });
        }
    }
    Ok(basis)
}

/// Linear IFE basis on a cut triangle: three Kronecker conditions,
/// continuity at `D` and `E`, and `β⁻∂ₙv⁻ = β⁺∂ₙv⁺` across the chord.
pub fn build_linear_ife_basis(
    element: usize,
    vertices: &[Point],
    h: f64,
    cut: &CutGeometry,
    beta_minus: f64,
    beta_plus: f64,
) -> Result<LocalIFEBasis, BasisError> {
    if vertices.len() != 3 {
        return Err(BasisError::WrongShape(vertices.len()));
    }
    build_ife(element, vertices, h, cut, beta_minus, beta_plus)
}

/// Bilinear IFE basis on a cut rectangle: four Kronecker conditions,
/// continuity at `D` and `E`, and `∫_DE (β⁻∇v⁻ − β⁺∇v⁺)·n ds = 0`.
pub fn build_bilinear_ife_basis(
    element: usize,
    vertices: &[Point],
    h: f64,
    cut: &CutGeometry,
    beta_minus: f64,
    beta_plus: f64,
) -> Result<LocalIFEBasis, BasisError> {
    if vertices.len() != 4 {
        return Err(BasisError::WrongShape(vertices.len()));
    }
    build_ife(element, vertices, h, cut, beta_minus, beta_plus)
}

/// Basis for element `cut.element` of `mesh`, standard or IFE as classified.
pub fn build_basis(
    mesh: &CartesianMesh,
    cut: &ElementCut,
    beta_minus: f64,
    beta_plus: f64,
) -> Result<LocalIFEBasis, BasisError> {
    let k = cut.element;
    let verts = mesh.element_points(k);
    match (&cut.geometry, mesh.cell_kind()) {
        (None, _) => {
            let mut b = build_standard_basis(k, &verts, mesh.h)?;
            b.beta = (beta_minus, beta_plus);
            Ok(b)
        }
        (Some(g), CellKind::Triangular) => {
            build_linear_ife_basis(k, &verts, mesh.h, g, beta_minus, beta_plus)
        }
        (Some(g), CellKind::Rectangular) => {
            build_bilinear_ife_basis(k, &verts, mesh.h, g, beta_minus, beta_plus)
        }
    }
}

/// Bases for every element, in element order.
pub fn build_all_bases(
    mesh: &CartesianMesh,
    cuts: &[ElementCut],
    beta_minus: f64,
    beta_plus: f64,
) -> crate::Result<Vec<LocalIFEBasis>> {
    use rayon::prelude::*;
    cuts.par_iter()
        .map(|c| {
            build_basis(mesh, c, beta_minus, beta_plus).map_err(|source| crate::Error::Basis {
                element: c.element,
                source,
            })
        })
        .collect()
}

pub fn eval_basis(basis: &LocalIFEBasis, j: usize, p: Point) -> f64 {
    basis.eval(j, p)
}

pub fn grad_basis(basis: &LocalIFEBasis, j: usize, p: Point) -> Point {
    basis.grad(j, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cut_by_chord, PolygonCut};

    fn tri() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]
    }

    fn square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    fn cut(verts: &[Point], d: Point, e: Point) -> CutGeometry {
        // K⁻ contains the origin vertex
        match cut_by_chord(verts, d, e, Point::new(1.0, 1.0), 1.0, 1e-10).unwrap() {
            PolygonCut::Cut(g) => g,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_linear_on_reference_triangle() {
        let h = 0.25;
        let v: Vec<Point> = tri().into_iter().map(|p| p * h).collect();
        let b = build_standard_basis(0, &v, h).unwrap();
        let p = Point::new(0.05, 0.1);
        assert!((b.eval(0, p) - (1.0 - p.x / h - p.y / h)).abs() < 1e-14);
        let g = b.grad(0, p);
        assert!((g.x + 1.0 / h).abs() < 1e-12 && (g.y + 1.0 / h).abs() < 1e-12);
    }

    #[test]
    fn standard_bilinear_tensor_product() {
        let b = build_standard_basis(0, &square(), 1.0).unwrap();
        let p = Point::new(0.3, 0.8);
        assert!((b.eval(0, p) - 0.7 * 0.2).abs() < 1e-15);
        let s: f64 = (0..4).map(|j| b.eval(j, p)).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_coefficients_reduce_to_standard() {
        for (verts, d, e) in [
            (tri(), Point::new(0.0, 0.5), Point::new(0.5, 0.0)),
            (square(), Point::new(0.0, 0.5), Point::new(0.5, 0.0)),
            (square(), Point::new(0.3, 0.0), Point::new(0.6, 1.0)),
        ] {
            let g = cut(&verts, d, e);
            let ife = build_ife(0, &verts, 1.0, &g, 3.0, 3.0).unwrap();
            let std = build_standard_basis(0, &verts, 1.0).unwrap();
            for j in 0..verts.len() {
                for s in 0..2 {
                    for k in 0..4 {
                        let diff = ife.pieces[j][s].0[k] - std.pieces[j][0].0[k];
                        assert!(diff.abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn near_unit_ratio_approaches_standard() {
        let verts = square();
        let g = cut(&verts, Point::new(0.0, 0.7), Point::new(0.4, 0.0));
        let ife = build_ife(0, &verts, 1.0, &g, 1.0, 1.0 + 1e-8).unwrap();
        let std = build_standard_basis(0, &verts, 1.0).unwrap();
        for j in 0..4 {
            for s in 0..2 {
                for k in 0..4 {
                    assert!((ife.pieces[j][s].0[k] - std.pieces[j][0].0[k]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn fd_gradient_matches() {
        let h = 0.1;
        let verts: Vec<Point> = square().into_iter().map(|p| p * h + Point::new(0.3, -0.2)).collect();
        let d = Point::new(0.3, -0.2 + 0.06);
        let e = Point::new(0.3 + 0.03, -0.2);
        let g = cut(&verts, d, e);
        let b = build_bilinear_ife_basis(0, &verts, h, &g, 1.0, 10.0).unwrap();
        let step = 1e-6 * h;
        for p in [Point::new(0.37, -0.13), Point::new(0.301, -0.199)] {
            for j in 0..4 {
                let fd = Point::new(
                    (b.eval(j, p + Point::new(step, 0.0)) - b.eval(j, p - Point::new(step, 0.0))) / (2.0 * step),
                    (b.eval(j, p + Point::new(0.0, step)) - b.eval(j, p - Point::new(0.0, step))) / (2.0 * step),
                );
                let g = b.grad(j, p);
                assert!((fd - g).norm() <= 1e-6 * g.norm().max(1.0 / h), "{fd:?} {g:?}");
            }
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(invert_dense(&m, 2), Err(BasisError::SingularLocalSystem { .. })));
        let inv = invert_dense(&[4.0, 7.0, 2.0, 6.0], 2).unwrap();
        let expect = [0.6, -0.7, -0.2, 0.4];
        for (a, b) in inv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_shapes() {
        let g = cut(&square(), Point::new(0.0, 0.5), Point::new(0.5, 0.0));
        assert_eq!(
            build_linear_ife_basis(0, &square(), 1.0, &g, 1.0, 2.0),
            Err(BasisError::WrongShape(4))
        );
    }
}
