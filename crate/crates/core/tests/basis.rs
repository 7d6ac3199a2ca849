use nalgebra::{DMatrix, DVector};
use ppife::geometry::{CellKind, Point, RectCutType, Side};
use ppife::ife_local::{LocalIFEBasis, Poly};
use ppife::verify::{coefficient_ratio, reference_basis, ReferenceCut};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tri_cut(d: f64, e: f64) -> ReferenceCut {
    ReferenceCut { rect_type: RectCutType::TypeI, d, e }
}

fn piece(b: &LocalIFEBasis, j: usize, side: Side) -> [f64; 4] {
    b.piece(j, side).0
}

/// `f_ij` with `c⁺ = F c⁻` for `D = (0, d)`, `E = (e, 0)` on the unit
/// reference triangle, written out from the `g_ij` expressions.
fn closed_form(d: f64, e: f64, bm: f64, bp: f64) -> [[f64; 3]; 3] {
    let gm = [[0.0, -d * d * e, -d * e * e], [0.0, d * d, d * e], [0.0, d * e, e * e]];
    let gp = [[d * d + e * e, d * d * e, d * e * e], [0.0, e * e, -d * e], [0.0, -d * e, d * d]];
    let mut f = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            f[i][j] = (gm[i][j] * bm + gp[i][j] * bp) / (bp * (d * d + e * e));
        }
    }
    f
}

#[test]
fn linear_pieces_follow_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for &(bm, bp) in &[(1.0, 10.0), (10.0, 1.0), (1.0, 1e4)] {
        for _ in 0..500 {
            let (d, e) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
            let b = reference_basis(CellKind::Triangular, tri_cut(d, e), 1.0, (bm, bp)).unwrap();
            let f = closed_form(d, e, bm, bp);
            let mut ratio: f64 = 0.0;
            for j in 0..3 {
                let cm = piece(&b, j, Side::Minus);
                let cp = piece(&b, j, Side::Plus);
                let mut pred = [0.0; 3];
                for (i, p) in pred.iter_mut().enumerate() {
                    *p = (0..3).map(|k| f[i][k] * cm[k]).sum();
                }
                let scale = cp.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..3 {
                    assert!((pred[i] - cp[i]).abs() < 1e-10 * scale, "d={d} e={e} j={j} i={i}");
                }
                let nm = cm.iter().map(|v| v * v).sum::<f64>().sqrt();
                let np = pred.iter().map(|v| v * v).sum::<f64>().sqrt();
                ratio = ratio.max((nm / np).max(np / nm));
            }
            assert!((coefficient_ratio(&b) - ratio).abs() < 1e-10 * ratio);
        }
    }
}

#[test]
fn linear_basis_matches_qr_solve() {
    // unknowns (c⁻₁, c⁻₂, c⁻₃, c⁺₁, c⁺₂, c⁺₃); A₁ ∈ K⁻, A₂, A₃ ∈ K⁺
    let (bm, bp) = (1.0, 2.0);
    let (d, e) = (Point::new(0.0, 0.5), Point::new(0.5, 0.0));
    let n = Point::new(1.0, 1.0);
    let rows = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        [1.0, d.x, d.y, -1.0, -d.x, -d.y],
        [1.0, e.x, e.y, -1.0, -e.x, -e.y],
        [0.0, bm * n.x, bm * n.y, 0.0, -bp * n.x, -bp * n.y],
    ];
    let m = DMatrix::from_fn(6, 6, |i, j| rows[i][j]);
    let qr = m.qr();
    let b = reference_basis(CellKind::Triangular, tri_cut(0.5, 0.5), 1.0, (bm, bp)).unwrap();
    for j in 0..3 {
        let mut rhs = DVector::zeros(6);
        rhs[j] = 1.0;
        let c = qr.solve(&rhs).unwrap();
        let cm = piece(&b, j, Side::Minus);
        let cp = piece(&b, j, Side::Plus);
        for i in 0..3 {
            assert!((c[i] - cm[i]).abs() < 1e-12);
            assert!((c[3 + i] - cp[i]).abs() < 1e-12);
        }
    }
}

fn eval(c: &[f64; 4], p: Point) -> f64 {
    c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.y
}

fn grad(c: &[f64; 4], p: Point) -> Point {
    Point::new(c[1] + c[3] * p.y, c[2] + c[3] * p.x)
}

/// Largest violation of the bilinear IFE constraints on `[0, 1]²`, with
/// the flux condition integrated by Simpson's rule along the chord.
fn bilinear_constraint_residual(b: &LocalIFEBasis, d: Point, e: Point, beta: (f64, f64)) -> f64 {
    let verts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
    // K⁻ is the side of the chord line containing the origin
    let line = |p: Point| (p - d).cross(e - d);
    let origin_sign = line(verts[0]).signum();
    let mut normal = (e - d).perp().normalized();
    if normal.dot(Point::new(1.0, 1.0)) < 0.0 {
        normal = -normal;
    }
    let mut res: f64 = 0.0;
    for j in 0..4 {
        let cm = piece(b, j, Side::Minus);
        let cp = piece(b, j, Side::Plus);
        for (i, &v) in verts.iter().enumerate() {
            let c = if line(v).signum() == origin_sign || line(v) == 0.0 { &cm } else { &cp };
            let target = if i == j { 1.0 } else { 0.0 };
            res = res.max((eval(c, v) - target).abs());
        }
        for q in [d, e] {
            res = res.max((eval(&cm, q) - eval(&cp, q)).abs());
        }
        res = res.max((cm[3] - cp[3]).abs());
        let len = d.distance(e);
        let flux = |t: f64| {
            let p = d.lerp(e, t);
            (grad(&cm, p) * beta.0 - grad(&cp, p) * beta.1).dot(normal)
        };
        let simpson = len / 6.0 * (flux(0.0) + 4.0 * flux(0.5) + flux(1.0));
        res = res.max(simpson.abs());
    }
    res
}

#[test]
fn bilinear_type_one_constraints() {
    let cut = ReferenceCut { rect_type: RectCutType::TypeI, d: 0.5, e: 0.5 };
    let b = reference_basis(CellKind::Rectangular, cut, 1.0, (1.0, 10.0)).unwrap();
    let (d, e) = cut.endpoints(1.0);
    assert!(bilinear_constraint_residual(&b, d, e, (1.0, 10.0)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bilinear_constraints_hold_for_any_cut(
        type_two in any::<bool>(),
        d in 0.01f64..0.99,
        e in 0.01f64..0.99,
        beta_plus in prop::sample::select(vec![1e-4, 0.1, 1.0, 10.0, 1e4]),
    ) {
        let rect_type = if type_two { RectCutType::TypeII } else { RectCutType::TypeI };
        let cut = ReferenceCut { rect_type, d, e };
        let b = reference_basis(CellKind::Rectangular, cut, 1.0, (1.0, beta_plus)).unwrap();
        let (pd, pe) = cut.endpoints(1.0);
        let scale = (0..4)
            .flat_map(|j| b.pieces[j])
            .flat_map(|p: Poly| p.0)
            .fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(bilinear_constraint_residual(&b, pd, pe, (1.0, beta_plus)) < 1e-11 * scale);
        prop_assert!(b.invariant_residuals().max() < 1e-11);
    }

    #[test]
    fn bases_are_invariant_under_scaling(
        d in 0.01f64..0.99,
        e in 0.01f64..0.99,
        h in prop::sample::select(vec![1.0, 0.1, 1.0 / 320.0]),
    ) {
        // coefficients live in the scaled reference frame, so they do not depend on h
        for kind in [CellKind::Triangular, CellKind::Rectangular] {
            let cut = tri_cut(d, e);
            let b1 = reference_basis(kind, cut, 1.0, (1.0, 10.0)).unwrap();
            let bh = reference_basis(kind, cut, h, (1.0, 10.0)).unwrap();
            for j in 0..b1.len() {
                for s in [Side::Minus, Side::Plus] {
                    let (c1, ch) = (piece(&b1, j, s), piece(&bh, j, s));
                    for i in 0..4 {
                        prop_assert!((c1[i] - ch[i]).abs() < 1e-9 * c1[i].abs().max(1.0));
                    }
                }
            }
        }
    }
}
