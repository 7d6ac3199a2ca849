use ppife::assembly::{MethodParams, Scheme};
use ppife::geometry::{cut_by_chord, CellKind, Point, PolygonCut, RectCutType};
use ppife::harness::{circle_problem, circle_solution};
use ppife::postprocess::PolynomialSolution;
use ppife::verify::{
    gradient_lower_bound_ratios, interface_edge_interpolation_error, interp_edge_error_study,
    quadrant_constant, reference_basis, reference_vertices, scan_coefficient_bounds,
    scan_coercivity, trace_ratio, worst_trace_ratio, CoercivitySettings, ReferenceCut,
    DEFAULT_SEED,
};

fn polys(kind: CellKind, cut: ReferenceCut, h: f64) -> [Vec<Point>; 2] {
    let (d, e) = cut.endpoints(h);
    match cut_by_chord(&reference_vertices(kind, h), d, e, Point::new(1.0, 1.0), h, 1e-12).unwrap() {
        PolygonCut::Cut(g) => [g.minus_poly, g.plus_poly],
        PolygonCut::Uncut(_) => panic!("uncut"),
    }
}

#[test]
fn equal_coefficients_give_unit_coefficient_ratios() {
    for kind in [CellKind::Triangular, CellKind::Rectangular] {
        let r = scan_coefficient_bounds(kind, &[(3.0, 3.0)], 100, DEFAULT_SEED).unwrap();
        assert!(r.pass);
        assert!((r.max - 1.0).abs() < 1e-12 && (r.min - 1.0).abs() < 1e-12);
    }
}

#[test]
fn large_jump_coefficient_scan_is_stable() {
    let r = scan_coefficient_bounds(CellKind::Rectangular, &[(1.0, 1e4)], 1000, DEFAULT_SEED).unwrap();
    assert!(r.pass, "{r}");
    assert!(r.max.is_finite());
}

#[test]
fn scans_are_reproducible_from_the_seed() {
    let a = scan_coefficient_bounds(CellKind::Triangular, &[(1.0, 10.0)], 50, 7).unwrap();
    let b = scan_coefficient_bounds(CellKind::Triangular, &[(1.0, 10.0)], 50, 7).unwrap();
    let c = scan_coefficient_bounds(CellKind::Triangular, &[(1.0, 10.0)], 50, 8).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.seed, 7);
}

#[test]
fn linear_function_trace_ratio_is_scale_free() {
    // v = 1 + 2x − 3y with β continuous is a global linear function
    let cut = ReferenceCut { rect_type: RectCutType::TypeI, d: 0.37, e: 0.61 };
    for kind in [CellKind::Triangular, CellKind::Rectangular] {
        let mut seen = Vec::new();
        for h in [1.0, 0.5, 0.25] {
            let b = reference_basis(kind, cut, h, (2.0, 2.0)).unwrap();
            let v: Vec<f64> = b.vertices.iter().map(|p| 1.0 + 2.0 * p.x - 3.0 * p.y).collect();
            let [pm, pp] = polys(kind, cut, h);
            let r = trace_ratio(&b, &v, [&pm, &pp]).unwrap().unwrap();
            let w = worst_trace_ratio(&b, [&pm, &pp]).unwrap();
            assert!(r <= w * (1.0 + 1e-12));
            seen.push((r, w));
        }
        for s in &seen[1..] {
            assert!((s.0 - seen[0].0).abs() < 1e-12 * seen[0].0);
            assert!((s.1 - seen[0].1).abs() < 1e-10 * seen[0].1);
        }
    }
}

#[test]
fn constant_function_is_skipped() {
    let cut = ReferenceCut { rect_type: RectCutType::TypeII, d: 0.2, e: 0.7 };
    let b = reference_basis(CellKind::Rectangular, cut, 1.0, (1.0, 10.0)).unwrap();
    let [pm, pp] = polys(CellKind::Rectangular, cut, 1.0);
    assert_eq!(trace_ratio(&b, &[1.0; 4], [&pm, &pp]).unwrap(), None);
}

#[test]
fn quadrant_gradient_bound_holds() {
    let c = quadrant_constant();
    assert!(gradient_lower_bound_ratios(1000, DEFAULT_SEED).iter().all(|&r| r >= c));
}

#[test]
fn nonsymmetric_scheme_is_coercive_with_unit_penalty() {
    let settings = CoercivitySettings {
        ns: vec![20],
        schemes: vec![MethodParams::preset(Scheme::Npp)],
        ..CoercivitySettings::default()
    };
    let r = scan_coercivity(&settings).unwrap();
    assert!(r.pass, "{r}");
}

#[test]
fn constant_coefficient_spp_is_coercive() {
    let settings = CoercivitySettings {
        ns: vec![10, 20],
        betas: vec![(2.0, 2.0)],
        schemes: vec![MethodParams::preset(Scheme::Spp)],
        ..CoercivitySettings::default()
    };
    assert!(scan_coercivity(&settings).unwrap().pass);
}

#[test]
fn unpenalized_spp_reports_a_threshold() {
    let spp0 = MethodParams::preset(Scheme::Spp).with_sigma0(0.0);
    let moderate = CoercivitySettings {
        ns: vec![20],
        betas: vec![(1.0, 10.0)],
        schemes: vec![spp0],
        ..CoercivitySettings::default()
    };
    // a moderate jump needs no penalty on this mesh
    let r = scan_coercivity(&moderate).unwrap();
    assert!(r.pass);
    assert_eq!(r.samples[0].b, 0.0);
    let large = CoercivitySettings { betas: vec![(1.0, 1e4)], ..moderate };
    let r = scan_coercivity(&large).unwrap();
    assert!(!r.pass);
    let threshold = r.samples[0].b;
    assert!(threshold > 0.0 && threshold < 10.0 * 1e4, "{threshold}");
}

#[test]
fn bilinear_function_has_no_edge_interpolation_error() {
    let disc = circle_problem(20, CellKind::Rectangular, 5.0, 5.0).unwrap();
    let e = interface_edge_interpolation_error(&disc, &PolynomialSolution([0.1, 1.0, -2.0, 3.0])).unwrap();
    assert!(e.edges > 0);
    assert!(e.sum < 1e-24, "{}", e.sum);
}

#[test]
fn edge_interpolation_error_decays() {
    let exact = circle_solution(1.0, 10.0);
    let r = interp_edge_error_study(&[20, 40, 80, 160], CellKind::Rectangular, (1.0, 10.0), &exact).unwrap();
    assert!(r.pass, "{r}");
    let max_slope = r.notes[0].1;
    assert!((2.5..=3.5).contains(&max_slope), "{max_slope}");
}
