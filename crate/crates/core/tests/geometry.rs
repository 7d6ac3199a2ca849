use ppife::geometry::{
    CellKind, ClassifiedMesh, DomainSpec, EdgeLabel, InterfaceGeometry, LevelSet, Point,
};

const R0: f64 = std::f64::consts::PI / 6.28;

fn circle() -> InterfaceGeometry {
    InterfaceGeometry::new(LevelSet::Circle { cx: 0.0, cy: 0.0, r: R0 })
}

fn classified(n: usize, kind: CellKind) -> ClassifiedMesh {
    ClassifiedMesh::new(&DomainSpec::new(-1.0, 1.0, -1.0, 1.0, n, kind).unwrap(), circle()).unwrap()
}

/// Sign change of `φ` over a 50×50 lattice of the element.
fn sampled_cut(cm: &ClassifiedMesh, k: usize) -> bool {
    let mesh = &cm.mesh;
    let o = mesh.cell_origin(k);
    let pts = mesh.element_points(k);
    let tri = pts.len() == 3;
    // lower triangle of the cell has its right angle at the origin
    let lower = tri && pts.iter().any(|p| (p.x - o.x - mesh.h).abs() < 1e-12 && (p.y - o.y).abs() < 1e-12);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..50 {
        for j in 0..50 {
            let (s, t) = (i as f64 / 49.0, j as f64 / 49.0);
            if tri && ((lower && t > s) || (!lower && t < s)) {
                continue;
            }
            let v = cm.iface.value(o + Point::new(s, t) * mesh.h);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    lo < 0.0 && hi > 0.0
}

#[test]
fn interface_elements_match_dense_sampling() {
    for kind in [CellKind::Rectangular, CellKind::Triangular] {
        let cm = classified(20, kind);
        let expected: Vec<usize> = (0..cm.mesh.n_elements()).filter(|&k| sampled_cut(&cm, k)).collect();
        let found: Vec<usize> = cm.interface_elements().map(|c| c.element).collect();
        assert_eq!(found, expected, "{kind:?}");
    }
}

#[test]
fn crossed_edges_are_interface_edges() {
    for kind in [CellKind::Rectangular, CellKind::Triangular] {
        let cm = classified(20, kind);
        let mut crossed = 0;
        for (i, e) in cm.mesh.edges.iter().enumerate() {
            let (a, b) = (cm.mesh.nodes[e.nodes[0]], cm.mesh.nodes[e.nodes[1]]);
            if cm.iface.edge_intersection(a, b, cm.mesh.h).unwrap().is_some() {
                crossed += 1;
                assert_eq!(cm.edge_labels[i], EdgeLabel::InteriorInterface);
            }
        }
        assert!(crossed > 0);
    }
}

#[test]
fn interface_edge_count_grows_linearly() {
    let counts: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&n| classified(n, CellKind::Rectangular).interface_edges().count() as f64 / n as f64)
        .collect();
    for w in counts.windows(2) {
        let r = w[1] / w[0];
        assert!((0.5..=2.0).contains(&r), "{counts:?}");
    }
}

#[test]
fn remote_interface_leaves_no_interface_edges() {
    let spec = DomainSpec::new(-1.0, 1.0, -1.0, 1.0, 8, CellKind::Triangular).unwrap();
    let cm = ClassifiedMesh::new(&spec, InterfaceGeometry::new(LevelSet::Line { a: 1.0, b: 0.0, c: -10.0 }))
        .unwrap();
    assert_eq!(cm.interface_elements().count(), 0);
    assert_eq!(cm.interface_edges().count(), 0);
}

#[test]
fn chord_endpoints_lie_on_the_circle() {
    for kind in [CellKind::Rectangular, CellKind::Triangular] {
        let cm = classified(40, kind);
        for c in cm.interface_elements() {
            let g = c.geometry.as_ref().unwrap();
            for p in [g.chord.d, g.chord.e] {
                assert!((p.norm() - R0).abs() < 1e-12);
            }
        }
    }
}
