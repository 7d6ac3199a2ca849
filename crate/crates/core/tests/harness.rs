use std::fs;

use ppife::assembly::{MethodParams, Scheme};
use ppife::geometry::CellKind;
use ppife::harness::{
    circle_problem, circle_solution, cmd_convergence, cmd_solve, cmd_verify, solve,
    solve_and_measure, RunConfig, SolverChoice, SolverSettings,
};
use ppife::postprocess::{convergence_rates, Norm};

fn config(dir: &std::path::Path, pairs: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.out = dir.to_path_buf();
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}

#[test]
fn iterative_solves_reach_tolerance() {
    let exact = circle_solution(1.0, 10.0);
    let disc = circle_problem(20, CellKind::Rectangular, 1.0, 10.0).unwrap();
    for (scheme, solver) in [(Scheme::Spp, "cg"), (Scheme::Npp, "bicgstab")] {
        let sol = solve(&disc, &MethodParams::preset(scheme), &exact, &SolverSettings::default()).unwrap();
        assert_eq!(sol.solver, solver);
        assert!(sol.residual <= 1e-12, "{scheme}: {}", sol.residual);
    }
}

#[test]
fn gmres_agrees_with_bicgstab() {
    let exact = circle_solution(1.0, 1e4);
    let disc = circle_problem(20, CellKind::Triangular, 1.0, 1e4).unwrap();
    let params = MethodParams::preset(Scheme::Npp);
    let run = |choice| {
        let settings = SolverSettings { choice, ..SolverSettings::default() };
        solve(&disc, &params, &exact, &settings).unwrap().uh
    };
    let (a, b, c) = (run(SolverChoice::Gmres), run(SolverChoice::Bicgstab), run(SolverChoice::Dense));
    for i in 0..a.len() {
        assert!((a[i] - c[i]).abs() < 1e-8 && (b[i] - c[i]).abs() < 1e-8);
    }
}

#[test]
fn stalled_bicgstab_falls_back_to_gmres() {
    let exact = circle_solution(1.0, 1e4);
    let disc = circle_problem(40, CellKind::Rectangular, 1.0, 1e4).unwrap();
    let sol = solve(&disc, &MethodParams::preset(Scheme::Npp), &exact, &SolverSettings::default()).unwrap();
    assert_eq!(sol.solver, "bicgstab+gmres");
    assert!(sol.residual <= 1e-12);
}

#[test]
fn large_jump_h1_error_is_root_two_times_reference() {
    // the reference value omits a factor √2 relative to the standard seminorm
    let exact = circle_solution(1.0, 1e4);
    let disc = circle_problem(20, CellKind::Rectangular, 1.0, 1e4).unwrap();
    let (_, e) = solve_and_measure(&disc, &MethodParams::preset(Scheme::Spp), &exact, &SolverSettings::default())
        .unwrap();
    let scaled = e.h1 / 2f64.sqrt();
    assert!((scaled / 1.9538e-2 - 1.0).abs() < 0.1, "{}", e.h1);
}

#[test]
fn large_jump_classic_l2_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("N", "20,40,80,160"), ("scheme", "classic"), ("beta_plus", "10000")]);
    let out = cmd_convergence(&cfg).unwrap();
    let errs: Vec<(usize, f64)> = out.records.iter().map(|r| (r.n, Norm::L2.of(r))).collect();
    for r in convergence_rates(&errs) {
        assert!((1.85..=2.15).contains(&r), "{errs:?}");
    }
}

#[test]
fn moderate_jump_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("scheme", "spp,npp")]);
    let out = cmd_convergence(&cfg).unwrap();
    for r in out.scheme(Scheme::Spp).iter().skip(1) {
        let rate = r.rate_h1.unwrap();
        assert!((0.95..=1.05).contains(&rate), "SPP H1 rate {rate} at N={}", r.n);
    }
    for r in out.scheme(Scheme::Npp).iter().skip(1) {
        let rate = r.rate_l2.unwrap();
        assert!((1.9..=2.1).contains(&rate), "NPP L2 rate {rate} at N={}", r.n);
    }
}

#[test]
fn convergence_output_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pairs = [("N", "10,20,40"), ("mesh", "tri"), ("beta_plus", "1000")];
    let a = cmd_convergence(&config(d1.path(), &pairs)).unwrap();
    let b = cmd_convergence(&config(d2.path(), &pairs)).unwrap();
    for (fa, fb) in a.files.iter().zip(&b.files) {
        let name = fa.file_name().unwrap().to_string_lossy();
        if name.starts_with("timings") {
            continue;
        }
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap(), "{name}");
    }
    assert_eq!(a.records.len(), 12);
}

#[test]
fn verify_output_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pairs = [("samples", "100"), ("seed", "99")];
    let a = cmd_verify(&config(d1.path(), &pairs)).unwrap();
    let b = cmd_verify(&config(d2.path(), &pairs)).unwrap();
    assert_eq!(a.files.len(), 5);
    for (fa, fb) in a.files.iter().zip(&b.files) {
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap());
    }
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_verify(&config(dir.path(), &[])).unwrap();
    assert_eq!(out.reports.len(), 4);
    for r in &out.reports {
        assert!(r.pass, "{r}");
        assert!(r.to_string().starts_with("PASS"));
    }
    let summary = fs::read_to_string(dir.path().join("verify_summary.txt")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn verify_fails_without_penalty_at_large_jump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("samples", "100"), ("scheme", "spp"), ("sigma0", "0"), ("beta_plus", "10000")]);
    let out = cmd_verify(&cfg).unwrap();
    assert!(!out.pass());
    let coercivity = out.reports.iter().find(|r| r.scan_id == "scan_coercivity").unwrap();
    assert!(!coercivity.pass);
    assert!(coercivity.samples.iter().any(|s| s.b > 0.0));
}

#[test]
fn equal_coefficients_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("samples", "100"), ("beta_minus", "3"), ("beta_plus", "3")]);
    let out = cmd_verify(&cfg).unwrap();
    let trace = out.reports.iter().find(|r| r.scan_id == "scan_trace_ratio").unwrap();
    assert!(trace.pass, "{trace}");
}

#[test]
fn solve_writes_record_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("N", "40"), ("scheme", "npp"), ("dump_field", "true")]);
    let out = cmd_solve(&cfg).unwrap();
    assert_eq!(out.files.len(), 2);
    let field = out.field.unwrap();
    assert_eq!(field.len(), 41 * 41);
    let max = field.iter().map(|p| p.2).fold(0.0, f64::max);
    assert_eq!(max, out.record.e_linf_nodal);
    let csv = fs::read_to_string(&out.files[0]).unwrap();
    assert!(csv.starts_with("n,h,mesh,scheme"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn convergence_needs_three_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_convergence(&config(dir.path(), &[("N", "20,40")])).unwrap_err();
    assert!(err.is_config());
}
