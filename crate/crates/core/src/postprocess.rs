//! Manufactured solutions, error norms and convergence tables.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{Discretization, ErrorSide, MethodParams, Scheme};
use crate::geometry::{CellKind, Point, Side};
use crate::Result;

/// Piecewise exact solution with its gradient and right-hand side.
pub trait ExactSolution: Sync {
    fn u(&self, p: Point, side: Side) -> f64;
    fn grad(&self, p: Point, side: Side) -> Point;
    fn f(&self, p: Point, side: Side) -> f64;
}

/// `u⁻ = r^a/β⁻` inside the circle `r = r₀`, `u⁺ = r^a/β⁺ + (1/β⁻ − 1/β⁺)r₀^a`
/// outside. Both `u` and `β∂u/∂r` are continuous across the circle, and
/// `f = −∇·(β∇u) = −a² r^{a−2}` on both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSolution {
    pub exponent: f64,
    pub r0: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl CircleSolution {
    pub fn new(r0: f64, beta_minus: f64, beta_plus: f64) -> Self {
        Self {
            exponent: 5.0,
            r0,
            beta_minus,
            beta_plus,
        }
    }

    fn beta(&self, side: Side) -> f64 {
        side.select(self.beta_minus, self.beta_plus)
    }
}

impl ExactSolution for CircleSolution {
    fn u(&self, p: Point, side: Side) -> f64 {
        let r = p.norm();
        let a = self.exponent;
        match side {
            Side::Minus => r.powf(a) / self.beta_minus,
            Side::Plus => {
                r.powf(a) / self.beta_plus
                    + (1.0 / self.beta_minus - 1.0 / self.beta_plus) * self.r0.powf(a)
            }
        }
    }

    fn grad(&self, p: Point, side: Side) -> Point {
        // ∇r^a = a r^{a−2} (x, y)
        let r = p.norm();
        let a = self.exponent;
        if r == 0.0 {
            return Point::default();
        }
        p * (a * r.powf(a - 2.0) / self.beta(side))
    }

    fn f(&self, p: Point, _side: Side) -> f64 {
        let a = self.exponent;
        -a * a * p.norm().powf(a - 2.0)
    }
}

/// `u = c₀ + c₁x + c₂y + c₃xy` on the whole domain (no interface), `f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialSolution(pub [f64; 4]);

impl ExactSolution for PolynomialSolution {
    fn u(&self, p: Point, _: Side) -> f64 {
        let c = &self.0;
        c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.y
    }

    fn grad(&self, p: Point, _: Side) -> Point {
        let c = &self.0;
        Point::new(c[1] + c[3] * p.y, c[2] + c[3] * p.x)
    }

    fn f(&self, _: Point, _: Side) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    /// Max error over mesh nodes.
    pub linf_nodal: f64,
    pub energy: f64,
}

/// Per-element squared integrals `(∫(u−u_h)², ∫|∇(u−u_h)|², ∫β|∇(u−u_h)|²)`.
fn element_error_integrals<E: ExactSolution>(
    disc: &Discretization,
    uh: &[f64],
    exact: &E,
    k: usize,
) -> Result<[f64; 3]> {
    let q = disc.quad;
    let iface = &disc.cm.iface;
    let interface = disc.cm.cuts[k].is_interface();
    let rules = if interface {
        disc.element_rules(k, q.interface_degree, q.interface_depth)?
    } else {
        disc.element_rules(k, q.interface_degree, 0)?
    };
    let b = &disc.bases[k];
    let dofs = disc.dofs(k);
    let mut acc = [0.0; 3];
    for (side, rule) in rules {
        for (p, w) in rule.iter() {
            let es = if interface && q.error_side == ErrorSide::LevelSet {
                iface.side(p)
            } else {
                side
            };
            let mut vh = 0.0;
            let mut gh = Point::default();
            for (j, &d) in dofs.iter().enumerate() {
                vh += uh[d] * b.eval_on(j, side, p);
                gh += b.grad_on(j, side, p) * uh[d];
            }
            let e = exact.u(p, es) - vh;
            let ge = exact.grad(p, es) - gh;
            let g2 = ge.dot(ge);
            acc[0] += w * e * e;
            acc[1] += w * g2;
            acc[2] += w * disc.beta(es) * g2;
        }
    }
    Ok(acc)
}

/// Sample points for the max-norm on element `k`: a 5×5 lattice on squares
/// and the 15-point lattice `i + j ≤ 4` on triangles, vertices included.
pub fn linf_sample_points(disc: &Discretization, k: usize) -> Vec<Point> {
    let mesh = disc.mesh();
    let pts = mesh.element_points(k);
    let mut out = Vec::with_capacity(25);
    match mesh.cell_kind() {
        CellKind::Rectangular => {
            let o = mesh.cell_origin(k);
            for j in 0..5 {
                for i in 0..5 {
                    out.push(o + Point::new(i as f64, j as f64) * (mesh.h / 4.0));
                }
            }
        }
        CellKind::Triangular => {
            let (a, e1, e2) = (pts[0], pts[1] - pts[0], pts[2] - pts[0]);
            for j in 0..5 {
                for i in 0..5 - j {
                    out.push(a + e1 * (i as f64 / 4.0) + e2 * (j as f64 / 4.0));
                }
            }
        }
    }
    out
}

/// Pointwise `|u − u_h|` at `p` evaluated on element `k`.
pub fn pointwise_error<E: ExactSolution>(
    disc: &Discretization,
    uh: &[f64],
    exact: &E,
    k: usize,
    p: Point,
) -> f64 {
    (exact.u(p, disc.cm.iface.side(p)) - disc.eval_element(k, uh, p)).abs()
}

/// `Σ_B σ⁰_B/|B|^α ∫_B [u_h]²` over interface edges.
pub fn penalty_jump_sum(disc: &Discretization, uh: &[f64], params: &MethodParams) -> Result<f64> {
    let edges: Vec<usize> = disc.cm.interface_edges().collect();
    let parts = edges
        .par_iter()
        .map(|&e| {
            let edge = &disc.mesh().edges[e];
            let Some(r) = edge.right else { return Ok(0.0) };
            let sigma = params.sigma0.value(e, disc.beta_minus, disc.beta_plus);
            let rule = disc.edge_rule(e)?;
            let s: f64 = rule.integrate(|p| {
                let j = disc.eval_element(edge.left, uh, p) - disc.eval_element(r, uh, p);
                j * j
            });
            Ok(sigma / edge.length.powf(params.alpha) * s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// L², broken H¹, sampled L∞ and energy-norm errors of the nodal vector `uh`.
///
/// The energy norm uses the penalty of `params`; since the exact solution is
/// continuous, only `[u_h]` enters its edge part.
pub fn compute_errors<E: ExactSolution>(
    disc: &Discretization,
    uh: &[f64],
    exact: &E,
    params: &MethodParams,
) -> Result<ErrorNorms> {
    let ne = disc.mesh().n_elements();
    let per_elem = (0..ne)
        .into_par_iter()
        .map(|k| {
            let ints = element_error_integrals(disc, uh, exact, k)?;
            let m = linf_sample_points(disc, k)
                .into_iter()
                .map(|p| pointwise_error(disc, uh, exact, k, p))
                .fold(0.0, f64::max);
            Ok((ints, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = [0.0; 3];
    let mut linf: f64 = 0.0;
    for (ints, m) in &per_elem {
        for i in 0..3 {
            sums[i] += ints[i];
        }
        linf = linf.max(*m);
    }
    let pen = penalty_jump_sum(disc, uh, params)?;
    Ok(ErrorNorms {
        l2: sums[0].sqrt(),
        h1: sums[1].sqrt(),
        linf,
        linf_nodal: nodal_max_error(disc, uh, exact),
        energy: (sums[2] + pen).sqrt(),
    })
}

/// `max_i |u(x_i) − u_h(x_i)|` over mesh nodes.
pub fn nodal_max_error<E: ExactSolution>(disc: &Discretization, uh: &[f64], exact: &E) -> f64 {
    let iface = &disc.cm.iface;
    disc.mesh()
        .nodes
        .iter()
        .zip(uh)
        .map(|(&p, &v)| (exact.u(p, iface.side(p)) - v).abs())
        .fold(0.0, f64::max)
}

pub fn l2_error<E: ExactSolution>(disc: &Discretization, uh: &[f64], exact: &E) -> Result<f64> {
    Ok(compute_errors(disc, uh, exact, &MethodParams::preset(Scheme::Classic))?.l2)
}

pub fn h1_semi_error<E: ExactSolution>(disc: &Discretization, uh: &[f64], exact: &E) -> Result<f64> {
    Ok(compute_errors(disc, uh, exact, &MethodParams::preset(Scheme::Classic))?.h1)
}

pub fn linf_error<E: ExactSolution>(disc: &Discretization, uh: &[f64], exact: &E) -> Result<f64> {
    Ok(compute_errors(disc, uh, exact, &MethodParams::preset(Scheme::Classic))?.linf)
}

/// `rate_k = log(e_k/e_{k+1}) / log(N_{k+1}/N_k)`; for doubling sequences
/// the denominator is `log 2`.
pub fn convergence_rates(errors: &[(usize, f64)]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        .collect()
}

/// Least-squares slope of `log e` against `log h` (`h ∝ 1/N`).
pub fn loglog_slope(errors: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .map(|&(n, e)| (-(n as f64).ln(), e.ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

/// One solve: discretization data, errors and solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub n: usize,
    pub h: f64,
    pub mesh: String,
    pub scheme: String,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub sigma0: f64,
    pub alpha: f64,
    pub dofs: usize,
    pub interface_elements: usize,
    pub e_l2: f64,
    pub e_h1: f64,
    pub e_linf: f64,
    pub e_linf_nodal: f64,
    pub e_energy: f64,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    pub rate_linf: Option<f64>,
    pub rate_linf_nodal: Option<f64>,
    pub rate_energy: Option<f64>,
    pub solver: String,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
    Linf,
    LinfNodal,
    Energy,
}

impl Norm {
    pub const ALL: [Norm; 5] = [Norm::H1, Norm::L2, Norm::Linf, Norm::LinfNodal, Norm::Energy];

    pub fn of(self, r: &RunRecord) -> f64 {
        match self {
            Norm::L2 => r.e_l2,
            Norm::H1 => r.e_h1,
            Norm::Linf => r.e_linf,
            Norm::LinfNodal => r.e_linf_nodal,
            Norm::Energy => r.e_energy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::H1 => "h1",
            Norm::Linf => "linf",
            Norm::LinfNodal => "linf_nodal",
            Norm::Energy => "energy",
        }
    }

    fn header(self) -> &'static str {
        match self {
            Norm::L2 => "‖·‖_L2",
            Norm::H1 => "|·|_H1",
            Norm::Linf => "‖·‖_L∞",
            Norm::LinfNodal => "max nodal",
            Norm::Energy => "‖·‖_h",
        }
    }
}

/// Fill the rate columns of a sequence of records sharing scheme and mesh.
pub fn fill_rates(records: &mut [RunRecord]) {
    for norm in Norm::ALL {
        let errs: Vec<(usize, f64)> = records.iter().map(|r| (r.n, norm.of(r))).collect();
        let rates = convergence_rates(&errs);
        for (i, r) in records.iter_mut().enumerate() {
            let v = if i == 0 { None } else { Some(rates[i - 1]) };
            match norm {
                Norm::L2 => r.rate_l2 = v,
                Norm::H1 => r.rate_h1 = v,
                Norm::Linf => r.rate_linf = v,
                Norm::LinfNodal => r.rate_linf_nodal = v,
                Norm::Energy => r.rate_energy = v,
            }
        }
    }
}

pub fn write_csv<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Table with one row per `N` and an error/rate column pair per scheme.
pub fn markdown_table(records: &[RunRecord], norm: Norm) -> String {
    let mut schemes: Vec<&str> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in records {
        if !schemes.contains(&r.scheme.as_str()) {
            schemes.push(&r.scheme);
        }
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.sort_unstable();
    let find = |s: &str, n: usize| records.iter().find(|r| r.scheme == s && r.n == n);
    let label = |s: &str| Scheme::parse(s).map(|x| x.label()).unwrap_or("Custom");

    let mut out = String::new();
    out.push_str("|  N  |");
    for s in &schemes {
        out.push_str(&format!(" {} {} | rate |", label(s), norm.header()));
    }
    out.push_str("\n|----:|");
    for _ in &schemes {
        out.push_str("---------:|-------:|");
    }
    out.push('\n');
    let errs: Vec<Vec<(usize, f64)>> = schemes
        .iter()
        .map(|s| ns.iter().filter_map(|&n| find(s, n).map(|r| (n, norm.of(r)))).collect())
        .collect();
    for (row, &n) in ns.iter().enumerate() {
        out.push_str(&format!("| {n:>4} |"));
        for (si, s) in schemes.iter().enumerate() {
            match find(s, n) {
                Some(r) => {
                    let e = norm.of(r);
                    let pos = errs[si].iter().position(|x| x.0 == n).unwrap();
                    let rate = if pos == 0 || row == 0 {
                        String::new()
                    } else {
                        let prev = errs[si][pos - 1];
                        format!("{:.4}", convergence_rates(&[prev, (n, e)])[0])
                    };
                    out.push_str(&format!(" {} | {:>6} |", sci(e), rate));
                }
                None => out.push_str(" | |"),
            }
        }
        out.push('\n');
    }
    out
}

/// `6.4751E-2` style.
pub fn sci(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let mut mant = v / 10f64.powi(exp);
    let mut exp = exp;
    if (mant.abs() * 1e4).round() >= 1e5 {
        mant /= 10.0;
        exp += 1;
    }
    format!("{mant:.4}E{exp}")
}
