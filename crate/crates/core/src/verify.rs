//! Numerical probes of the IFE trace, coefficient and coercivity estimates.
//!
//! No lemma constant is asserted. Each scan checks that an observed ratio
//! stays bounded and stable when the sample set is refined, that it does
//! not depend on `h`, or that it decays at the expected rate.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{Discretization, MethodParams, Scheme, SystemParts};
use crate::geometry::{
    cut_by_chord, polygon_area, CellKind, Point, PolygonCut, RectCutType, Side,
};
use crate::ife_local::{build_bilinear_ife_basis, build_linear_ife_basis, LocalIFEBasis};
use crate::linsolve::banded_cholesky;
use crate::postprocess::{loglog_slope, ExactSolution};
use crate::quadrature::{map_square, rect_rule, split_edge_rule, split_polygon_rule};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x1fe_2016;

/// Allowed relative change of a scanned maximum under refinement.
pub const STABILITY_TOL: f64 = 0.10;

/// Samples with `‖√β∇v‖` below this are skipped as locally constant.
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

/// Chord ends are drawn from `[D_MIN, 1 − D_MIN]` of an edge.
pub const D_MIN: f64 = 0.01;

/// One observation of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSample {
    pub group: String,
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
}

/// A named predicate `value ≤ bound` (or `≥` when `upper` is false).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub upper: bool,
}

impl ScanCheck {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: true }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: false }
    }

    pub fn pass(&self) -> bool {
        if self.upper {
            self.value <= self.bound
        } else {
            self.value >= self.bound
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub scan_id: String,
    pub description: String,
    pub seed: u64,
    /// Meaning of the `a` and `b` sample columns.
    pub columns: [String; 2],
    pub samples: Vec<ScanSample>,
    pub max: f64,
    pub min: f64,
    pub argmax: usize,
    pub skipped: usize,
    pub checks: Vec<ScanCheck>,
    /// Extra reported values that do not enter the pass flag.
    pub notes: Vec<(String, f64)>,
    pub pass: bool,
}

impl ScanReport {
    fn new(
        scan_id: &str,
        description: String,
        seed: u64,
        columns: [&str; 2],
        samples: Vec<ScanSample>,
        checks: Vec<ScanCheck>,
    ) -> Self {
        let finite = samples.iter().all(|s| s.ratio.is_finite());
        let (mut max, mut min, mut argmax) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        for (i, s) in samples.iter().enumerate() {
            if s.ratio > max {
                max = s.ratio;
                argmax = i;
            }
            min = min.min(s.ratio);
        }
        let pass = finite && !samples.is_empty() && checks.iter().all(ScanCheck::pass);
        Self {
            scan_id: scan_id.to_string(),
            description,
            seed,
            columns: columns.map(str::to_string),
            samples,
            max,
            min,
            argmax,
            skipped: 0,
            checks,
            notes: Vec::new(),
            pass,
        }
    }

    /// Samples as CSV: `scan_id, group, <a>, <b>, ratio`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["scan_id", "group", &self.columns[0], &self.columns[1], "ratio"])?;
        for s in &self.samples {
            wr.write_record([
                self.scan_id.clone(),
                s.group.clone(),
                format!("{:.17e}", s.a),
                format!("{:.17e}", s.b),
                format!("{:.17e}", s.ratio),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ScanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: max {:.4e}, min {:.4e} over {} samples (seed {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.scan_id,
            self.max,
            self.min,
            self.samples.len(),
            self.seed
        )?;
        if self.skipped > 0 {
            write!(f, ", {} skipped", self.skipped)?;
        }
        let ok = self.checks.iter().filter(|c| c.pass()).count();
        write!(f, "; {ok}/{} checks hold", self.checks.len())?;
        for c in self.checks.iter().filter(|c| !c.pass()) {
            let op = if c.upper { "<=" } else { ">=" };
            write!(f, "; violated: {} {:.4e} {op} {:.4e}", c.name, c.value, c.bound)?;
        }
        for (k, v) in &self.notes {
            write!(f, "; {k} {v:.4e}")?;
        }
        Ok(())
    }
}

/// Chord of a reference element `[0, h]²` or the triangle `(0,0), (h,0),
/// (0,h)`, given as fractions of the edges it crosses.
///
/// Type I puts `D = (0, dh)` and `E = (eh, 0)`; type II (rectangles only)
/// puts `D = (dh, h)` and `E = (eh, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCut {
    pub rect_type: RectCutType,
    pub d: f64,
    pub e: f64,
}

impl ReferenceCut {
    pub fn endpoints(&self, h: f64) -> (Point, Point) {
        let e = Point::new(self.e * h, 0.0);
        let d = match self.rect_type {
            RectCutType::TypeI => Point::new(0.0, self.d * h),
            RectCutType::TypeII => Point::new(self.d * h, h),
        };
        (d, e)
    }

    fn label(&self) -> &'static str {
        match self.rect_type {
            RectCutType::TypeI => "I",
            RectCutType::TypeII => "II",
        }
    }
}

pub fn reference_vertices(kind: CellKind, h: f64) -> Vec<Point> {
    match kind {
        CellKind::Triangular => vec![Point::new(0.0, 0.0), Point::new(h, 0.0), Point::new(0.0, h)],
        CellKind::Rectangular => vec![
            Point::new(0.0, 0.0),
            Point::new(h, 0.0),
            Point::new(h, h),
            Point::new(0.0, h),
        ],
    }
}

/// IFE basis on a reference element; the piece containing the origin is
/// `K⁻`.
pub fn reference_basis(
    kind: CellKind,
    cut: ReferenceCut,
    h: f64,
    beta: (f64, f64),
) -> Result<LocalIFEBasis> {
    let verts = reference_vertices(kind, h);
    let (d, e) = cut.endpoints(h);
    let geom = match cut_by_chord(&verts, d, e, Point::new(1.0, 1.0), h, 1e-12)? {
        PolygonCut::Cut(g) => g,
        PolygonCut::Uncut(_) => {
            return Err(Error::Config(format!("chord {d:?}-{e:?} does not cut the element")))
        }
    };
    let b = match kind {
        CellKind::Triangular => build_linear_ife_basis(0, &verts, h, &geom, beta.0, beta.1),
        CellKind::Rectangular => build_bilinear_ife_basis(0, &verts, h, &geom, beta.0, beta.1),
    };
    b.map_err(|source| Error::Basis { element: 0, source })
}

fn draw_cut(rng: &mut ChaCha8Rng, kind: CellKind) -> ReferenceCut {
    let rect_type = match kind {
        CellKind::Rectangular if rng.gen_bool(0.5) => RectCutType::TypeII,
        _ => RectCutType::TypeI,
    };
    ReferenceCut {
        rect_type,
        d: rng.gen_range(D_MIN..=1.0 - D_MIN),
        e: rng.gen_range(D_MIN..=1.0 - D_MIN),
    }
}

/// Cuts of one scan: a lattice on `[D_MIN, 1 − D_MIN]²` per cut type plus
/// random draws. `coarse[i]` marks the cuts of the unrefined set, which
/// holds every other lattice line and the first quarter of the random
/// draws; the refined set has four times as many cuts of each kind.
#[derive(Debug, Clone)]
pub struct CutSet {
    pub cuts: Vec<ReferenceCut>,
    pub coarse: Vec<bool>,
}

impl CutSet {
    pub fn new(kind: CellKind, samples: usize, rng: &mut ChaCha8Rng) -> Self {
        let types: &[RectCutType] = match kind {
            CellKind::Triangular => &[RectCutType::TypeI],
            CellKind::Rectangular => &[RectCutType::TypeI, RectCutType::TypeII],
        };
        let m = ((samples as f64 / 2.0).sqrt().ceil() as usize).max(2);
        let fine = 2 * m - 1;
        let t = |i: usize| D_MIN + (1.0 - 2.0 * D_MIN) * i as f64 / (fine - 1) as f64;
        let mut cuts = Vec::new();
        let mut coarse = Vec::new();
        for &rect_type in types {
            for i in 0..fine {
                for j in 0..fine {
                    cuts.push(ReferenceCut { rect_type, d: t(i), e: t(j) });
                    coarse.push(i % 2 == 0 && j % 2 == 0);
                }
            }
        }
        for k in 0..4 * samples {
            cuts.push(draw_cut(rng, kind));
            coarse.push(k < samples);
        }
        Self { cuts, coarse }
    }

    /// Maxima of `values` over the coarse and the refined set.
    pub fn maxima(&self, values: impl Iterator<Item = f64>) -> (f64, f64) {
        let (mut c, mut f) = (0.0f64, 0.0f64);
        for (v, &is_coarse) in values.zip(&self.coarse) {
            f = f.max(v);
            if is_coarse {
                c = c.max(v);
            }
        }
        (c, f)
    }
}

/// Uniform point on the unit sphere of `R^n`.
fn draw_unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

fn stream_seed(seed: u64, stream: usize) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream as u64 + 1))
}

fn beta_label(beta: (f64, f64)) -> String {
    format!("beta=({}/{})", beta.0, beta.1)
}

fn relative_change(coarse: f64, fine: f64) -> f64 {
    (fine - coarse).abs() / coarse.abs().max(f64::MIN_POSITIVE)
}

/// `max_j max(‖cⱼ⁻‖/‖cⱼ⁺‖, ‖cⱼ⁺‖/‖cⱼ⁻‖)` over the basis functions.
pub fn coefficient_ratio(basis: &LocalIFEBasis) -> f64 {
    let norm = |c: &[f64; 4]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
    basis
        .pieces
        .iter()
        .map(|[m, p]| {
            let r = norm(&m.0) / norm(&p.0);
            r.max(1.0 / r)
        })
        .fold(0.0, f64::max)
}

/// Coefficient-bound scan over the cuts of a [`CutSet`] per coefficient
/// pair; passes when every maximum is finite and the maximum over the
/// coarse set is within 10% of the maximum over the refined set.
pub fn scan_coefficient_bounds(
    kind: CellKind,
    betas: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<ScanReport> {
    let mut all = Vec::new();
    let mut checks = Vec::new();
    for (bi, &beta) in betas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, bi));
        let set = CutSet::new(kind, samples, &mut rng);
        let cuts = &set.cuts;
        let ratios = cuts
            .par_iter()
            .map(|&c| Ok(coefficient_ratio(&reference_basis(kind, c, 1.0, beta)?)))
            .collect::<Result<Vec<f64>>>()?;
        let (coarse, fine) = set.maxima(ratios.iter().cloned());
        checks.push(ScanCheck::at_most(
            format!("{} max change x4", beta_label(beta)),
            relative_change(coarse, fine),
            STABILITY_TOL,
        ));
        all.extend(cuts.iter().zip(&ratios).map(|(c, &r)| ScanSample {
            group: format!("{} type {}", beta_label(beta), c.label()),
            a: c.d,
            b: c.e,
            ratio: r,
        }));
    }
    Ok(ScanReport::new(
        "scan_coefficient_bounds",
        format!("{} IFE, max(|c-|/|c+|, |c+|/|c-|) over basis functions, d,e in [{D_MIN}, {}]", kind.short_name(), 1.0 - D_MIN),
        seed,
        ["d", "e"],
        all,
        checks,
    ))
}

/// `max_B ‖β∇v·n_B‖_{L²(B)} / (h^{1/2}|K|^{-1/2}‖√β∇v‖_{L²(K)})`, or `None`
/// when `‖√β∇v‖` is below [`DEGENERATE_GRADIENT`].
pub fn trace_ratio(basis: &LocalIFEBasis, coeffs: &[f64], polys: [&[Point]; 2]) -> Result<Option<f64>> {
    let beta = |s: Side| s.select(basis.beta.0, basis.beta.1);
    let mut vol = 0.0;
    for (side, poly) in [(Side::Minus, polys[0]), (Side::Plus, polys[1])] {
        let rule = split_polygon_rule(poly, 4)?;
        for (p, w) in rule.iter() {
            let g = grad_on(basis, coeffs, side, p);
            vol += w * beta(side) * g.dot(g);
        }
    }
    let grad_norm = vol.sqrt();
    if grad_norm < DEGENERATE_GRADIENT {
        return Ok(None);
    }
    let chord = basis.chord.expect("interface basis");
    let verts = &basis.vertices;
    let n = verts.len();
    let area = polygon_area(verts);
    let mut best: f64 = 0.0;
    for i in 0..n {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        let normal = (b - a).perp().normalized();
        let cross = [chord.d, chord.e].into_iter().find(|&q| on_open_segment(a, b, q, basis.h));
        let rule = split_edge_rule(a, b, cross, 4)?;
        let mut s = 0.0;
        for (p, w) in rule.iter() {
            let side = basis.side_of(p);
            let flux = beta(side) * grad_on(basis, coeffs, side, p).dot(normal);
            s += w * flux * flux;
        }
        best = best.max(s.sqrt());
    }
    Ok(Some(best / (basis.h.sqrt() / area.sqrt() * grad_norm)))
}

fn on_open_segment(a: Point, b: Point, q: Point, h: f64) -> bool {
    let t = (q - a).dot(b - a) / (b - a).dot(b - a);
    t > 1e-12 && t < 1.0 - 1e-12 && a.lerp(b, t).distance(q) <= 1e-12 * h
}

fn grad_on(basis: &LocalIFEBasis, coeffs: &[f64], side: Side, p: Point) -> Point {
    let mut g = Point::default();
    for (j, &c) in coeffs.iter().enumerate() {
        g += basis.grad_on(j, side, p) * c;
    }
    g
}

/// Edge and volume Gram matrices of the basis of `basis`:
/// `G_ij = ∫_K β∇φᵢ·∇φⱼ` and, per edge `B`, `A_ij = ∫_B (β∇φᵢ·n_B)(β∇φⱼ·n_B)`.
fn trace_gram(basis: &LocalIFEBasis, polys: [&[Point]; 2]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let nv = basis.len();
    let beta = |s: Side| s.select(basis.beta.0, basis.beta.1);
    let mut g = vec![Point::default(); nv];
    let mut gram = DMatrix::zeros(nv, nv);
    for (side, poly) in [(Side::Minus, polys[0]), (Side::Plus, polys[1])] {
        for (p, w) in split_polygon_rule(poly, 4)?.iter() {
            basis.grad_all_on(side, p, &mut g);
            for i in 0..nv {
                for j in 0..nv {
                    gram[(i, j)] += w * beta(side) * g[i].dot(g[j]);
                }
            }
        }
    }
    let chord = basis.chord.expect("interface basis");
    let verts = &basis.vertices;
    let mut edges = Vec::with_capacity(verts.len());
    for i in 0..verts.len() {
        let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
        let normal = (b - a).perp().normalized();
        let cross = [chord.d, chord.e].into_iter().find(|&q| on_open_segment(a, b, q, basis.h));
        let mut m = DMatrix::zeros(nv, nv);
        for (p, w) in split_edge_rule(a, b, cross, 4)?.iter() {
            let side = basis.side_of(p);
            basis.grad_all_on(side, p, &mut g);
            for i in 0..nv {
                for j in 0..nv {
                    m[(i, j)] += w * beta(side).powi(2) * g[i].dot(normal) * g[j].dot(normal);
                }
            }
        }
        edges.push(m);
    }
    Ok((gram, edges))
}

/// Supremum of [`trace_ratio`] over all coefficient vectors: the square root
/// of the largest generalized eigenvalue of `(A_B, G)` over the edges,
/// restricted to the complement of the constants.
pub fn worst_trace_ratio(basis: &LocalIFEBasis, polys: [&[Point]; 2]) -> Result<f64> {
    let (gram, edges) = trace_gram(basis, polys)?;
    let nv = basis.len();
    // columns e_i − e_last span the complement of the constants
    let mut q = DMatrix::zeros(nv, nv - 1);
    for i in 0..nv - 1 {
        q[(i, i)] = 1.0;
        q[(nv - 1, i)] = -1.0;
    }
    let gq = q.transpose() * &gram * &q;
    let chol = gq.cholesky().ok_or_else(|| Error::Config("degenerate gradient Gram matrix".into()))?;
    let linv = chol.l().try_inverse().expect("triangular factor is invertible");
    let area = polygon_area(&basis.vertices);
    let mut lam: f64 = 0.0;
    for a in edges {
        let m = &linv * (q.transpose() * a * &q) * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        lam = lam.max(m.symmetric_eigenvalues().max());
    }
    Ok(lam.max(0.0).sqrt() * area.sqrt() / basis.h.sqrt())
}

pub const TRACE_SCALES: [f64; 3] = [1.0, 0.5, 0.25];

fn reference_polys(kind: CellKind, cut: ReferenceCut, h: f64) -> Result<[Vec<Point>; 2]> {
    let (d, e) = cut.endpoints(h);
    match cut_by_chord(&reference_vertices(kind, h), d, e, Point::new(1.0, 1.0), h, 1e-12)? {
        PolygonCut::Cut(g) => Ok([g.minus_poly, g.plus_poly]),
        PolygonCut::Uncut(_) => Err(Error::Config(format!("chord {d:?}-{e:?} does not cut the element"))),
    }
}

/// Trace-ratio scan over the cuts of a [`CutSet`] per coefficient pair and
/// each `h` in [`TRACE_SCALES`].
///
/// Each sample is [`worst_trace_ratio`] of one cut, so the maximum runs
/// over cuts and over the whole unit sphere of coefficient vectors. Passes
/// when each maximum changes by less than 10% between the coarse and the
/// refined cut set, and the maxima for different `h` agree within
/// 10%. The maximum of [`trace_ratio`] over one random unit coefficient
/// vector per cut is reported as a note. For rectangles the quadrant
/// gradient bound of [`gradient_lower_bound_ratios`] is checked as well.
pub fn scan_trace_ratio(
    kind: CellKind,
    betas: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<ScanReport> {
    let nv = kind.vertices_per_element();
    let mut all = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut skipped = 0;
    for (bi, &beta) in betas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, bi));
        let set = CutSet::new(kind, samples, &mut rng);
        let draws: Vec<(ReferenceCut, Vec<f64>)> = set
            .cuts
            .iter()
            .map(|&c| (c, draw_unit_vector(&mut rng, nv)))
            .collect();
        let mut per_h = Vec::new();
        let mut random_max: f64 = 0.0;
        for &h in &TRACE_SCALES {
            let ratios = draws
                .par_iter()
                .map(|(c, v)| {
                    let basis = reference_basis(kind, *c, h, beta)?;
                    let [m, p] = reference_polys(kind, *c, h)?;
                    let random = trace_ratio(&basis, v, [&m, &p])?;
                    Ok((worst_trace_ratio(&basis, [&m, &p])?, random))
                })
                .collect::<Result<Vec<(f64, Option<f64>)>>>()?;
            let (coarse, fine) = set.maxima(ratios.iter().map(|x| x.0));
            checks.push(ScanCheck::at_most(
                format!("{} h={h} max change x4", beta_label(beta)),
                relative_change(coarse, fine),
                STABILITY_TOL,
            ));
            per_h.push(fine);
            skipped += ratios.iter().filter(|x| x.1.is_none()).count();
            random_max = random_max.max(ratios.iter().filter_map(|x| x.1).fold(0.0, f64::max));
            all.extend(draws.iter().zip(&ratios).map(|((c, _), r)| ScanSample {
                group: format!("{} h={h} type {}", beta_label(beta), c.label()),
                a: c.d,
                b: c.e,
                ratio: r.0,
            }));
        }
        let lo = per_h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per_h.iter().cloned().fold(0.0, f64::max);
        checks.push(ScanCheck::at_most(
            format!("{} spread over h", beta_label(beta)),
            relative_change(lo, hi),
            STABILITY_TOL,
        ));
        notes.push((format!("{} max over random unit vectors", beta_label(beta)), random_max));
    }
    if kind == CellKind::Rectangular {
        let ratios = gradient_lower_bound_ratios(samples, stream_seed(seed, betas.len()));
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(ScanCheck::at_least("quadrant gradient bound min ratio", min, quadrant_constant()));
        notes.push(("quadrant constant without 1/48".to_string(), 48.0 * quadrant_constant()));
    }
    let mut report = ScanReport::new(
        "scan_trace_ratio",
        format!("{} IFE, sup over unit coefficient vectors and edges of the flux trace ratio, h in {TRACE_SCALES:?}", kind.short_name()),
        seed,
        ["d", "e"],
        all,
        checks,
    );
    report.skipped = skipped;
    report.notes = notes;
    Ok(report)
}

/// `σ` that balances the two terms of the quadrant bound.
pub fn quadrant_sigma() -> f64 {
    (2.0 + 652f64.sqrt()) / 36.0
}

/// `min{12 − 9/σ, 2(7 − 9σ)}/48` at [`quadrant_sigma`].
pub fn quadrant_constant() -> f64 {
    let s = quadrant_sigma();
    (12.0 - 9.0 / s).min(2.0 * (7.0 - 9.0 * s)) / 48.0
}

/// `‖∇v‖²_{L²(K₄)} / (h²(c₂² + c₃² + c₄²h²))` for `v = c₁ + c₂x + c₃y + c₄xy`
/// on the upper-right quadrant `K₄ = [h/2, h]²` of `[0, h]²`.
pub fn quadrant_gradient_ratio(c: [f64; 4], h: f64) -> f64 {
    let rule = map_square(rect_rule(4).expect("degree 4"), Point::new(0.5 * h, 0.5 * h), 0.5 * h);
    let g2 = rule.integrate(|p| {
        let (vx, vy) = (c[1] + c[3] * p.y, c[2] + c[3] * p.x);
        vx * vx + vy * vy
    });
    g2 / (h * h * (c[1] * c[1] + c[2] * c[2] + c[3] * c[3] * h * h))
}

/// Quadrant ratios for `samples` random unit coefficient vectors at every
/// `h` in [`TRACE_SCALES`].
pub fn gradient_lower_bound_ratios(samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples * TRACE_SCALES.len());
    for _ in 0..samples {
        let v = draw_unit_vector(&mut rng, 4);
        let c = [v[0], v[1], v[2], v[3]];
        for &h in &TRACE_SCALES {
            // scale c₄ so that c₄h stays comparable to c₂, c₃
            out.push(quadrant_gradient_ratio([c[0], c[1], c[2], c[3] / h], h));
        }
    }
    out
}

/// Mesh sizes and penalty search settings of [`scan_coercivity`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoercivitySettings {
    pub ns: Vec<usize>,
    pub betas: Vec<(f64, f64)>,
    pub kind: CellKind,
    pub schemes: Vec<MethodParams>,
    /// Stop bisecting once `hi/lo` falls below this factor.
    pub bisect_factor: f64,
}

impl Default for CoercivitySettings {
    fn default() -> Self {
        Self {
            ns: vec![10, 20, 40],
            betas: vec![(1.0, 10.0), (1.0, 1e4)],
            kind: CellKind::Rectangular,
            schemes: [Scheme::Spp, Scheme::Ipp, Scheme::Npp].map(MethodParams::preset).to_vec(),
            bisect_factor: 1.1,
        }
    }
}

fn circle_disc(n: usize, kind: CellKind, beta: (f64, f64)) -> Result<Discretization> {
    crate::harness::circle_problem(n, kind, beta.0, beta.1)
}

/// Whether the symmetric part of the interior-node matrix
/// `V + δC + εCᵀ + σ⁰P₁` admits a Cholesky factorization; `P₁` is the
/// penalty assembled with `σ⁰ = 1`.
fn symmetric_part_pd(parts: &SystemParts, free: &[usize], delta: f64, epsilon: f64, sigma0: f64) -> bool {
    let a = parts.combine(delta, epsilon, sigma0).submatrix(free, free);
    banded_cholesky(&a.symmetric_part()).is_ok()
}

/// Cholesky check of the symmetric part of every preset in `settings` on
/// the circle problem; the pass flag requires all of them to succeed.
///
/// For every mesh and coefficient pair the smallest SPP `σ⁰` that keeps
/// the symmetric part positive definite is bracketed by bisection and
/// reported as a sample with `ratio = σ⁰_min / max β`.
pub fn scan_coercivity(settings: &CoercivitySettings) -> Result<ScanReport> {
    let mut samples = Vec::new();
    let mut checks = Vec::new();
    for &beta in &settings.betas {
        for &n in &settings.ns {
            let disc = circle_disc(n, settings.kind, beta)?;
            let mut unit = MethodParams::preset(Scheme::Spp).with_sigma0(1.0);
            unit.alpha = settings.schemes.first().map_or(1.0, |p| p.alpha);
            let parts = SystemParts::assemble(&disc, &unit)?;
            let mesh = disc.mesh();
            let free: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| !mesh.boundary_node[i]).collect();
            for p in &settings.schemes {
                let sigma = p.sigma0.value(0, beta.0, beta.1);
                let ok = symmetric_part_pd(&parts, &free, p.delta, p.epsilon, sigma);
                checks.push(ScanCheck::at_least(
                    format!("{} N={n} {} sigma0={sigma} PD", beta_label(beta), p.scheme.name()),
                    f64::from(u8::from(ok)),
                    1.0,
                ));
            }
            let threshold = spp_threshold(&parts, &free, beta.0.max(beta.1), settings.bisect_factor);
            samples.push(ScanSample {
                group: format!("{} N={n}", beta_label(beta)),
                a: n as f64,
                b: threshold,
                ratio: threshold / beta.0.max(beta.1),
            });
        }
    }
    Ok(ScanReport::new(
        "scan_coercivity",
        format!(
            "{} mesh, Cholesky of the symmetric part on interior nodes; ratio = minimal SPP sigma0 / max beta",
            settings.kind.short_name()
        ),
        0,
        ["N", "sigma0_min"],
        samples,
        checks,
    ))
}

/// Smallest `σ⁰` (up to `factor`) with a positive definite SPP symmetric
/// part; `0` if already definite without penalty.
fn spp_threshold(parts: &SystemParts, free: &[usize], max_beta: f64, factor: f64) -> f64 {
    let pd = |s: f64| symmetric_part_pd(parts, free, -1.0, -1.0, s);
    if pd(0.0) {
        return 0.0;
    }
    let mut hi = max_beta;
    while !pd(hi) {
        hi *= 4.0;
        if hi > 1e12 * max_beta {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 4.0;
    while pd(lo) {
        hi = lo;
        lo /= 4.0;
        if lo < 1e-12 * max_beta {
            return hi;
        }
    }
    while hi / lo > factor {
        let mid = (hi * lo).sqrt();
        if pd(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Per-mesh sums of `‖β∇(u − I_h u)|_K·n_B‖²_{L²(B)}` over interface edges
/// `B` and both neighbours `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeInterpolationError {
    pub n: usize,
    pub sum: f64,
    pub max_edge: f64,
    pub edges: usize,
}

pub fn interface_edge_interpolation_error<E: ExactSolution>(
    disc: &Discretization,
    exact: &E,
) -> Result<EdgeInterpolationError> {
    let iface = disc.cm.iface;
    let uh = disc.interpolate(|p| exact.u(p, iface.side(p)));
    let edges: Vec<usize> = disc.cm.interface_edges().collect();
    let per_edge = edges
        .par_iter()
        .map(|&e| {
            let mesh = disc.mesh();
            let edge = &mesh.edges[e];
            let (a, b) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
            let rule = split_edge_rule(a, b, disc.edge_breakpoint(e), 8)?;
            let mut s = 0.0;
            for k in std::iter::once(edge.left).chain(edge.right) {
                s += rule.integrate(|p| {
                    let side = disc.piece_side(k, p);
                    let g = exact.grad(p, side) - disc.grad_element(k, &uh, p);
                    let f = disc.beta(side) * g.dot(edge.normal);
                    f * f
                });
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EdgeInterpolationError {
        n: disc.mesh().spec.n,
        sum: per_edge.iter().sum(),
        max_edge: per_edge.iter().cloned().fold(0.0, f64::max),
        edges: per_edge.len(),
    })
}

/// Required log-log slope of the summed squared edge error.
pub const EDGE_SUM_SLOPE: f64 = 1.8;

/// Edge interpolation study on the circle problem; passes when the summed
/// squared error decays with log-log slope at least [`EDGE_SUM_SLOPE`].
/// The slope of the largest single-edge contribution is reported as a note.
pub fn interp_edge_error_study<E: ExactSolution>(
    ns: &[usize],
    kind: CellKind,
    beta: (f64, f64),
    exact: &E,
) -> Result<ScanReport> {
    let mut rows = Vec::new();
    for &n in ns {
        let disc = circle_disc(n, kind, beta)?;
        rows.push(interface_edge_interpolation_error(&disc, exact)?);
    }
    let sums: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.sum)).collect();
    let maxes: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.max_edge)).collect();
    let slope = loglog_slope(&sums);
    let samples = rows
        .iter()
        .map(|r| ScanSample {
            group: format!("{} N={}", beta_label(beta), r.n),
            a: r.n as f64,
            b: r.max_edge,
            ratio: r.sum,
        })
        .collect();
    let mut report = ScanReport::new(
        "interp_edge_error_study",
        format!(
            "{} mesh, sum over interface edges of |beta grad(u - I_h u).n|^2, N in {ns:?}",
            kind.short_name()
        ),
        0,
        ["N", "max_edge"],
        samples,
        vec![ScanCheck::at_least("log-log slope of the sum", slope, EDGE_SUM_SLOPE)],
    );
    report.notes.push(("log-log slope of the largest edge term".to_string(), loglog_slope(&maxes)));
    Ok(report)
}

/// Settings of [`run_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub samples: usize,
    pub seed: u64,
    pub betas: Vec<(f64, f64)>,
    pub coercivity: CoercivitySettings,
    pub interp_ns: Vec<usize>,
    pub interp_beta: (f64, f64),
    pub interp_kind: CellKind,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: DEFAULT_SEED,
            betas: vec![(1.0, 10.0), (1.0, 1e4), (10.0, 1.0)],
            coercivity: CoercivitySettings::default(),
            interp_ns: vec![20, 40, 80, 160],
            interp_beta: (1.0, 10.0),
            interp_kind: CellKind::Rectangular,
        }
    }
}

/// The four scans, with the coefficient and trace scans merged over both
/// element kinds.
pub fn run_all(settings: &VerifySettings) -> Result<Vec<ScanReport>> {
    let kinds = [CellKind::Triangular, CellKind::Rectangular];
    let mut coef = Vec::new();
    let mut trace = Vec::new();
    for kind in kinds {
        coef.push(scan_coefficient_bounds(kind, &settings.betas, settings.samples, settings.seed)?);
        trace.push(scan_trace_ratio(kind, &settings.betas, settings.samples, settings.seed)?);
    }
    let exact = crate::harness::circle_solution(settings.interp_beta.0, settings.interp_beta.1);
    Ok(vec![
        merge_reports(coef),
        merge_reports(trace),
        scan_coercivity(&settings.coercivity)?,
        interp_edge_error_study(&settings.interp_ns, settings.interp_kind, settings.interp_beta, &exact)?,
    ])
}

/// Concatenate reports of the same scan, prefixing sample groups with the
/// source description.
pub fn merge_reports(reports: Vec<ScanReport>) -> ScanReport {
    let first = &reports[0];
    let (scan_id, seed, columns) = (first.scan_id.clone(), first.seed, first.columns.clone());
    let description = reports.iter().map(|r| r.description.as_str()).collect::<Vec<_>>().join(" | ");
    let mut samples = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut skipped = 0;
    for r in reports {
        let tag = r.description.split_whitespace().next().unwrap_or("").to_string();
        samples.extend(r.samples.into_iter().map(|mut s| {
            s.group = format!("{tag} {}", s.group);
            s
        }));
        checks.extend(r.checks.into_iter().map(|mut c| {
            c.name = format!("{tag} {}", c.name);
            c
        }));
        notes.extend(r.notes);
        skipped += r.skipped;
    }
    let cols = [columns[0].as_str(), columns[1].as_str()];
    let mut out = ScanReport::new(&scan_id, description, seed, cols, samples, checks);
    out.notes = notes;
    out.skipped = skipped;
    out
}
