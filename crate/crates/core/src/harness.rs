//! Experiment driver: run configuration, single solves, convergence studies
//! and verification scans.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{apply_dirichlet, assemble_system, Discretization, MethodParams, Scheme};
use crate::geometry::{CellKind, DomainSpec, GeometryError, InterfaceGeometry, LevelSet};
use crate::linsolve::{bicgstab, cg, dense_solve, gmres, LinsolveError, Preconditioner, SolveOutput};
use crate::postprocess::{
    compute_errors, fill_rates, markdown_table, write_csv, CircleSolution, ErrorNorms,
    ExactSolution, Norm, RunRecord,
};
use crate::verify::{self, CoercivitySettings, ScanReport, VerifySettings};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// CG for symmetric forms (`δ = ε`); otherwise BiCGSTAB, falling back
    /// to restarted GMRES when it stagnates.
    #[default]
    Auto,
    Cg,
    Bicgstab,
    Gmres,
    Dense,
}

impl SolverChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Some(Self::Auto),
            "cg" => Some(Self::Cg),
            "bicgstab" => Some(Self::Bicgstab),
            "gmres" => Some(Self::Gmres),
            "dense" => Some(Self::Dense),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub choice: SolverChoice,
    pub tol: f64,
    /// Iteration cap as a multiple of the number of unknowns.
    pub max_iter_factor: usize,
    pub precond: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            choice: SolverChoice::Auto,
            tol: crate::linsolve::DEFAULT_TOL,
            max_iter_factor: 20,
            precond: Preconditioner::Jacobi,
        }
    }
}

/// Nodal solution of one discrete problem with solver statistics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub uh: Vec<f64>,
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
}

/// Assemble, apply boundary values of the exact solution and solve.
pub fn solve<E: ExactSolution>(
    disc: &Discretization,
    params: &MethodParams,
    exact: &E,
    settings: &SolverSettings,
) -> Result<Solution> {
    let sys = assemble_system(disc, params, |p, s| exact.f(p, s))?;
    let iface = disc.cm.iface;
    let red = apply_dirichlet(&sys, disc.mesh(), |p| exact.u(p, iface.side(p)));
    let n = red.b.len();
    let max_iter = settings.max_iter_factor * n.max(1);
    let (tol, pc) = (settings.tol, settings.precond);
    let (out, name) = match settings.choice {
        SolverChoice::Auto if params.is_symmetric() => (cg(&red.a, &red.b, tol, max_iter, pc)?, "cg"),
        SolverChoice::Auto => {
            // BiCGSTAB either converges quickly here or not at all
            match bicgstab(&red.a, &red.b, tol, (max_iter / 10).max(1), pc) {
                Ok(out) => (out, "bicgstab"),
                Err(LinsolveError::NotConverged(first)) => {
                    let mut out = gmres(&red.a, &red.b, tol, max_iter, pc)?;
                    out.iterations += first.iterations;
                    (out, "bicgstab+gmres")
                }
                Err(e) => return Err(e.into()),
            }
        }
        SolverChoice::Cg => (cg(&red.a, &red.b, tol, max_iter, pc)?, "cg"),
        SolverChoice::Bicgstab => (bicgstab(&red.a, &red.b, tol, max_iter, pc)?, "bicgstab"),
        SolverChoice::Gmres => (gmres(&red.a, &red.b, tol, max_iter, pc)?, "gmres"),
        SolverChoice::Dense => {
            let x = dense_solve(&red.a, &red.b)?;
            (SolveOutput { x, iterations: 1, residual: 0.0 }, "dense")
        }
    };
    Ok(Solution {
        uh: red.expand(&out.x),
        solver: name,
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// Radius of the circular interface of the test problem.
pub const CIRCLE_RADIUS: f64 = std::f64::consts::PI / 6.28;

pub fn circle_solution(beta_minus: f64, beta_plus: f64) -> CircleSolution {
    CircleSolution::new(CIRCLE_RADIUS, beta_minus, beta_plus)
}

/// The circular-interface test problem on `(−1, 1)²`.
pub fn circle_problem(
    n: usize,
    kind: CellKind,
    beta_minus: f64,
    beta_plus: f64,
) -> Result<Discretization> {
    let spec = DomainSpec::new(-1.0, 1.0, -1.0, 1.0, n, kind)?;
    let iface = InterfaceGeometry::new(LevelSet::Circle {
        cx: 0.0,
        cy: 0.0,
        r: CIRCLE_RADIUS,
    });
    Discretization::new(&spec, iface, beta_minus, beta_plus)
}

pub fn solve_and_measure<E: ExactSolution>(
    disc: &Discretization,
    params: &MethodParams,
    exact: &E,
    settings: &SolverSettings,
) -> Result<(Solution, ErrorNorms)> {
    let sol = solve(disc, params, exact, settings)?;
    let errs = compute_errors(disc, &sol.uh, exact, params)?;
    Ok((sol, errs))
}

/// Experiment configuration. Read from a flat TOML file; every key can be
/// overridden with [`RunConfig::set`] using the same name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `[xmin, xmax, ymin, ymax]`
    pub domain: [f64; 4],
    /// `circle(cx,cy,r)`; the manufactured solution needs `cx = cy = 0`.
    pub interface: String,
    pub mesh: String,
    #[serde(rename = "N", alias = "n")]
    pub n: Vec<usize>,
    pub scheme: Vec<String>,
    #[serde(alias = "beta-minus")]
    pub beta_minus: f64,
    #[serde(alias = "beta-plus")]
    pub beta_plus: f64,
    /// Overrides the preset `σ⁰` of every penalized scheme when set.
    pub sigma0: Option<f64>,
    #[serde(alias = "penalty-alpha")]
    pub penalty_alpha: f64,
    pub solver: String,
    #[serde(alias = "solver-tol")]
    pub solver_tol: f64,
    pub seed: u64,
    /// Random cuts per scan in `verify`.
    pub samples: usize,
    pub out: PathBuf,
    #[serde(alias = "dump-field")]
    pub dump_field: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: [-1.0, 1.0, -1.0, 1.0],
            interface: LevelSet::Circle { cx: 0.0, cy: 0.0, r: CIRCLE_RADIUS }.to_string(),
            mesh: "rect".into(),
            n: vec![20, 40, 80, 160, 320],
            scheme: Scheme::PAPER.iter().map(|s| s.name().to_string()).collect(),
            beta_minus: 1.0,
            beta_plus: 10.0,
            sigma0: None,
            penalty_alpha: 1.0,
            solver: "auto".into(),
            solver_tol: crate::linsolve::DEFAULT_TOL,
            seed: verify::DEFAULT_SEED,
            samples: 1000,
            out: PathBuf::from("out"),
            dump_field: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse_num(key, x)).collect()
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Set one key from its command-line form; `-` and `_` are
    /// interchangeable and lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim_start_matches('-').replace('-', "_");
        match k.as_str() {
            "domain" => {
                let v: Vec<f64> = parse_list(&k, value)?;
                self.domain = v
                    .try_into()
                    .map_err(|_| config_err("domain needs four values xmin,xmax,ymin,ymax"))?;
            }
            "interface" => self.interface = value.to_string(),
            "mesh" => self.mesh = value.to_string(),
            "N" | "n" => self.n = parse_list(&k, value)?,
            "scheme" => self.scheme = value.split(',').map(|s| s.trim().to_string()).collect(),
            "beta_minus" => self.beta_minus = parse_num(&k, value)?,
            "beta_plus" => self.beta_plus = parse_num(&k, value)?,
            "sigma0" => self.sigma0 = Some(parse_num(&k, value)?),
            "penalty_alpha" => self.penalty_alpha = parse_num(&k, value)?,
            "solver" => self.solver = value.to_string(),
            "solver_tol" => self.solver_tol = parse_num(&k, value)?,
            "seed" => self.seed = parse_num(&k, value)?,
            "samples" => self.samples = parse_num(&k, value)?,
            "out" => self.out = PathBuf::from(value),
            "dump_field" => {
                self.dump_field = match value {
                    "" | "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(config_err(format!("dump_field: cannot parse `{value}`"))),
                }
            }
            _ => return Err(config_err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<CellKind> {
        CellKind::parse(&self.mesh)
            .ok_or_else(|| config_err(format!("mesh must be tri or rect, got `{}`", self.mesh)))
    }

    pub fn levelset(&self) -> Result<LevelSet> {
        let ls = LevelSet::parse(&self.interface).map_err(|e| config_err(e.to_string()))?;
        match ls {
            LevelSet::Circle { cx, cy, .. } if cx == 0.0 && cy == 0.0 => Ok(ls),
            _ => Err(config_err(format!(
                "interface `{}`: the manufactured solution needs a circle centred at the origin",
                self.interface
            ))),
        }
    }

    pub fn radius(&self) -> Result<f64> {
        match self.levelset()? {
            LevelSet::Circle { r, .. } => Ok(r),
            LevelSet::Line { .. } => unreachable!("levelset() only accepts circles"),
        }
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let choice = SolverChoice::parse(&self.solver).ok_or_else(|| {
            config_err(format!("solver must be auto, cg, bicgstab, gmres or dense, got `{}`", self.solver))
        })?;
        Ok(SolverSettings {
            choice,
            tol: self.solver_tol,
            ..SolverSettings::default()
        })
    }

    /// Method parameters of every configured scheme, with the `σ⁰` and `α`
    /// overrides applied.
    pub fn methods(&self) -> Result<Vec<MethodParams>> {
        self.scheme
            .iter()
            .map(|s| {
                let scheme = Scheme::parse(s).ok_or_else(|| {
                    config_err(format!("scheme must be classic, spp, ipp or npp, got `{s}`"))
                })?;
                let mut p = MethodParams::preset(scheme).with_alpha(self.penalty_alpha);
                if let (Some(s0), true) = (self.sigma0, p.has_edge_terms()) {
                    p = p.with_sigma0(s0);
                }
                Ok(p)
            })
            .collect()
    }

    pub fn domain_spec(&self, n: usize) -> Result<DomainSpec> {
        let [x0, x1, y0, y1] = self.domain;
        DomainSpec::new(x0, x1, y0, y1, n, self.kind()?).map_err(|e| config_err(e.to_string()))
    }

    pub fn exact(&self) -> Result<CircleSolution> {
        Ok(CircleSolution::new(self.radius()?, self.beta_minus, self.beta_plus))
    }

    /// Check every invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        self.kind()?;
        self.levelset()?;
        self.solver_settings()?;
        if self.n.is_empty() {
            return Err(config_err("N list is empty"));
        }
        for w in self.n.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(config_err(format!("N list must double at every step, got {:?}", self.n)));
            }
        }
        self.domain_spec(self.n[0])?;
        if self.scheme.is_empty() {
            return Err(config_err("scheme list is empty"));
        }
        self.methods()?;
        if !(self.beta_minus > 0.0 && self.beta_plus > 0.0) {
            return Err(config_err(format!(
                "coefficients must be positive, got ({}, {})",
                self.beta_minus, self.beta_plus
            )));
        }
        if let Some(s) = self.sigma0 {
            if !(s >= 0.0) {
                return Err(config_err(format!("sigma0 must be nonnegative, got {s}")));
            }
        }
        if !(self.penalty_alpha.is_finite() && self.penalty_alpha >= 0.0) {
            return Err(config_err(format!("penalty_alpha must be nonnegative, got {}", self.penalty_alpha)));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(config_err(format!("solver_tol must lie in (0, 1), got {}", self.solver_tol)));
        }
        if self.samples == 0 {
            return Err(config_err("samples must be positive"));
        }
        Ok(())
    }

    pub fn discretization(&self, n: usize) -> Result<Discretization> {
        let iface = InterfaceGeometry::new(self.levelset()?);
        Discretization::new(&self.domain_spec(n)?, iface, self.beta_minus, self.beta_plus)
    }

    fn tag(&self) -> String {
        format!("{}_b{}-{}", self.mesh, self.beta_minus, self.beta_plus)
    }
}

/// Exit status for a pipeline error: 2 for bad input or output paths, 3 for
/// numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io(_) | Error::Csv(_) => 2,
        Error::Geometry(GeometryError::InvalidDomain(_) | GeometryError::UnknownLevelSet(_)) => 2,
        _ => 3,
    }
}

pub const EXIT_VERIFY_FAILED: i32 = 4;

pub fn make_record(
    disc: &Discretization,
    params: &MethodParams,
    sol: &Solution,
    errs: &ErrorNorms,
) -> RunRecord {
    let mesh = disc.mesh();
    RunRecord {
        n: mesh.spec.n,
        h: mesh.h,
        mesh: mesh.cell_kind().short_name().to_string(),
        scheme: params.scheme.name().to_string(),
        beta_minus: disc.beta_minus,
        beta_plus: disc.beta_plus,
        sigma0: params.sigma0.value(0, disc.beta_minus, disc.beta_plus),
        alpha: params.alpha,
        dofs: mesh.interior_node_count(),
        interface_elements: disc.cm.interface_elements().count(),
        e_l2: errs.l2,
        e_h1: errs.h1,
        e_linf: errs.linf,
        e_linf_nodal: errs.linf_nodal,
        e_energy: errs.energy,
        rate_l2: None,
        rate_h1: None,
        rate_linf: None,
        rate_linf_nodal: None,
        rate_energy: None,
        solver: sol.solver.to_string(),
        iterations: sol.iterations,
        residual: sol.residual,
    }
}

/// `(x, y, |u − u_h|)` at every mesh node.
pub fn nodal_error_field<E: ExactSolution>(
    disc: &Discretization,
    uh: &[f64],
    exact: &E,
) -> Vec<(f64, f64, f64)> {
    let iface = &disc.cm.iface;
    disc.mesh()
        .nodes
        .iter()
        .zip(uh)
        .map(|(&p, &v)| (p.x, p.y, (exact.u(p, iface.side(p)) - v).abs()))
        .collect()
}

pub fn write_field<W: Write>(field: &[(f64, f64, f64)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "y", "abs_error"])?;
    for &(x, y, e) in field {
        wr.write_record([format!("{x:.17e}"), format!("{y:.17e}"), format!("{e:.17e}")])?;
    }
    wr.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub record: RunRecord,
    pub field: Option<Vec<(f64, f64, f64)>>,
    pub files: Vec<PathBuf>,
}

/// One solve at the first configured `N` with the first configured scheme.
/// Writes `solve_<scheme>_<mesh>_b<β⁻>-<β⁺>_N<n>.csv` and, with
/// `dump_field`, the nodal error field to the matching `field_*.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let n = cfg.n[0];
    let params = cfg.methods()?[0];
    let disc = cfg.discretization(n)?;
    let exact = cfg.exact()?;
    let (sol, errs) = solve_and_measure(&disc, &params, &exact, &cfg.solver_settings()?)?;
    let record = make_record(&disc, &params, &sol, &errs);
    let stem = format!("{}_{}_N{n}", params.scheme.name(), cfg.tag());
    let mut files = Vec::new();
    let path = cfg.out.join(format!("solve_{stem}.csv"));
    write_csv(std::slice::from_ref(&record), create(&path)?)?;
    files.push(path);
    let field = if cfg.dump_field {
        let f = nodal_error_field(&disc, &sol.uh, &exact);
        let path = cfg.out.join(format!("field_{stem}.csv"));
        write_field(&f, create(&path)?)?;
        files.push(path);
        Some(f)
    } else {
        None
    };
    Ok(SolveOutcome { record, field, files })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub n: usize,
    pub scheme: String,
    pub setup_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    /// Records grouped by scheme in configuration order, `N` ascending.
    pub records: Vec<RunRecord>,
    pub timings: Vec<Timing>,
    pub files: Vec<PathBuf>,
}

impl ConvergenceOutcome {
    pub fn scheme(&self, scheme: Scheme) -> Vec<&RunRecord> {
        self.records.iter().filter(|r| r.scheme == scheme.name()).collect()
    }
}

/// Error tables of all configured schemes over the `N` list.
///
/// Runs are sequential; the mesh and bases of each `N` are shared by all
/// schemes. Writes `convergence_<mesh>_b<β⁻>-<β⁺>.csv` (one row per run),
/// the matching `.md` with one table per norm, and wall times to a separate
/// `timings_*.csv` so that the other outputs are reproducible bit for bit.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceOutcome> {
    cfg.validate()?;
    if cfg.n.len() < 3 {
        return Err(config_err(format!(
            "a convergence study needs at least 3 values of N, got {:?}",
            cfg.n
        )));
    }
    let methods = cfg.methods()?;
    let exact = cfg.exact()?;
    let settings = cfg.solver_settings()?;
    let mut per_scheme: Vec<Vec<RunRecord>> = vec![Vec::new(); methods.len()];
    let mut timings = Vec::new();
    for &n in &cfg.n {
        let t0 = Instant::now();
        let disc = cfg.discretization(n)?;
        let setup = t0.elapsed().as_secs_f64();
        for (i, params) in methods.iter().enumerate() {
            let t1 = Instant::now();
            let (sol, errs) = solve_and_measure(&disc, params, &exact, &settings)?;
            per_scheme[i].push(make_record(&disc, params, &sol, &errs));
            timings.push(Timing {
                n,
                scheme: params.scheme.name().to_string(),
                setup_s: setup,
                solve_s: t1.elapsed().as_secs_f64(),
            });
        }
    }
    for recs in &mut per_scheme {
        fill_rates(recs);
    }
    let records: Vec<RunRecord> = per_scheme.into_iter().flatten().collect();

    let stem = format!("convergence_{}", cfg.tag());
    let mut files = Vec::new();
    let csv_path = cfg.out.join(format!("{stem}.csv"));
    write_csv(&records, create(&csv_path)?)?;
    files.push(csv_path);
    let md_path = cfg.out.join(format!("{stem}.md"));
    let mut md = create(&md_path)?;
    writeln!(
        md,
        "# Convergence, {} mesh, beta- = {}, beta+ = {}\n",
        cfg.mesh, cfg.beta_minus, cfg.beta_plus
    )?;
    for norm in Norm::ALL {
        writeln!(md, "## {}\n\n{}", norm.name(), markdown_table(&records, norm))?;
    }
    md.flush()?;
    files.push(md_path);
    let t_path = cfg.out.join(format!("timings_{}.csv", cfg.tag()));
    let mut wr = csv::Writer::from_writer(create(&t_path)?);
    for t in &timings {
        wr.serialize(t)?;
    }
    wr.flush()?;
    files.push(t_path);
    Ok(ConvergenceOutcome { records, timings, files })
}

/// Verification settings for a configuration: the configured coefficient
/// pair, mesh kind, schemes and `σ⁰` override.
pub fn verify_settings(cfg: &RunConfig) -> Result<VerifySettings> {
    cfg.validate()?;
    let beta = (cfg.beta_minus, cfg.beta_plus);
    Ok(VerifySettings {
        samples: cfg.samples,
        seed: cfg.seed,
        betas: vec![beta],
        coercivity: CoercivitySettings {
            betas: vec![beta],
            kind: cfg.kind()?,
            schemes: cfg.methods()?,
            ..CoercivitySettings::default()
        },
        interp_beta: beta,
        interp_kind: cfg.kind()?,
        ..VerifySettings::default()
    })
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub reports: Vec<ScanReport>,
    pub files: Vec<PathBuf>,
}

impl VerifyOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Run the four scans; writes `scan_<id>.csv` per scan and
/// `verify_summary.txt` with one PASS/FAIL line each.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    let settings = verify_settings(cfg)?;
    let reports = verify::run_all(&settings)?;
    let mut files = Vec::new();
    for r in &reports {
        let path = cfg.out.join(format!("scan_{}.csv", r.scan_id));
        r.write_csv(create(&path)?)?;
        files.push(path);
    }
    let path = cfg.out.join("verify_summary.txt");
    let mut w = create(&path)?;
    for r in &reports {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    files.push(path);
    Ok(VerifyOutcome { reports, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flat_toml_keys() {
        let cfg = RunConfig::from_toml_str(
            "mesh = \"tri\"\nN = [10, 20, 40]\nscheme = [\"npp\"]\nbeta_plus = 1e4\nsigma0 = 5.0\n",
        )
        .unwrap();
        assert_eq!(cfg.kind().unwrap(), CellKind::Triangular);
        assert_eq!(cfg.n, vec![10, 20, 40]);
        assert_eq!(cfg.methods().unwrap()[0].sigma0.value(0, 1.0, 1e4), 5.0);
        assert!(RunConfig::from_toml_str("bogus = 1\n").unwrap_err().is_config());
    }

    #[test]
    fn overrides_use_flag_names() {
        let mut cfg = RunConfig::default();
        cfg.set("--beta-plus", "10000").unwrap();
        cfg.set("N", "20,40,80").unwrap();
        cfg.set("scheme", "spp,npp").unwrap();
        cfg.set("dump-field", "").unwrap();
        assert_eq!(cfg.beta_plus, 1e4);
        assert_eq!(cfg.n, vec![20, 40, 80]);
        assert_eq!(cfg.scheme, vec!["spp", "npp"]);
        assert!(cfg.dump_field);
        assert!(cfg.set("nope", "1").unwrap_err().is_config());
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            exit_code(&c.validate().unwrap_err())
        };
        assert_eq!(bad(&|c| c.n = vec![20, 30, 80]), 2);
        assert_eq!(bad(&|c| c.scheme.clear()), 2);
        assert_eq!(bad(&|c| c.beta_minus = 0.0), 2);
        assert_eq!(bad(&|c| c.mesh = "hex".into()), 2);
        assert_eq!(bad(&|c| c.interface = "circle(0.1,0,0.5)".into()), 2);
        assert_eq!(bad(&|c| c.domain = [-1.0, 1.0, -1.0, 2.0]), 2);
    }

    #[test]
    fn sigma0_override_skips_classic() {
        let cfg = RunConfig {
            sigma0: Some(3.0),
            ..RunConfig::default()
        };
        let m = cfg.methods().unwrap();
        assert_eq!(m[0].sigma0.value(0, 1.0, 10.0), 0.0);
        assert!(m[1..].iter().all(|p| p.sigma0.value(0, 1.0, 10.0) == 3.0));
    }
}
