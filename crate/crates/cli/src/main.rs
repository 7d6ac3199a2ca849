use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ppife::harness::{self, RunConfig, EXIT_VERIFY_FAILED};
use ppife::postprocess::{markdown_table, sci, Norm};

/// Classic and partially penalized IFE solvers for the circular-interface
/// test problem.
#[derive(Debug, Parser)]
#[command(name = "ppife", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve once at the first N with the first scheme.
    Solve(Common),
    /// Error and rate tables for every scheme over the N list.
    Convergence(Common),
    /// Coefficient, trace, coercivity and edge-interpolation scans.
    Verify(Common),
}

/// Every flag overrides the config key of the same name.
#[derive(Debug, Args)]
struct Common {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cells per side; a comma separated doubling list for `convergence`.
    #[arg(long = "N", value_name = "N")]
    n: Option<String>,
    /// tri or rect.
    #[arg(long)]
    mesh: Option<String>,
    /// classic, spp, ipp or npp; comma separated for several.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    beta_minus: Option<String>,
    #[arg(long)]
    beta_plus: Option<String>,
    /// Penalty σ⁰ for every penalized scheme, replacing the presets.
    #[arg(long)]
    sigma0: Option<String>,
    /// Exponent α of the penalty weight σ⁰/|B|^α.
    #[arg(long)]
    penalty_alpha: Option<String>,
    /// auto, cg, bicgstab, gmres or dense.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    solver_tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Random cuts per scan in `verify`.
    #[arg(long)]
    samples: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Write the nodal error field of `solve` to field_*.csv.
    #[arg(long)]
    dump_field: bool,
}

impl Common {
    fn config(&self) -> ppife::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let pairs = [
            ("N", &self.n),
            ("mesh", &self.mesh),
            ("scheme", &self.scheme),
            ("beta_minus", &self.beta_minus),
            ("beta_plus", &self.beta_plus),
            ("sigma0", &self.sigma0),
            ("penalty_alpha", &self.penalty_alpha),
            ("solver", &self.solver),
            ("solver_tol", &self.solver_tol),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.dump_field {
            cfg.dump_field = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> ppife::Result<i32> {
    match &cli.command {
        Command::Solve(c) => {
            let cfg = c.config()?;
            let out = harness::cmd_solve(&cfg)?;
            let r = &out.record;
            println!(
                "{} {} N={} beta=({}, {}): L2 {}  H1 {}  Linf {}  nodal max {}  energy {}  ({} {} its, residual {:.2e})",
                r.scheme,
                r.mesh,
                r.n,
                r.beta_minus,
                r.beta_plus,
                sci(r.e_l2),
                sci(r.e_h1),
                sci(r.e_linf),
                sci(r.e_linf_nodal),
                sci(r.e_energy),
                r.solver,
                r.iterations,
                r.residual
            );
            if let Some(f) = &out.field {
                let max = f.iter().map(|p| p.2).fold(0.0, f64::max);
                println!("field max |u - u_h| = {}", sci(max));
            }
            for p in &out.files {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Convergence(c) => {
            let cfg = c.config()?;
            let out = harness::cmd_convergence(&cfg)?;
            for norm in [Norm::H1, Norm::L2, Norm::LinfNodal, Norm::Energy] {
                println!("{}\n{}", norm.name(), markdown_table(&out.records, norm));
            }
            for p in &out.files {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Verify(c) => {
            let cfg = c.config()?;
            let out = harness::cmd_verify(&cfg)?;
            for r in &out.reports {
                println!("{r}");
            }
            for p in &out.files {
                println!("wrote {}", p.display());
            }
            Ok(if out.pass() { 0 } else { EXIT_VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
