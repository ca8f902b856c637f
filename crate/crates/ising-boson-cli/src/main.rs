//! `ising-boson`: batch front end for the bosonization engine.
//!
//! Subcommands:
//!
//! * `compute SCENE` — evaluate the scene file's insertion list;
//! * `sweep SCENE --grid SPEC --output PATH` — move one insertion over a grid;
//! * `verify [--suite NAME]` — run the oracle suites;
//! * `covariance-check SCENE --map SPEC` — compare a direct evaluation against
//!   conformal transport from the image domain.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure.  Errors go to
//! standard error as `error: <Code>: <message>`.

mod output;
mod specs;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ising_boson::boson::Engine;
use ising_boson::geometry::{Scene, SceneFile};
use ising_boson::ising;
use ising_boson::{verify, Error};
use num_complex::Complex64;
use rayon::prelude::*;

use output::{fmt15, CsvOut};
use specs::FieldList;

/// Environment variable capping sweep parallelism.
const THREADS_ENV: &str = "ISING_BOSON_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ising-boson", version, about = "Critical Ising correlations on circular domains via bosonization")]
struct Cli {
    /// Override the harmonic-solver boundary tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    tol_boundary: Option<f64>,
    /// Override the instanton lattice-sum tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    tol_lattice: Option<f64>,
    /// Override the theta-constant tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    tol_theta: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the correlation described by a scene file.
    Compute {
        scene: PathBuf,
    },
    /// Move one insertion over a grid and write CSV.
    Sweep {
        scene: PathBuf,
        /// `segment:RE0,IM0:RE1,IM1:N` or `rect:RE0,IM0:RE1,IM1:NX,NY`.
        #[arg(long)]
        grid: String,
        /// Output path (`-` for standard output).
        #[arg(long, short)]
        output: PathBuf,
        /// Index of the moved insertion (default: the last one).
        #[arg(long)]
        point: Option<usize>,
    },
    /// Run the verification suites and print a pass/fail table.
    Verify {
        /// Run only suites whose name contains this string.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Compare direct evaluation with conformal transport through a map.
    CovarianceCheck {
        scene: PathBuf,
        /// `scale:R`, `affine:A_RE,A_IM,B_RE,B_IM`, `mobius:…` (8 numbers) or `cayley`.
        #[arg(long)]
        map: String,
        /// Relative tolerance for agreement.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

/// Failure of a command, mapped onto the exit-code contract.
enum Failure {
    Engine(Error),
    Io(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Engine(e) => {
                eprintln!("error: {}: {}", e.code(), e);
                ExitCode::from(if e.is_validation() { 1 } else { 2 })
            }
            Failure::Io(msg) => {
                eprintln!("error: Io: {msg}");
                ExitCode::from(1)
            }
            Failure::Check(msg) => {
                eprintln!("error: CheckFailed: {msg}");
                ExitCode::from(2)
            }
        }
    }
}

fn load_scene(cli: &Cli, path: &Path) -> Result<(Scene, FieldList), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let file = SceneFile::parse(&text)?;
    let mut scene = file.scene;
    if let Some(t) = cli.tol_boundary {
        scene.tolerances.boundary = t;
    }
    if let Some(t) = cli.tol_lattice {
        scene.tolerances.lattice = t;
    }
    if let Some(t) = cli.tol_theta {
        scene.tolerances.theta = t;
    }
    let fields = specs::field_list(&file.insertions)?;
    Ok((scene, fields))
}

/// Value, error estimate and optional diagnostic of one request.
fn evaluate(engine: &Engine, fields: &FieldList) -> ising_boson::Result<(Complex64, f64, Option<String>)> {
    match fields {
        FieldList::Ising(f) => {
            let r = ising::ising_correlation_squared(engine, f)?;
            Ok((r.value, r.error_estimate, r.diagnostic))
        }
        FieldList::Bosonic(f) => {
            let r = engine.correlate(f)?;
            Ok((r.value, r.error_estimate, None))
        }
    }
}

fn compute(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let (scene, fields) = load_scene(cli, path)?;
    let engine = Engine::new(&scene)?;
    let (value, err, diag) = evaluate(&engine, &fields)?;
    if let Some(d) = diag {
        eprintln!("note: {d}");
    }
    let mut out = CsvOut::stdout();
    out.row(&["value_re", "value_im", "err_est"])?;
    out.row(&[fmt15(value.re), fmt15(value.im), fmt15(err)])?;
    out.finish()?;
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Failure::Engine(Error::Unsupported(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Failure::Io(e.to_string()))
}

fn sweep(cli: &Cli, path: &Path, grid: &str, output: &Path, point: Option<usize>) -> Result<(), Failure> {
    let (scene, fields) = load_scene(cli, path)?;
    if fields.len() == 0 {
        return Err(Error::SceneFormat("sweep needs at least one insertion".into()).into());
    }
    let index = point.unwrap_or(fields.len() - 1);
    if index >= fields.len() {
        return Err(Error::SceneFormat(format!("point index {index} out of range (scene has {} insertions)", fields.len())).into());
    }
    let points = specs::grid_points(grid)?;
    let engine = Engine::new(&scene)?;
    // Warm the shared normalization before fanning out.
    engine.ensemble().partition_function()?;
    let pool = thread_pool()?;
    let results: Vec<ising_boson::Result<(Complex64, f64, Option<String>)>> =
        pool.install(|| points.par_iter().map(|&z| evaluate(&engine, &fields.moved(index, z))).collect());
    let mut out = if output.as_os_str() == "-" { CsvOut::stdout() } else { CsvOut::file(output)? };
    out.row(&["re", "im", "value_re", "value_im", "err_est"])?;
    for (z, r) in points.iter().zip(results) {
        match r {
            Ok((v, e, _)) => out.row(&[fmt15(z.re), fmt15(z.im), fmt15(v.re), fmt15(v.im), fmt15(e)])?,
            // Grid points outside the domain or on top of other insertions.
            Err(e) if e.is_validation() => out.row(&[fmt15(z.re), fmt15(z.im), "nan".into(), "nan".into(), "nan".into()])?,
            Err(e) => return Err(e.into()),
        }
    }
    out.finish()?;
    Ok(())
}

fn run_verify(filter: Option<&str>) -> Result<(), Failure> {
    let rows = verify::run_suites(filter);
    if rows.is_empty() {
        return Err(Error::Unsupported(format!("no suite matches '{}'; available: {}", filter.unwrap_or(""), verify::SUITES.join(", "))).into());
    }
    let mut out = CsvOut::stdout();
    out.row(&["name", "residual", "tolerance", "status"])?;
    let mut failed = 0;
    for r in &rows {
        let status = if r.passed() { "pass" } else { "fail" };
        failed += usize::from(!r.passed());
        out.row(&[format!("{}/{}", r.suite, r.name), fmt15(r.residual), fmt15(r.tolerance), status.to_string()])?;
    }
    out.finish()?;
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} of {} verification rows failed", rows.len())));
    }
    Ok(())
}

fn covariance_check(cli: &Cli, path: &Path, map: &str, tolerance: f64) -> Result<(), Failure> {
    let (scene, fields) = load_scene(cli, path)?;
    let FieldList::Ising(fields) = fields else {
        return Err(Error::Unsupported("covariance-check transports Ising fields only".into()).into());
    };
    let map = specs::conformal_map(map)?;
    let direct = ising::ising_correlation_squared(&Engine::new(&scene)?, &fields)?.value;
    let transported = ising::transported_correlation_squared(&scene, &map, &fields)?.value;
    let rel = relative_difference(direct, transported);
    let mut out = CsvOut::stdout();
    out.row(&["direct_re", "direct_im", "transported_re", "transported_im", "rel_diff"])?;
    out.row(&[fmt15(direct.re), fmt15(direct.im), fmt15(transported.re), fmt15(transported.im), fmt15(rel)])?;
    out.finish()?;
    if !(rel <= tolerance) {
        return Err(Failure::Check(format!("relative difference {rel:e} exceeds {tolerance:e}")));
    }
    Ok(())
}

fn relative_difference(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Compute { scene } => compute(cli, scene),
        Command::Sweep { scene, grid, output, point } => sweep(cli, scene, grid, output, *point),
        Command::Verify { suite } => run_verify(suite.as_deref()),
        Command::CovarianceCheck { scene, map, tolerance } => covariance_check(cli, scene, map, *tolerance),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    };
    let _ = io::stdout().flush();
    code
}
