//! Command-line front end: `mesh`, `extremal`, `transfinite`, `equilibrium`,
//! `fekete` and the `--probe` invariant suite. Results go to `--out` as CSV
//! fields and JSON reports.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{
    afp_extract, density_adjugate, density_qr, derivative_bundles, equilibrium_density,
    fd_hessian_density, write_density_csv, write_fekete_csv,
};
use crate::error::{Error, Result};
use crate::extremal::{
    accelerate_field, error_metrics, error_report, extremal_sequence, extremal_values,
    reference_extremal, write_values_csv, ErrorMetrics, ErrorReport, EvalGrid, Method, Quantity,
};
use crate::geometry::CompactSet;
use crate::linalg::CMatrix;
use crate::mesh::MeshRecipe;
use crate::ortho::OrthoState;
use crate::probe::run_probe;
use crate::rho::Selector;
use crate::transfinite::td_sequence;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "PLURIPOT_THREADS";

/// Degree schedule `start:step:end` (or a single degree).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule(pub Vec<usize>);

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("schedule {s:?} is not start:step:end"));
        let nums: Vec<usize> = s
            .split(':')
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, step, end) = match nums.as_slice() {
            [k] => (*k, 1, *k),
            [a, b, c] => (*a, *b, *c),
            _ => return Err(bad()),
        };
        if start == 0 || step == 0 || end < start {
            return Err(Error::Invalid(format!(
                "schedule {s:?} must be increasing from degree ≥ 1"
            )));
        }
        Ok(Schedule((start..=end).step_by(step).collect()))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pluripot",
    version,
    about = "Extremal functions, transfinite diameters and equilibrium densities from polynomial meshes"
)]
pub struct RunConfig {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Omit wall-clock times so that outputs are byte-identical across runs.
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Seed for randomized probes and oracle points.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Run the invariant suite and write probe.json.
    #[arg(long)]
    pub probe: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a degree-k mesh (mesh.csv, mesh.json).
    Mesh(MeshArgs),
    /// Extremal-function approximants over a degree schedule (values.csv, extremal.json).
    Extremal(ExtremalArgs),
    /// Transfinite-diameter estimates (transfinite.json).
    Transfinite(TransfiniteArgs),
    /// Equilibrium density on a real grid (density.csv, equilibrium.json).
    Equilibrium(EquilibriumArgs),
    /// Approximate Fekete points (fekete.csv, fekete.json).
    Fekete(FeketeArgs),
}

#[derive(Args, Debug)]
pub struct SetArgs {
    /// square | square-cl | disk[:td-polar | :lobatto:<s>] | simplex | polygon:<m>
    #[arg(long)]
    pub set: MeshRecipe,
    /// Oversampling factor for the square mesh.
    #[arg(long)]
    pub oversampling: Option<f64>,
}

impl SetArgs {
    fn recipe(&self) -> Result<MeshRecipe> {
        match (&self.set, self.oversampling) {
            (_, None) => Ok(self.set.clone()),
            (MeshRecipe::Square { .. }, Some(m)) => Ok(MeshRecipe::Square { oversampling: m }),
            (r, Some(_)) => Err(Error::Invalid(format!(
                "--oversampling applies to the square mesh, not {r}"
            ))),
        }
    }
}

#[derive(Args, Debug)]
pub struct MeshArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long)]
    pub degree: usize,
}

#[derive(Args, Debug)]
pub struct ExtremalArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, default_value = "szef")]
    pub method: Method,
    #[arg(long, default_value = "v")]
    pub quantity: Quantity,
    /// start:step:end
    #[arg(long)]
    pub degrees: Schedule,
    /// Per-axis [name:]min:max:count, comma separated.
    #[arg(long, default_value = "x:-2:2:100,y:-2:2:100")]
    pub grid: String,
    /// Imaginary part added to every grid point, per axis.
    #[arg(long)]
    pub imag_shift: Option<String>,
    /// Compare against the closed-form extremal function.
    #[arg(long)]
    pub errors: bool,
    /// Vector-rho acceleration: diagonal (default) or column:<j>.
    #[arg(long, num_args = 0..=1, default_missing_value = "diagonal")]
    pub accelerate: Option<Selector>,
}

#[derive(Args, Debug)]
pub struct TransfiniteArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long)]
    pub degrees: Schedule,
    /// Scalar-rho acceleration: diagonal (default) or column:<j>.
    #[arg(long, num_args = 0..=1, default_missing_value = "diagonal")]
    pub accelerate: Option<Selector>,
}

#[derive(Args, Debug)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long)]
    pub degree: usize,
    /// Real grid, per-axis [name:]min:max:count; defaults to the bounding box enlarged by 20%.
    #[arg(long)]
    pub grid: Option<String>,
    /// Rejected unless zero: densities are reported on real grids only.
    #[arg(long)]
    pub imag_shift: Option<String>,
    #[arg(long, default_value = "szef")]
    pub method: Method,
    /// Add the unit-mass normalization over the E-restricted grid.
    #[arg(long)]
    pub normalize: bool,
    /// Random interior points for the finite-difference oracle comparison.
    #[arg(long, default_value_t = 10)]
    pub oracle_points: usize,
}

#[derive(Args, Debug)]
pub struct FeketeArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long)]
    pub degree: usize,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), format!("{text}\n"))?;
    Ok(text)
}

fn timing(cfg: &RunConfig, start: Instant) -> Option<f64> {
    (!cfg.no_timing).then(|| start.elapsed().as_secs_f64())
}

#[derive(Serialize)]
struct MeshSidecar {
    set: String,
    k: usize,
    cardinality: usize,
    constant: Option<f64>,
}

pub fn cmd_mesh(cfg: &RunConfig, args: &MeshArgs) -> Result<String> {
    let recipe = args.set.recipe()?;
    let mesh = recipe.build(args.degree)?;
    mesh.write_csv(create(&cfg.out, "mesh.csv")?)?;
    write_json(
        &cfg.out,
        "mesh.json",
        &MeshSidecar {
            set: recipe.to_string(),
            k: args.degree,
            cardinality: mesh.len(),
            constant: mesh.constant,
        },
    )
}

#[derive(Serialize)]
struct AcceleratedReport {
    selector: String,
    degrees: Vec<usize>,
    metrics: Option<Vec<ErrorMetrics>>,
}

#[derive(Serialize)]
struct ExtremalReport {
    set: String,
    method: Method,
    quantity: Quantity,
    degrees: Vec<usize>,
    grid_points: usize,
    outside_points: usize,
    errors: Option<ErrorReport>,
    accelerated: Option<AcceleratedReport>,
    wall_time_s: Option<f64>,
}

fn selector_tag(sel: Selector) -> String {
    sel.to_string().replace(':', "")
}

pub fn cmd_extremal(cfg: &RunConfig, args: &ExtremalArgs) -> Result<String> {
    let start = Instant::now();
    let recipe = args.set.recipe()?;
    let set = recipe.set();
    let grid = EvalGrid::parse(&args.grid, args.imag_shift.as_deref(), &set)?;
    let reference = if args.errors {
        Some(reference_extremal(&set, &grid.points)?)
    } else {
        None
    };
    let result = extremal_sequence(&recipe, &grid, &args.degrees.0, args.method, args.quantity)?;
    let accelerated = args
        .accelerate
        .map(|sel| accelerate_field(&result, sel))
        .transpose()?;
    let errors = reference
        .as_ref()
        .map(|r| error_report(&result, r, &grid.inside))
        .transpose()?;

    let mut columns: Vec<(String, &[f64])> = result
        .degrees
        .iter()
        .zip(&result.values)
        .map(|(k, v)| (format!("value_k{k}"), v.as_slice()))
        .collect();
    if let (Some(acc), Some(sel)) = (&accelerated, args.accelerate) {
        let tag = selector_tag(sel);
        columns.extend(
            acc.degrees
                .iter()
                .zip(&acc.values)
                .map(|(k, v)| (format!("rho_{tag}_k{k}"), v.as_slice())),
        );
    }
    write_values_csv(
        create(&cfg.out, "values.csv")?,
        &grid,
        &columns,
        reference.as_deref(),
    )?;

    let accelerated = accelerated
        .map(|acc| -> Result<AcceleratedReport> {
            let metrics = reference
                .as_ref()
                .map(|r| {
                    acc.values
                        .iter()
                        .map(|v| error_metrics(v, r, &grid.inside))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?;
            Ok(AcceleratedReport {
                selector: acc.selector,
                degrees: acc.degrees,
                metrics,
            })
        })
        .transpose()?;
    let report = ExtremalReport {
        set: recipe.to_string(),
        method: args.method,
        quantity: args.quantity,
        degrees: result.degrees.clone(),
        grid_points: grid.len(),
        outside_points: grid.inside.iter().filter(|&&i| !i).count(),
        errors,
        accelerated,
        wall_time_s: timing(cfg, start),
    };
    write_json(&cfg.out, "extremal.json", &report)
}

pub fn cmd_transfinite(cfg: &RunConfig, args: &TransfiniteArgs) -> Result<String> {
    let set = args.set.recipe()?.set();
    let mut est = td_sequence(&set, &args.degrees.0, args.accelerate)?;
    if cfg.no_timing {
        est.wall_time_s = None;
    }
    write_json(&cfg.out, "transfinite.json", &est)
}

#[derive(Serialize)]
struct OracleSample {
    x: Vec<f64>,
    eta: f64,
    fd: f64,
    rel: f64,
    fd_warning: bool,
}

#[derive(Serialize)]
struct EquilibriumReport {
    set: String,
    k: usize,
    method: Method,
    grid_points: usize,
    inside_points: usize,
    qr_fallbacks: usize,
    min_raw: f64,
    dual_path_max_rel: f64,
    oracle_max_rel: f64,
    oracle: Vec<OracleSample>,
    /// Largest relative spread of `η_k` among grid points of equal radius (centred sets).
    radial_spread: Option<f64>,
    wall_time_s: Option<f64>,
}

fn default_grid(set: &CompactSet) -> String {
    let (lo, hi) = set.bounding_box();
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| {
            let pad = 0.2 * (b - a);
            format!("{}:{}:121", a - pad, b + pad)
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Largest `(max − min)/max` of `values` over groups of points with equal
/// distance to the origin.
pub fn radial_spread(points: &DMatrix<f64>, values: &[f64]) -> f64 {
    let mut idx: Vec<(f64, usize)> = (0..points.nrows())
        .map(|i| (points.row(i).norm_squared(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut worst = 0.0_f64;
    let mut s = 0;
    while s < idx.len() {
        let mut e = s + 1;
        while e < idx.len() && idx[e].0 - idx[s].0 <= 1e-12 * idx[s].0.max(1.0) {
            e += 1;
        }
        let group = &idx[s..e];
        let (lo, hi) = group
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, i)| {
                (lo.min(values[i]), hi.max(values[i]))
            });
        if hi > 0.0 {
            worst = worst.max((hi - lo) / hi);
        }
        s = e;
    }
    worst
}

pub fn cmd_equilibrium(cfg: &RunConfig, args: &EquilibriumArgs) -> Result<String> {
    let start = Instant::now();
    let recipe = args.set.recipe()?;
    let set = recipe.set();
    let spec = args.grid.clone().unwrap_or_else(|| default_grid(&set));
    let grid = EvalGrid::parse(&spec, args.imag_shift.as_deref(), &set)?;
    if !grid.points.is_real() {
        return Err(Error::Grid(
            "densities are reported on real grids only; drop --imag-shift".into(),
        ));
    }
    let k = args.degree;
    let mut state = OrthoState::from_mesh(&recipe.build(k)?, k)?;
    if args.method == Method::SzefBw {
        state = state.with_weighted_stage()?;
    }
    let field = equilibrium_density(&state, &grid, args.normalize)?;
    write_density_csv(create(&cfg.out, "density.csv")?, &grid, &field)?;

    let inside: Vec<usize> = (0..grid.len()).filter(|&i| grid.inside[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = set.bounding_box();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut tries = 0;
    while pts.len() < args.oracle_points && tries < 1000 * args.oracle_points.max(1) {
        tries += 1;
        let p: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| rng.random_range(*a..*b))
            .collect();
        if set.contains_real(&p, -1e-3) {
            pts.push(p);
        }
    }
    let n = set.dim();
    let pm = CMatrix::real(DMatrix::from_fn(pts.len(), n, |i, c| pts[i][c]));
    let weighted = state.weighted.is_some();
    let bundles = derivative_bundles(&state, &pm, weighted)?;
    let v = |p: &CMatrix| extremal_values(&state, p, args.method, Quantity::V);
    let mut oracle = Vec::new();
    let mut dual = 0.0_f64;
    for (p, b) in pts.iter().zip(&bundles) {
        let eta = density_qr(b, k)?.value;
        let adj = density_adjugate(b, k)?;
        let scale = eta.abs().max(adj.abs());
        if scale > 0.0 {
            dual = dual.max((eta - adj).abs() / scale);
        }
        let z: Vec<Complex<f64>> = p.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let fd = fd_hessian_density(&v, &z, 1e-4)?;
        oracle.push(OracleSample {
            x: p.clone(),
            eta,
            fd: fd.value,
            rel: (eta - fd.value).abs() / eta.abs().max(f64::MIN_POSITIVE),
            fd_warning: fd.warning,
        });
    }
    let centred = matches!(
        set,
        CompactSet::Disk {
            center: [0.0, 0.0],
            ..
        }
    );
    let report = EquilibriumReport {
        set: recipe.to_string(),
        k,
        method: args.method,
        grid_points: grid.len(),
        inside_points: inside.len(),
        qr_fallbacks: field.fallbacks,
        min_raw: field.raw.iter().copied().fold(f64::INFINITY, f64::min),
        dual_path_max_rel: dual,
        oracle_max_rel: oracle.iter().map(|o| o.rel).fold(0.0, f64::max),
        oracle,
        radial_spread: centred.then(|| radial_spread(&grid.points.re, &field.raw)),
        wall_time_s: timing(cfg, start),
    };
    write_json(&cfg.out, "equilibrium.json", &report)
}

#[derive(Serialize)]
struct FeketeReport {
    set: String,
    k: usize,
    mesh_size: usize,
    indices: Vec<usize>,
    log_abs_det: f64,
    wall_time_s: Option<f64>,
}

pub fn cmd_fekete(cfg: &RunConfig, args: &FeketeArgs) -> Result<String> {
    let start = Instant::now();
    let recipe = args.set.recipe()?;
    let mesh = recipe.build(args.degree)?;
    let sel = afp_extract(&mesh, args.degree)?;
    write_fekete_csv(create(&cfg.out, "fekete.csv")?, &mesh, &sel)?;
    write_json(
        &cfg.out,
        "fekete.json",
        &FeketeReport {
            set: recipe.to_string(),
            k: args.degree,
            mesh_size: mesh.len(),
            indices: sel.indices,
            log_abs_det: sel.log_abs_det,
            wall_time_s: timing(cfg, start),
        },
    )
}

/// Exit status: 0 success, 2 usage error, 3 numerical failure.
fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn dispatch(cfg: &RunConfig) -> Result<String> {
    if cfg.probe {
        let report = run_probe(cfg.seed)?;
        let text = write_json(&cfg.out, "probe.json", &report)?;
        if !report.pass {
            return Err(Error::ProbeFailed {
                failed: report.failed,
                total: report.checks.len(),
            });
        }
        return Ok(text);
    }
    match &cfg.command {
        Some(Command::Mesh(a)) => cmd_mesh(cfg, a),
        Some(Command::Extremal(a)) => cmd_extremal(cfg, a),
        Some(Command::Transfinite(a)) => cmd_transfinite(cfg, a),
        Some(Command::Equilibrium(a)) => cmd_equilibrium(cfg, a),
        Some(Command::Fekete(a)) => cmd_fekete(cfg, a),
        None => Err(Error::Invalid("a subcommand or --probe is required".into())),
    }
}

/// Parses `args` (including the program name), runs, prints the JSON report
/// on stdout or a one-line reason on stderr, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .to_string();
            eprintln!("pluripot: usage: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match dispatch(&cfg) {
        Ok(text) => {
            use std::io::Write;
            // a closed pipe downstream is not an error of the run
            let _ = writeln!(std::io::stdout(), "{text}");
            0
        }
        Err(e) => {
            let kind = if e.is_numerical() {
                "numerical"
            } else {
                "usage"
            };
            eprintln!("pluripot: {kind}: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the global thread pool from the environment; call once at startup.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}
