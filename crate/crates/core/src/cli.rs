//! `passage-lab` command line: density tables, figure datasets, self-checks
//! and diffusion reductions.
//!
//! Exit codes: 0 ok, 1 a verification check failed, 2 usage or domain error,
//! 3 numerical non-convergence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::Error;
use crate::linear_passage::{first_passage_density, last_passage_density, PassageProblem};
use crate::numerics::QuadSpec;
use crate::successive::{jensen_bound, nth_passage_law, t2_defect, t2_density, tau2_density};
use crate::transforms::{pushforward_law, reduce_conjugated, reduce_gbm, reduce_ou, Conjugation, ReducedProblem};
use crate::verify::{analytic_suite, mc_suite, Check};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PASSAGE_LAB_THREADS";

/// Significant digits written to CSV files.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "passage-lab", version, about = "Successive passage times of Brownian motion through a line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a density on a grid as CSV.
    Density(DensityArgs),
    /// Emit the dataset behind figure 1, 2, 3 or 4.
    Figure(FigureArgs),
    /// Run the self-check suites and print a PASS/FAIL table.
    Verify(VerifyArgs),
    /// Reduce a diffusion passage problem to a Brownian one.
    Reduce(ReduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityKind {
    /// first passage time
    Tau1,
    /// last zero before --t for a path started on the line
    Psi,
    /// second inter-passage time
    T2,
    /// second passage time
    Tau2,
    /// n-th passage time (grid recursion)
    Taun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    pub kind: DensityKind,
    /// Start point.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
    /// Boundary intercept.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    /// Boundary slope.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,
    /// Horizon of the last-zero law (psi only).
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Passage index (taun only).
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Write the CSV here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
    pub n: u8,
    /// Grid size for figures 2-4.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Analytic,
    Mc,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Paths for the Brownian checks; Euler checks use a fifth.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Process {
    Cir,
    WrightFisher,
    Gbm,
    Ou,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long, value_enum)]
    pub process: Process,
    /// Starting state.
    #[arg(long, allow_negative_numbers = true)]
    pub z: f64,
    /// Constant barrier (cir, wright-fisher).
    #[arg(long, allow_negative_numbers = true)]
    pub barrier: Option<f64>,
    /// Growth rate (gbm).
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Volatility (gbm, ou).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Barrier parameter S0 (gbm, ou).
    #[arg(long, allow_negative_numbers = true)]
    pub s0: Option<f64>,
    /// Barrier growth rate mu' (gbm).
    #[arg(long, allow_negative_numbers = true)]
    pub muprime: Option<f64>,
    /// Mean-reversion rate (ou).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Also tabulate the density of the n-th passage time of the process.
    #[arg(long)]
    pub emit_density: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 5.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
    Numerical(Error),
    Io(io::Error),
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::VerifyFailed(_) => 1,
            Self::Usage(_) | Self::Domain(_) | Self::Io(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Domain(e) => write!(f, "invalid input: {e}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::VerifyFailed(names) => write!(f, "verification failed: {}", names.join(", ")),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::Domain(e),
            _ => Self::Numerical(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Header lines written as `# key: value` before every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Vec<(String, String)>,
    pub version: String,
    pub seed: u64,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            parameters: Vec::new(),
            version: concat!("passage-lab ", env!("CARGO_PKG_VERSION")).into(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.push((key.into(), value.to_string()));
        self
    }

    fn write(&self, w: &mut dyn Write) -> io::Result<()> {
        let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# command: {}", self.command)?;
        writeln!(w, "# parameters: {}", params.join(" "))?;
        writeln!(w, "# version: {}", self.version)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# timestamp: {}", self.timestamp)
    }
}

/// Named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, manifest: &RunManifest, w: &mut dyn Write) -> CliResult<()> {
        if let Some(bad) = self.rows.iter().flatten().find(|v| !v.is_finite()) {
            return Err(CliError::Numerical(Error::NotConverged {
                value: *bad,
                error_estimate: f64::INFINITY,
                subdivisions: 0,
            }));
        }
        manifest.write(w)?;
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `x` with [`SIGNIFICANT_DIGITS`] significant digits, like C's `%.12g`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `points` abscissae on `[lo, hi]`; a linear grid starting at 0 skips 0.
pub fn grid(spacing: Spacing, lo: f64, hi: f64, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(CliError::Usage(format!("grid needs 0 <= tmin < tmax < inf, got [{lo}, {hi}]")));
    }
    let n = points as f64;
    Ok(match spacing {
        Spacing::Linear if lo == 0.0 => (1..=points).map(|i| hi * i as f64 / n).collect(),
        Spacing::Linear => (0..points).map(|i| lo + (hi - lo) * i as f64 / (n - 1.0)).collect(),
        Spacing::Log => {
            if lo == 0.0 {
                return Err(CliError::Usage("log grid needs tmin > 0".into()));
            }
            let r = (hi / lo).ln();
            (0..points).map(|i| lo * (r * i as f64 / (n - 1.0)).exp()).collect()
        }
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = configure_threads().and_then(|workers| match &cli.command {
        Command::Density(a) => cmd_density(a, out),
        Command::Figure(a) => cmd_figure(a, out),
        Command::Verify(a) => cmd_verify(a, workers, out),
        Command::Reduce(a) => cmd_reduce(a, out),
    });
    match result.and_then(|()| out.flush().map_err(CliError::from)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "passage-lab: {e}");
            e.exit_code()
        }
    }
}

/// Honours [`THREADS_ENV`]; returns the cap (0 when unset).
fn configure_threads() -> CliResult<usize> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(0);
    };
    let cap = match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => n,
        _ => return Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))),
    };
    // fails harmlessly if the global pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cap).build_global();
    Ok(cap)
}

fn emit(table: &Table, manifest: &RunManifest, output: Option<&PathBuf>, out: &mut dyn Write) -> CliResult<()> {
    match output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(manifest, &mut w)?;
            w.flush()?;
            Ok(())
        }
        None => table.write_csv(manifest, out),
    }
}

fn tabulate(ts: &[f64], f: impl Fn(f64) -> crate::Result<f64> + Sync) -> crate::Result<Vec<f64>> {
    ts.par_iter().map(|&t| f(t)).collect()
}

pub fn density_table(args: &DensityArgs) -> CliResult<Table> {
    let spec = QuadSpec::default();
    let p = PassageProblem::new(args.x, args.a, args.b)?;
    let (spacing, lo, hi, points) = match args.kind {
        DensityKind::Tau1 => (Spacing::Linear, 0.0, 10.0, 200),
        DensityKind::Psi => (Spacing::Linear, 0.0, args.t, 99),
        _ => (Spacing::Log, 1e-4, 1e9, 2000),
    };
    let points = args.points.unwrap_or(points);
    let ts = if args.kind == DensityKind::Psi {
        if args.tmin.is_some() || args.tmax.is_some() || args.spacing.is_some() {
            return Err(CliError::Usage("psi is tabulated on the interior of (0, --t); drop the grid flags".into()));
        }
        if !(args.t.is_finite() && args.t > 0.0) {
            return Err(CliError::Usage(format!("--t must be positive, got {}", args.t)));
        }
        (1..=points).map(|i| args.t * i as f64 / (points + 1) as f64).collect()
    } else {
        grid(args.spacing.unwrap_or(spacing), args.tmin.unwrap_or(lo), args.tmax.unwrap_or(hi), points)?
    };
    let values = match args.kind {
        DensityKind::Tau1 => tabulate(&ts, |t| first_passage_density(&p, t))?,
        DensityKind::Psi => tabulate(&ts, |u| last_passage_density(args.b, args.t, u))?,
        DensityKind::T2 => tabulate(&ts, |t| t2_density(&p, t, &spec))?,
        DensityKind::Tau2 => tabulate(&ts, |t| tau2_density(&p, t, &spec))?,
        DensityKind::Taun => nth_passage_law(&p, args.n, &ts, &spec)?.density.values().to_vec(),
    };
    let mut table = Table::new(&["t", "density"]);
    table.rows = ts.into_iter().zip(values).map(|(t, f)| vec![t, f]).collect();
    Ok(table)
}

fn cmd_density(args: &DensityArgs, out: &mut dyn Write) -> CliResult<()> {
    let table = density_table(args)?;
    let kind = args.kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let mut m = RunManifest::new("density", 0).param("kind", kind);
    m = match args.kind {
        DensityKind::Psi => m.param("b", args.b).param("t", args.t),
        _ => m.param("x", args.x).param("a", args.a).param("b", args.b),
    };
    if args.kind == DensityKind::Taun {
        m = m.param("n", args.n);
    }
    m = m.param("points", table.rows.len());
    emit(&table, &m, args.output.as_ref(), out)
}

/// Slopes `−3, −2.9, …, 0` of figure 1.
fn figure1_slopes() -> Vec<f64> {
    (0..=30).map(|k| if k == 30 { 0.0 } else { -3.0 + 0.1 * k as f64 }).collect()
}

/// Dataset of figure `n`; `points` sets the time grid `(0, 5]` of figures
/// 2–4.
pub fn figure_table(n: u8, points: usize) -> CliResult<Table> {
    let spec = QuadSpec::default();
    let problem = |b: f64| PassageProblem { x: 0.0, a: 1.0, b };
    let ts = grid(Spacing::Linear, 0.0, 5.0, points)?;
    let curves = |slopes: &[f64],
                  f: &(dyn Fn(&PassageProblem, f64) -> crate::Result<f64> + Sync)|
     -> CliResult<Vec<Vec<f64>>> {
        let cols: Vec<Vec<f64>> =
            slopes.iter().map(|&b| tabulate(&ts, |t| f(&problem(b), t))).collect::<crate::Result<_>>()?;
        Ok(ts.iter().enumerate().map(|(i, &t)| std::iter::once(t).chain(cols.iter().map(|c| c[i])).collect()).collect())
    };
    let table = match n {
        1 => {
            let mut table = Table::new(&["b", "defect", "gamma"]);
            for b in figure1_slopes() {
                let p = problem(b);
                table.rows.push(vec![b, t2_defect(&p, &spec)?, jensen_bound(&p)?]);
            }
            table
        }
        2 => {
            let mut table = Table::new(&["t", "f_T2(b=0)", "f_T2(b=-0.5)", "f_T2(b=-1)"]);
            table.rows = curves(&[0.0, -0.5, -1.0], &|p, t| t2_density(p, t, &spec))?;
            table
        }
        3 => {
            let mut table = Table::new(&["t", "f_tau2(b=-2)", "f_tau2(b=-1)", "f_tau2(b=-0.5)", "f_tau2(b=0)"]);
            table.rows = curves(&[-2.0, -1.0, -0.5, 0.0], &|p, t| tau2_density(p, t, &spec))?;
            table
        }
        4 => {
            let mut table = Table::new(&["t", "f_tau2", "f_IG"]);
            let p = problem(0.0);
            let tau2 = tabulate(&ts, |t| tau2_density(&p, t, &spec))?;
            table.rows = ts
                .iter()
                .zip(tau2)
                .map(|(&t, f)| Ok(vec![t, f, first_passage_density(&p, t)?]))
                .collect::<crate::Result<_>>()?;
            table
        }
        _ => return Err(CliError::Usage(format!("no figure {n}; choose 1, 2, 3 or 4"))),
    };
    Ok(table)
}

fn cmd_figure(args: &FigureArgs, out: &mut dyn Write) -> CliResult<()> {
    let table = figure_table(args.n, args.points)?;
    let mut m = RunManifest::new("figure", 0).param("n", args.n).param("x", 0).param("a", 1);
    if args.n != 1 {
        m = m.param("points", args.points);
    }
    emit(&table, &m, args.output.as_ref(), out)
}

fn cmd_verify(args: &VerifyArgs, workers: usize, out: &mut dyn Write) -> CliResult<()> {
    if args.paths == 0 {
        return Err(CliError::Usage("--paths must be at least 1".into()));
    }
    let mut checks: Vec<Check> = Vec::new();
    if matches!(args.suite, Suite::Analytic | Suite::All) {
        checks.extend(analytic_suite());
    }
    if matches!(args.suite, Suite::Mc | Suite::All) {
        checks.extend(mc_suite(args.paths, args.seed, workers));
    }
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed: Vec<String> = checks.iter().filter(|c| c.failed()).map(|c| c.name.clone()).collect();
    writeln!(out, "{} checks, {} failed", checks.len(), failed.len())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}

fn required(value: Option<f64>, flag: &str, process: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --process {process}")))
}

pub fn reduce(args: &ReduceArgs) -> CliResult<ReducedProblem> {
    Ok(match args.process {
        Process::Cir => reduce_conjugated(&Conjugation::Cir, args.z, required(args.barrier, "barrier", "cir")?)?,
        Process::WrightFisher => {
            reduce_conjugated(&Conjugation::WrightFisher, args.z, required(args.barrier, "barrier", "wright-fisher")?)?
        }
        Process::Gbm => reduce_gbm(
            args.z,
            required(args.r, "r", "gbm")?,
            required(args.sigma, "sigma", "gbm")?,
            required(args.s0, "s0", "gbm")?,
            required(args.muprime, "muprime", "gbm")?,
        )?,
        Process::Ou => reduce_ou(
            args.z,
            required(args.mu, "mu", "ou")?,
            required(args.sigma, "sigma", "ou")?,
            required(args.s0, "s0", "ou")?,
        )?,
    })
}

fn cmd_reduce(args: &ReduceArgs, out: &mut dyn Write) -> CliResult<()> {
    let r = reduce(args)?;
    let q = r.bm_problem;
    writeln!(out, "process: {}", r.description)?;
    writeln!(out, "x' = {}", format_number(q.x))?;
    writeln!(out, "a' = {}", format_number(q.a))?;
    writeln!(out, "b' = {}", format_number(q.b))?;
    writeln!(out, "time change: {}", r.time_map.label())?;
    if let Some(path) = &args.emit_density {
        let ts = grid(Spacing::Linear, 0.0, args.tmax, args.points)?;
        let law = pushforward_law(&r, args.n, &ts, &QuadSpec::default())?;
        let mut table = Table::new(&["t", "density"]);
        table.rows = ts.iter().zip(law.density.values()).map(|(&t, &f)| vec![t, f]).collect();
        let process = args.process.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        let m = RunManifest::new("reduce", 0)
            .param("process", process)
            .param("z", args.z)
            .param("n", args.n)
            .param("tmax", args.tmax)
            .param("points", args.points)
            .param("atom_at_infinity", format_number(law.atom_at_infinity));
        emit(&table, &m, Some(path), out)?;
        writeln!(out, "density written to {}", path.display())?;
    }
    Ok(())
}
