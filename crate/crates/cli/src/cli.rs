//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gtmp_core::engine::GtmpOptions;
use thiserror::Error;

use crate::problem::{parse_problem, Mode, Problem, ProblemError};
use crate::report::Report;
use crate::run::{first_program, run_problem};
use crate::verify::verify_report;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Problem { path: PathBuf, source: ProblemError },
    #[error("{path}: malformed report: {source}")]
    Report { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "gtmp",
    version,
    about = "Generalized truncated moment problems on unbounded semialgebraic sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve any problem file.
    Solve(SolveArgs),
    /// PSOP / SCP detection for a tensor-psop or tensor-scp file.
    Tensor(SolveArgs),
    /// Moment cone membership for a cone-member file.
    Cone(SolveArgs),
    /// Rational minimization for a ratopt file.
    Ratopt(SolveArgs),
    /// Validate a problem file, and optionally re-verify a report against it.
    Check {
        problem: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    k_max: usize,
    /// Even objective degree; defaults to the smallest even integer above deg(A).
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    tol_rank: Option<f64>,
    #[arg(long)]
    tol_tau: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long, default_value_t = 3)]
    retries: usize,
    /// Replace x0 >= 0 by x0 >= eps in the lifted set.
    #[arg(long)]
    x0_floor: Option<f64>,
    /// Write the first relaxation in the sparse text format.
    #[arg(long)]
    dump_sdp: Option<PathBuf>,
    #[arg(long, conflicts_with = "text")]
    json: bool,
    #[arg(long)]
    text: bool,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Record wall time in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Usage(format!("--{name} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

impl SolveArgs {
    fn options(&self) -> Result<GtmpOptions, CliError> {
        positive("tol-rank", self.tol_rank)?;
        positive("tol-tau", self.tol_tau)?;
        positive("tol-feas", self.tol_feas)?;
        positive("x0-floor", self.x0_floor)?;
        if let Some(d1) = self.d1 {
            if d1 == 0 || d1 % 2 != 0 {
                return Err(CliError::Usage(format!(
                    "--d1 must be a positive even integer, got {d1}"
                )));
            }
        }
        let mut o = GtmpOptions {
            seed: self.seed,
            k_max: self.k_max,
            d1: self.d1,
            retries: self.retries,
            x0_floor: self.x0_floor,
            ..GtmpOptions::default()
        };
        if let Some(t) = self.tol_rank {
            o.tol_rank = t;
        }
        if let Some(t) = self.tol_tau {
            o.tol_tau = t;
        }
        if let Some(t) = self.tol_feas {
            o.solver.tol_feas = t;
            o.solver.tol_gap = t;
        }
        Ok(o)
    }
}

pub fn load_problem(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text).map_err(|source| CliError::Problem {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Report::from_json(&text).map_err(|source| CliError::Report {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn solve(cmd: &str, a: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let opts = a.options()?;
    let p = load_problem(&a.problem)?;
    let allowed: &[Mode] = match cmd {
        "tensor" => &[Mode::TensorPsop, Mode::TensorScp],
        "cone" => &[Mode::ConeMember],
        "ratopt" => &[Mode::Ratopt],
        _ => &[
            Mode::Gtmp,
            Mode::TensorPsop,
            Mode::TensorScp,
            Mode::ConeMember,
            Mode::Ratopt,
        ],
    };
    if !allowed.contains(&p.mode()) {
        return Err(CliError::Usage(format!(
            "`{cmd}` cannot run a {} problem; use `solve`",
            p.mode().as_str()
        )));
    }
    if let (Some(d1), Some(spec)) = (a.d1, &p.spec) {
        if d1 <= spec.deg() {
            return Err(CliError::Usage(format!(
                "--d1 {d1} must exceed deg(A) = {}",
                spec.deg()
            )));
        }
    }
    if let Some(path) = &a.dump_sdp {
        let prog =
            first_program(&p, &opts).map_err(|e| CliError::Usage(format!("cannot build the relaxation: {e}")))?;
        write_file(path, &prog.to_sparse_text())?;
    }
    let start = Instant::now();
    let mut report = run_problem(&p, &opts);
    if a.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let text = if a.text { report.to_text() } else { report.to_json() };
    match &a.output {
        Some(path) => write_file(path, &text)?,
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(report.exit_code)
}

fn check(problem: &Path, report: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = load_problem(problem)?;
    let Some(rp) = report else {
        let rows = p.spec.as_ref().map_or(0, |s| s.a_polys.len());
        let _ = writeln!(
            out,
            "ok: {} problem in {} variables with {rows} row(s)",
            p.mode().as_str(),
            p.set.num_vars()
        );
        return Ok(0);
    };
    let r = load_report(rp)?;
    let v = verify_report(&r, &p);
    let _ = write!(out, "{v}");
    if v.passed() {
        let _ = writeln!(out);
        Ok(0)
    } else {
        Ok(EXIT_VERIFY_FAILED)
    }
}

/// Run the command line `args` (program name first) and return the exit
/// code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let res = match &cli.command {
        Command::Solve(a) => solve("solve", a, out),
        Command::Tensor(a) => solve("tensor", a, out),
        Command::Cone(a) => solve("cone", a, out),
        Command::Ratopt(a) => solve("ratopt", a, out),
        Command::Check { problem, report } => check(problem, report.as_deref(), out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
