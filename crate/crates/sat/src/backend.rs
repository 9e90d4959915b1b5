use std::io::{self, Read};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cnf::Cnf;
use crate::dimacs::{emit_dimacs, parse_solver_output};
use crate::solver::{Outcome, Solver};

/// Environment variable naming the default external solver binary.
pub const SOLVER_ENV: &str = "MCNP_SAT_SOLVER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// A total assignment, indexed by `Var::index`.
    Sat(Vec<bool>),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

#[derive(Debug, Error)]
pub enum SatError {
    #[error("solver timed out")]
    Timeout,
    #[error("solve cancelled")]
    Cancelled,
    #[error("external solver {0} not found or not executable")]
    SolverMissing(PathBuf),
    #[error("solver protocol violation: {0}")]
    Protocol(String),
    #[error("solver returned a model violating clause {0}")]
    InvalidModel(usize),
    #[error("i/o error talking to solver: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Builtin { seed: Option<u64> },
    /// A binary invoked as `<path> <file.cnf>` that prints `s ...`/`v ...` lines.
    External { path: PathBuf },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Builtin { seed: None }
    }
}

impl Backend {
    /// Parses `builtin` or `dimacs:<path>`. A bare `dimacs` falls back to
    /// the path in `MCNP_SAT_SOLVER`.
    pub fn parse(spec: &str) -> Result<Backend, String> {
        match spec {
            "builtin" => Ok(Backend::Builtin { seed: None }),
            "dimacs" => Backend::from_env().ok_or_else(|| format!("dimacs backend needs a path or {SOLVER_ENV}")),
            _ => match spec.strip_prefix("dimacs:") {
                Some(path) if !path.is_empty() => Ok(Backend::External { path: path.into() }),
                _ => Err(format!("unknown backend {spec:?} (expected builtin or dimacs:<path>)")),
            },
        }
    }

    pub fn from_env() -> Option<Backend> {
        std::env::var_os(SOLVER_ENV).map(|p| Backend::External { path: p.into() })
    }

    pub fn with_seed(self, seed: Option<u64>) -> Backend {
        match self {
            Backend::Builtin { .. } => Backend::Builtin { seed },
            other => other,
        }
    }
}

/// Locates an external DIMACS solver: `MCNP_SAT_SOLVER` first, then a few
/// well-known binaries on `PATH`.
pub fn discover_external() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os(SOLVER_ENV) {
        return Some(p.into());
    }
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        for name in ["varisat", "kissat", "cadical", "minisat", "glucose"] {
            let cand = dir.join(name);
            if cand.is_file() {
                return Some(cand);
            }
        }
    }
    None
}

/// Solves `cnf`; any returned model has been checked against every clause.
pub fn solve(cnf: &Cnf, backend: &Backend, timeout: Option<Duration>) -> Result<SatResult, SatError> {
    solve_until(cnf, backend, timeout.map(|t| Instant::now() + t), None)
}

pub fn solve_until(
    cnf: &Cnf,
    backend: &Backend,
    deadline: Option<Instant>,
    cancel: Option<&AtomicBool>,
) -> Result<SatResult, SatError> {
    let result = match backend {
        Backend::Builtin { seed } => {
            let (out, _) = Solver::new(cnf, *seed).deadline(deadline).cancel_flag(cancel).solve();
            match out {
                Outcome::Sat(m) => SatResult::Sat(m),
                Outcome::Unsat => SatResult::Unsat,
                Outcome::Interrupted => {
                    return Err(if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                        SatError::Cancelled
                    } else {
                        SatError::Timeout
                    })
                }
            }
        }
        Backend::External { path } => run_external(cnf, path, deadline, cancel)?,
    };
    if let SatResult::Sat(model) = &result {
        if let Some(ci) = cnf.first_violation(model) {
            return Err(SatError::InvalidModel(ci));
        }
    }
    Ok(result)
}

fn run_external(
    cnf: &Cnf,
    path: &PathBuf,
    deadline: Option<Instant>,
    cancel: Option<&AtomicBool>,
) -> Result<SatResult, SatError> {
    let mut file = tempfile::Builder::new().prefix("mcnp-").suffix(".cnf").tempfile()?;
    io::Write::write_all(&mut file, emit_dimacs(cnf).as_bytes())?;
    let mut child = match Command::new(path)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied) => {
            return Err(SatError::SolverMissing(path.clone()))
        }
        Err(e) => return Err(e.into()),
    };
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        stdout.read_to_string(&mut buf).map(|_| buf)
    });
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        let cancelled = cancel.is_some_and(|c| c.load(Ordering::Relaxed));
        let expired = deadline.is_some_and(|d| Instant::now() >= d);
        if cancelled || expired {
            let _ = child.kill();
            let _ = child.wait();
            return Err(if cancelled { SatError::Cancelled } else { SatError::Timeout });
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let text = reader
        .join()
        .map_err(|_| SatError::Protocol("reader thread panicked".into()))??;
    parse_solver_output(&text, cnf.num_vars())
}
