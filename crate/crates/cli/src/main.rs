use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use mcnp::certificate::Iteration;
use mcnp::engine::{prove_traced, Event};
use mcnp::io::{export_dot, export_rule_dot, parse_state, render_state};
use mcnp::oracle::simulate_run;
use mcnp::orders::OrderPair;
use mcnp::{parse_mcs, verify, Certificate, Mcs, ProofOutcome, ProverConfig};
use mcnp_sat::Backend;
use serde_json::{json, Value};

/// Termination prover for monotonicity-constraint transition systems.
#[derive(Parser)]
#[command(name = "mcnp", version)]
struct Cli {
    /// Print results and diagnostics as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a termination proof.
    Prove {
        file: PathBuf,
        /// Write the certificate to this file.
        #[arg(long)]
        cert: Option<PathBuf>,
        /// `builtin` or `dimacs:<path>`; defaults to `dimacs:$MCNP_SAT_SOLVER` when set.
        #[arg(long)]
        backend: Option<String>,
        /// Overall time limit in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        /// Restrict level mappings to untagged positions.
        #[arg(long)]
        no_tags: bool,
        /// Comma-separated order pairs to try, e.g. `minmax,maxmin`.
        #[arg(long)]
        pairs: Option<String>,
        /// Seed for the embedded solver's tie-breaking.
        #[arg(long)]
        seed: Option<u64>,
        /// Try all order pairs of a component concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Verify a certificate against a system.
    Check { file: PathBuf, cert: PathBuf },
    /// Print the control-flow graph, or one rule, in DOT format.
    ExportDot {
        file: PathBuf,
        #[arg(long)]
        rule: Option<String>,
    },
    /// Sample a concrete run.
    Simulate {
        file: PathBuf,
        /// Initial state, e.g. `p(0,5,5)`.
        #[arg(long)]
        from: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// An input or environment problem; exits with status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Mcs, Failure> {
    parse_mcs(&read(path)?).map_err(|e| Failure(format!("{}:{e}", path.display())))
}

fn parse_pairs(list: &str) -> Result<Vec<OrderPair>, Failure> {
    let pairs = list
        .split(',')
        .map(|s| s.trim().parse::<OrderPair>().map_err(|e| Failure(format!("--pairs: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if pairs.is_empty() {
        return Err(Failure("--pairs: empty list".into()));
    }
    Ok(pairs)
}

fn describe_iteration(n: usize, it: &Iteration) -> String {
    format!(
        "mapping {n}: {}{} on {{{}}}, anchors {{{}}}",
        it.pair.low,
        it.pair.high,
        it.scc.join(", "),
        it.anchors.join(", ")
    )
}

fn iteration_json(it: &Iteration) -> Value {
    json!({
        "pair": format!("{}{}", it.pair.low, it.pair.high),
        "scc": it.scc,
        "anchors": it.anchors,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_prove(
    json_out: bool,
    file: &Path,
    cert: Option<&Path>,
    backend: Option<&str>,
    timeout: Option<f64>,
    no_tags: bool,
    pairs: Option<&str>,
    seed: Option<u64>,
    parallel: bool,
) -> Result<ExitCode, Failure> {
    let mcs = load(file)?;
    let backend = match backend {
        Some(spec) => Backend::parse(spec)?,
        None => Backend::from_env().unwrap_or_default(),
    };
    let deadline = match timeout {
        Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(Failure(format!("--timeout: expected a positive number of seconds, got {s}"))),
        None => None,
    };
    let cfg = ProverConfig {
        backend: backend.with_seed(seed),
        deadline,
        pairs: pairs.map(parse_pairs).transpose()?.unwrap_or_else(OrderPair::default_order),
        tags: !no_tags,
        parallel,
        ..ProverConfig::default()
    };
    let mut log = Vec::new();
    let outcome = prove_traced(&mcs, &cfg, |ev| match ev {
        Event::DroppedUnsatisfiable(ids) if !ids.is_empty() => {
            log.push(format!("dropped unsatisfiable rules {{{}}}", ids.join(", ")))
        }
        Event::DroppedUnsatisfiable(_) => {}
        Event::Iteration(it) => log.push(describe_iteration(log.len() + 1, it)),
    })?;
    match outcome {
        ProofOutcome::Proved(certificate) => {
            if let Some(path) = cert {
                std::fs::write(path, certificate.to_json()).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            }
            let n = certificate.iterations.len();
            if json_out {
                let its: Vec<Value> = certificate.iterations.iter().map(iteration_json).collect();
                println!("{}", json!({ "status": "terminating", "level_mappings": n, "iterations": its }));
            } else {
                for line in &log {
                    println!("{line}");
                }
                let noun = if n == 1 { "level mapping" } else { "level mappings" };
                println!("TERMINATING ({n} {noun})");
            }
            Ok(ExitCode::SUCCESS)
        }
        ProofOutcome::NotProved(reason) => {
            if json_out {
                println!("{}", json!({ "status": "not-proved", "reason": reason.code(), "detail": reason.to_string() }));
            } else {
                for line in &log {
                    println!("{line}");
                }
                println!("NOT PROVED: {}: {reason}", reason.code());
            }
            Ok(ExitCode::from(1))
        }
    }
}

fn run_check(json_out: bool, file: &Path, cert: &Path) -> Result<ExitCode, Failure> {
    let mcs = load(file)?;
    let text = read(cert)?;
    let result = Certificate::from_json(&text)
        .map_err(|e| ("malformed".to_string(), None, None, e.to_string()))
        .and_then(|c| {
            verify(&mcs, &c)
                .map(|()| c.iterations.len())
                .map_err(|e| (e.code.to_string(), e.iteration, e.rule.clone(), e.to_string()))
        });
    match result {
        Ok(n) => {
            if json_out {
                println!("{}", json!({ "status": "valid", "level_mappings": n }));
            } else {
                println!("VALID ({n} level mappings)");
            }
            Ok(ExitCode::SUCCESS)
        }
        Err((code, iteration, rule, message)) => {
            if json_out {
                println!(
                    "{}",
                    json!({
                        "status": "invalid",
                        "reason": code,
                        "iteration": iteration.map(|i| i + 1),
                        "rule": rule,
                        "detail": message,
                    })
                );
            } else {
                println!("INVALID: {message}");
            }
            Ok(ExitCode::from(1))
        }
    }
}

fn run_export_dot(file: &Path, rule: Option<&str>) -> Result<ExitCode, Failure> {
    let mcs = load(file)?;
    let out = match rule {
        Some(id) => export_rule_dot(&mcs, mcs.rule(id).ok_or_else(|| Failure(format!("no rule named {id:?}")))?),
        None => export_dot(&mcs),
    };
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(json_out: bool, file: &Path, from: &str, steps: usize, seed: u64) -> Result<ExitCode, Failure> {
    let mcs = load(file)?;
    let start = parse_state(&mcs, from).map_err(|e| Failure(format!("--from: {e}")))?;
    let run = simulate_run(&mcs, start, steps, seed);
    if json_out {
        let steps: Vec<Value> = run
            .steps
            .iter()
            .map(|s| json!({ "rule": s.rule, "state": render_state(&mcs, &s.to) }))
            .collect();
        println!("{}", json!({ "start": render_state(&mcs, &run.start), "steps": steps }));
    } else {
        println!("{}", render_state(&mcs, &run.start));
        for s in &run.steps {
            println!("  --{}--> {}", s.rule, render_state(&mcs, &s.to));
        }
        if run.steps.len() < steps {
            println!("(no applicable rule after {} steps)", run.steps.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Prove { file, cert, backend, timeout, no_tags, pairs, seed, parallel } => run_prove(
            cli.json,
            file,
            cert.as_deref(),
            backend.as_deref(),
            *timeout,
            *no_tags,
            pairs.as_deref(),
            *seed,
            *parallel,
        ),
        Command::Check { file, cert } => run_check(cli.json, file, cert),
        Command::ExportDot { file, rule } => run_export_dot(file, rule.as_deref()),
        Command::Simulate { file, from, steps, seed } => run_simulate(cli.json, file, from, *steps, *seed),
    };
    result.unwrap_or_else(|Failure(msg)| {
        if cli.json {
            eprintln!("{}", json!({ "status": "error", "error": msg }));
        } else {
            eprintln!("mcnp: error: {msg}");
        }
        ExitCode::from(2)
    })
}
