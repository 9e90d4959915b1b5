//! The iterative prover: find a level mapping for a component, remove its
//! anchors, split the remainder into components and repeat.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use mcnp_sat::backend::solve_until;
use mcnp_sat::{Backend, SatError, SatResult};
use thiserror::Error;

use crate::certificate::{input_digest, make_iteration, tool_version, Certificate, Iteration, CERT_VERSION};
use crate::encoder::{decode_model, encode, DecodedMapping, EncodeError, EncoderConfig};
use crate::levelmap::{classify, AnchorAnalysis};
use crate::model::{Mcs, RuleId};
use crate::orders::OrderPair;

#[derive(Debug, Clone)]
pub struct ProverConfig {
    pub backend: Backend,
    /// Limit for a single SAT call; a call that runs out skips its pair.
    pub sat_timeout: Option<Duration>,
    /// Limit for the whole proof attempt.
    pub deadline: Option<Duration>,
    /// Order pairs tried on each component, in order.
    pub pairs: Vec<OrderPair>,
    pub tags: bool,
    /// Defaults to the number of rules.
    pub max_iterations: Option<usize>,
    /// Solve all pairs of a component concurrently. The lowest successful
    /// pair in `pairs` order wins, so the result matches the sequential one.
    pub parallel: bool,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            backend: Backend::default(),
            sat_timeout: None,
            deadline: None,
            pairs: OrderPair::default_order(),
            tags: true,
            max_iterations: None,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotProved {
    /// No pair yields a level mapping for this component.
    ExhaustedPairs { scc: Vec<RuleId>, timed_out: bool },
    Timeout,
    IterationCap,
}

impl NotProved {
    pub fn code(&self) -> &'static str {
        match self {
            NotProved::ExhaustedPairs { .. } => "exhausted-pairs",
            NotProved::Timeout => "timeout",
            NotProved::IterationCap => "iteration-cap",
        }
    }
}

impl std::fmt::Display for NotProved {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NotProved::ExhaustedPairs { scc, timed_out } => {
                write!(f, "no level mapping for component {{{}}}", scc.join(", "))?;
                if *timed_out {
                    write!(f, " (some SAT calls timed out)")?;
                }
                Ok(())
            }
            NotProved::Timeout => write!(f, "deadline reached"),
            NotProved::IterationCap => write!(f, "iteration cap reached"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofOutcome {
    Proved(Certificate),
    NotProved(NotProved),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Sat(SatError),
    #[error("encoding failed: {0}")]
    Encode(#[from] EncodeError),
}

/// Progress notifications from [`prove_traced`].
#[derive(Debug, Clone)]
pub enum Event<'a> {
    DroppedUnsatisfiable(&'a [RuleId]),
    Iteration(&'a Iteration),
}

/// A level mapping found for one component, with the exact classification.
#[derive(Debug, Clone)]
pub struct Found {
    pub pair: OrderPair,
    pub decoded: DecodedMapping,
    pub analysis: AnchorAnalysis,
}

enum Attempt {
    Found(Box<Found>),
    Unsat,
    TimedOut,
}

fn attempt(
    scc: &Mcs,
    pair: OrderPair,
    cfg: &ProverConfig,
    deadline: Option<Instant>,
    cancel: Option<&AtomicBool>,
) -> Result<Attempt, EngineError> {
    let enc = encode(scc, pair, EncoderConfig { tags: cfg.tags })?;
    let call_deadline = match (cfg.sat_timeout.map(|t| Instant::now() + t), deadline) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    match solve_until(&enc.cnf, &cfg.backend, call_deadline, cancel) {
        Ok(SatResult::Unsat) => Ok(Attempt::Unsat),
        Ok(SatResult::Sat(model)) => {
            let decoded = decode_model(scc, &model, &enc.vars)?;
            Ok(Attempt::Found(Box::new(analyse(scc, decoded))))
        }
        Err(SatError::Timeout | SatError::Cancelled) => Ok(Attempt::TimedOut),
        Err(e) => Err(EngineError::Sat(e)),
    }
}

/// Recomputes the strict and bounded sets exactly; they contain the flags the
/// model set, so the anchors only grow.
fn analyse(scc: &Mcs, decoded: DecodedMapping) -> Found {
    let class = classify(scc, &decoded.mapping);
    let analysis = AnchorAnalysis::compute(scc, class.strict, class.bounded, false);
    Found { pair: decoded.mapping.pair, decoded, analysis }
}

/// Tries the configured pairs on one strongly connected component.
/// `Ok(Err(timed_out))` means no pair succeeded.
pub fn find_level_mapping(
    scc: &Mcs,
    cfg: &ProverConfig,
    deadline: Option<Instant>,
) -> Result<Result<Found, bool>, EngineError> {
    if cfg.parallel && cfg.pairs.len() > 1 {
        return find_parallel(scc, cfg, deadline);
    }
    let mut timed_out = false;
    for &pair in &cfg.pairs {
        match attempt(scc, pair, cfg, deadline, None)? {
            Attempt::Found(f) => return Ok(Ok(*f)),
            Attempt::Unsat => {}
            Attempt::TimedOut => timed_out = true,
        }
    }
    Ok(Err(timed_out))
}

fn find_parallel(scc: &Mcs, cfg: &ProverConfig, deadline: Option<Instant>) -> Result<Result<Found, bool>, EngineError> {
    let n = cfg.pairs.len();
    let cancel: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();
    let results: Mutex<Vec<Option<Result<Attempt, EngineError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for (i, &pair) in cfg.pairs.iter().enumerate() {
            let (cancel, results) = (&cancel, &results);
            s.spawn(move || {
                let r = attempt(scc, pair, cfg, deadline, Some(&cancel[i]));
                if matches!(r, Ok(Attempt::Found(_))) {
                    // Later pairs can no longer win.
                    for flag in &cancel[i + 1..] {
                        flag.store(true, Ordering::Relaxed);
                    }
                }
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut timed_out = false;
    for (i, r) in results.into_inner().expect("threads joined").into_iter().enumerate() {
        match r.expect("every pair reports") {
            Ok(Attempt::Found(f)) => return Ok(Ok(*f)),
            Ok(Attempt::Unsat) => {}
            Ok(Attempt::TimedOut) => {
                if !cancel[i].load(Ordering::Relaxed) {
                    timed_out = true;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Err(timed_out))
}

pub fn prove(mcs: &Mcs, cfg: &ProverConfig) -> Result<ProofOutcome, EngineError> {
    prove_traced(mcs, cfg, |_| {})
}

/// Runs the prover, reporting progress to `on_event`.
pub fn prove_traced(mcs: &Mcs, cfg: &ProverConfig, mut on_event: impl FnMut(Event<'_>)) -> Result<ProofOutcome, EngineError> {
    let deadline = cfg.deadline.map(|d| Instant::now() + d);
    let (work, dropped) = mcs.drop_unsatisfiable();
    if !dropped.is_empty() {
        on_event(Event::DroppedUnsatisfiable(&dropped));
    }
    let cap = cfg.max_iterations.unwrap_or(work.rules().len());
    // Components are popped from the end: the first one in topological
    // order is analysed first.
    let mut stack = work.scc_decompose();
    let mut iterations = Vec::new();
    while let Some(scc) = stack.pop() {
        if iterations.len() >= cap {
            return Ok(ProofOutcome::NotProved(NotProved::IterationCap));
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(ProofOutcome::NotProved(NotProved::Timeout));
        }
        let found = match find_level_mapping(&scc, cfg, deadline)? {
            Ok(found) => found,
            Err(_) if deadline.is_some_and(|d| Instant::now() >= d) => {
                return Ok(ProofOutcome::NotProved(NotProved::Timeout))
            }
            Err(timed_out) => {
                let ids = scc.rules().iter().map(|r| r.id.clone()).collect();
                return Ok(ProofOutcome::NotProved(NotProved::ExhaustedPairs { scc: ids, timed_out }));
            }
        };
        let a = &found.analysis;
        let it = make_iteration(&scc, &found.decoded.mapping, &a.strict, &a.bounded, &a.anchors);
        on_event(Event::Iteration(&it));
        iterations.push(it);
        let rest = scc.remove_rules(&a.anchors).expect("anchors belong to the component");
        stack.extend(rest.scc_decompose());
    }
    Ok(ProofOutcome::Proved(Certificate {
        version: CERT_VERSION,
        input_digest: input_digest(mcs),
        tool_version: tool_version(),
        iterations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::verify;
    use crate::fixtures::{AVERAGE, NONTERM, PQ_LOOPS};
    use crate::io::parse_mcs;

    #[test]
    fn worked_example_needs_two_iterations() {
        let mcs = parse_mcs(PQ_LOOPS).unwrap();
        let ProofOutcome::Proved(cert) = prove(&mcs, &ProverConfig::default()).unwrap() else {
            panic!("expected a proof");
        };
        assert_eq!(cert.iterations.len(), 2);
        assert_eq!(cert.iterations[0].scc.len(), 4);
        verify(&mcs, &cert).unwrap();
    }

    #[test]
    fn average_is_proved() {
        let mcs = parse_mcs(AVERAGE).unwrap();
        let out = prove(&mcs, &ProverConfig::default()).unwrap();
        let ProofOutcome::Proved(cert) = out else { panic!("{out:?}") };
        verify(&mcs, &cert).unwrap();
    }

    #[test]
    fn nonterminating_loop_exhausts_pairs() {
        let mcs = parse_mcs(NONTERM).unwrap();
        let out = prove(&mcs, &ProverConfig::default()).unwrap();
        assert_eq!(out, ProofOutcome::NotProved(NotProved::ExhaustedPairs { scc: vec!["g1".into()], timed_out: false }));
    }

    #[test]
    fn parallel_matches_sequential() {
        let mcs = parse_mcs(PQ_LOOPS).unwrap();
        let seq = prove(&mcs, &ProverConfig::default()).unwrap();
        let par = prove(&mcs, &ProverConfig { parallel: true, ..ProverConfig::default() }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mcs = parse_mcs(PQ_LOOPS).unwrap();
        let cfg = ProverConfig { max_iterations: Some(1), ..ProverConfig::default() };
        assert_eq!(prove(&mcs, &cfg).unwrap(), ProofOutcome::NotProved(NotProved::IterationCap));
    }

    #[test]
    fn unsatisfiable_rules_are_dropped() {
        let mcs = parse_mcs("p(x) :- x > y, y > x; p(y).").unwrap();
        let mut dropped = Vec::new();
        let out = prove_traced(&mcs, &ProverConfig::default(), |e| {
            if let Event::DroppedUnsatisfiable(ids) = e {
                dropped.extend_from_slice(ids);
            }
        })
        .unwrap();
        assert_eq!(dropped, vec!["g1".to_string()]);
        let ProofOutcome::Proved(cert) = out else { panic!() };
        assert!(cert.iterations.is_empty());
        verify(&mcs, &cert).unwrap();
    }
}
