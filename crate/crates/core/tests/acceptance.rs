//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line on stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mcnp::certificate::{Certificate, Entry, ReasonCode};
use mcnp::encoder::{encode, EncoderConfig};
use mcnp::engine::{prove, ProofOutcome, ProverConfig};
use mcnp::io::parse_mcs;
use mcnp::model::{Mcs, Rel, Var};
use mcnp::oracle::{
    check_irf_on_run, lexicographic_greater, mcnp_by_construction, random_rule, random_state, random_tagged_set,
    semantic_bounded_sets, semantic_entails, semantic_order, semantic_verify, simulate_run,
};
use mcnp::orders::{
    decide_bounded_syntactic, decide_order_syntactic, difference, negate, strictly_greater, weakly_greater, IntMultiset,
    OrderPair, OrderType,
};
use mcnp::verify;
use mcnp_sat::backend::discover_external;
use mcnp_sat::{solve, Backend, Cnf, Lit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORKED_EXAMPLE_BUDGET: Duration = Duration::from_secs(2);
const INTRO_BUDGET: Duration = Duration::from_secs(1);
const LEMMA_TRIALS: usize = 10_000;

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    // Written past the test harness's capture so the line always shows.
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn corpus() -> Vec<(String, Mcs)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mcs"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mcs = parse_mcs(&std::fs::read_to_string(&p).unwrap()).unwrap();
            (name, mcs)
        })
        .collect()
}

fn load(name: &str) -> Mcs {
    parse_mcs(&std::fs::read_to_string(corpus_dir().join(name)).unwrap()).unwrap()
}

fn prove_default(mcs: &Mcs) -> Option<Certificate> {
    match prove(mcs, &ProverConfig::default()).unwrap() {
        ProofOutcome::Proved(c) => Some(c),
        ProofOutcome::NotProved(_) => None,
    }
}

fn random_multiset(rng: &mut impl Rng, min_len: usize, max_len: usize) -> IntMultiset {
    let len = rng.gen_range(min_len..=max_len);
    (0..len).map(|_| rng.gen_range(-6..=6)).collect()
}

#[test]
fn criterion_1_worked_example() {
    let mcs = load("pq_loops.mcs");
    let start = Instant::now();
    let cert = prove_default(&mcs);
    let elapsed = start.elapsed();
    let (pass, detail) = match cert {
        Some(c) => {
            let verified = verify(&mcs, &c).is_ok();
            let n = c.iterations.len();
            (verified && n <= 3 && elapsed < WORKED_EXAMPLE_BUDGET, format!("proved with {n} level mappings, verified={verified}, {elapsed:?} (budget {WORKED_EXAMPLE_BUDGET:?})"))
        }
        None => (false, "not proved".to_string()),
    };
    report(1, pass, &detail);
}

#[test]
fn criterion_2_intro_example() {
    let mcs = load("average.mcs");
    let start = Instant::now();
    let cert = prove_default(&mcs);
    let elapsed = start.elapsed();
    let (pass, detail) = match cert {
        Some(c) => {
            let verified = verify(&mcs, &c).is_ok();
            (verified && elapsed < INTRO_BUDGET, format!("proved with {} level mappings, verified={verified}, {elapsed:?} (budget {INTRO_BUDGET:?})", c.iterations.len()))
        }
        None => (false, "not proved".to_string()),
    };
    report(2, pass, &detail);
}

#[test]
fn criterion_3_multiset_spot_check() {
    let s = IntMultiset::new(vec![10, 8, 5]);
    let t = IntMultiset::new(vec![9, 5]);
    use OrderType::*;
    let checks = [
        ("S >max T", strictly_greater(Max, &s, &t)),
        ("not T >max S", !strictly_greater(Max, &t, &s)),
        ("T >=min S", weakly_greater(Min, &t, &s)),
        ("S >=min T", weakly_greater(Min, &s, &t)),
        ("S >ms T", strictly_greater(Ms, &s, &t)),
        ("not T >=ms S", !weakly_greater(Ms, &t, &s)),
        ("T >dms S", strictly_greater(Dms, &t, &s)),
        ("not S >=dms T", !weakly_greater(Dms, &s, &t)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    report(3, failed.is_empty(), &format!("{} relations checked, failing: {failed:?}", checks.len()));
}

#[test]
fn criterion_4_entailment_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut queries, mut discrepancies, mut positives) = (0usize, Vec::new(), 0usize);
    for i in 0..1000 {
        let rule = random_rule(&mut rng, 4, 8);
        let c = rule.closure();
        let vars: Vec<Var> = c.vars().collect();
        let k = vars.len();
        for &a in &vars {
            for &b in &vars {
                for rel in [Rel::Gt, Rel::Ge] {
                    let closed = c.entails(a, rel, b).unwrap();
                    let semantic = semantic_entails(&rule, a, rel, b, k);
                    queries += 1;
                    positives += closed as usize;
                    if closed != semantic {
                        discrepancies.push(format!("rule {i}: {a} {rel} {b}"));
                    }
                }
            }
        }
    }
    report(
        4,
        discrepancies.is_empty(),
        &format!("1000 rules, {queries} queries ({positives} entailed), {} discrepancies {:?}", discrepancies.len(), discrepancies.first()),
    );
}

#[test]
fn criterion_5_order_criterion_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut fired, mut bound_fired, mut bad) = (0usize, 0usize, Vec::new());
    let pairs = OrderPair::default_order();
    for i in 0..1000 {
        let rule = random_rule(&mut rng, 4, 8);
        let modulus = rule.src_names.len() + rule.tgt_names.len();
        let order = *OrderType::ALL.choose(&mut rng).unwrap();
        let s = random_tagged_set(&mut rng, &rule, 3, modulus);
        let t = random_tagged_set(&mut rng, &rule, 3, modulus);
        for strict in [false, true] {
            if decide_order_syntactic(rule.closure(), order, &s, &t, strict) {
                fired += 1;
                if !semantic_order(&rule, order, &s, &t, strict, modulus) {
                    bad.push(format!("order instance {i} ({order:?}, strict={strict})"));
                }
            }
        }
        let pair = *pairs.choose(&mut rng).unwrap();
        let low = random_tagged_set(&mut rng, &rule, 3, modulus);
        let high = random_tagged_set(&mut rng, &rule, 3, modulus);
        if !low.is_empty() && !high.is_empty() && decide_bounded_syntactic(rule.closure(), pair, &low, &high) {
            bound_fired += 1;
            if !semantic_bounded_sets(&rule, pair, &low, &high, modulus) {
                bad.push(format!("bound instance {i} ({pair})"));
            }
        }
    }
    let pass = bad.is_empty() && fired > 0 && bound_fired > 0;
    report(
        5,
        pass,
        &format!("1000 instances, order criterion held {fired} times, bound criterion {bound_fired} times, {} counterexamples {:?}", bad.len(), bad.first()),
    );
}

#[test]
fn criterion_6_lemma_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = OrderPair::default_order();
    let mut bad = Vec::new();
    let mut fired = [0usize; 3];
    for i in 0..LEMMA_TRIALS {
        let pair = *pairs.choose(&mut rng).unwrap();
        let (lt, ht) = (pair.low(), pair.high());
        let [l, h, l2, h2] = [(); 4].map(|_| random_multiset(&mut rng, 1, 4));
        let d = difference(lt, ht, &l, &h).unwrap();
        let d2 = difference(lt, ht, &l2, &h2).unwrap();
        let dt = pair.difference_type();
        assert_eq!(d.order, dt);
        let high_weak = weakly_greater(ht, &h, &h2);
        let high_strict = strictly_greater(ht, &h, &h2);
        let low_weak = weakly_greater(lt, &l2, &l);
        let low_strict = strictly_greater(lt, &l2, &l);
        let implications = [
            (high_weak && low_weak, weakly_greater(dt, &d.multiset, &d2.multiset)),
            (high_strict && low_weak, strictly_greater(dt, &d.multiset, &d2.multiset)),
            (high_weak && low_strict, strictly_greater(dt, &d.multiset, &d2.multiset)),
        ];
        for (k, (premise, conclusion)) in implications.into_iter().enumerate() {
            if premise {
                fired[k] += 1;
                if !conclusion {
                    bad.push(format!("difference lemma clause {} on trial {i}", k + 1));
                }
            }
        }
    }
    let mut dual_fired = 0;
    for i in 0..LEMMA_TRIALS {
        let s = random_multiset(&mut rng, 1, 4);
        let t = random_multiset(&mut rng, 1, 4);
        for mu in OrderType::ALL {
            let (ns, nt) = (negate(&s), negate(&t));
            if weakly_greater(mu, &s, &t) {
                dual_fired += 1;
                if !weakly_greater(mu.dual(), &nt, &ns) {
                    bad.push(format!("duality ({mu:?}, weak) on trial {i}"));
                }
            }
            if strictly_greater(mu, &s, &t) && !strictly_greater(mu.dual(), &nt, &ns) {
                bad.push(format!("duality ({mu:?}, strict) on trial {i}"));
            }
        }
    }
    for i in 0..LEMMA_TRIALS {
        let s = random_multiset(&mut rng, 0, 4);
        let t = random_multiset(&mut rng, 0, 4);
        for mu in [OrderType::Ms, OrderType::Dms] {
            if strictly_greater(mu, &s, &t) != lexicographic_greater(mu, s.as_slice(), t.as_slice()) {
                bad.push(format!("lexicographic reading of {mu:?} on trial {i}"));
            }
        }
    }
    let pass = bad.is_empty() && fired.iter().all(|&f| f > 0) && dual_fired > 0;
    report(
        6,
        pass,
        &format!(
            "{LEMMA_TRIALS} trials per suite; difference lemma premises held {fired:?} times, duality premises {dual_fired} times; {} counterexamples {:?}",
            bad.len(),
            bad.first()
        ),
    );
}

#[test]
fn criterion_7_run_based_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut systems, mut runs, mut steps, mut violations) = (0, 0, 0, Vec::new());
    for (name, mcs) in corpus() {
        let Some(cert) = prove_default(&mcs) else { continue };
        systems += 1;
        let starts: Vec<usize> = (0..mcs.points().len()).filter(|&p| mcs.rules().iter().any(|r| r.source == p)).collect();
        for r in 0..100 {
            let point = *starts.choose(&mut rng).unwrap();
            let start = random_state(&mcs, point, 10, &mut rng);
            let run = simulate_run(&mcs, start, 50, rng.gen());
            runs += 1;
            steps += run.len();
            if let Err(v) = check_irf_on_run(&mcs, &cert, &run) {
                violations.push(format!("{name} run {r}: {v:?}"));
            }
        }
    }

    // Negative control: exchanging the low and high sets of the first
    // mapping of the worked example must be caught on some run.
    let mcs = load("pq_loops.mcs");
    let mut bad = prove_default(&mcs).unwrap();
    for sets in bad.iterations[0].mapping.values_mut() {
        std::mem::swap(&mut sets.low, &mut sets.high);
    }
    let p = mcs.point_index("p").unwrap();
    let caught = (0..100)
        .filter(|&seed| {
            let start = random_state(&mcs, p, 10, &mut rng);
            check_irf_on_run(&mcs, &bad, &simulate_run(&mcs, start, 50, seed)).is_err()
        })
        .count();
    let pass = violations.is_empty() && systems > 0 && caught > 0;
    report(
        7,
        pass,
        &format!(
            "{systems} certified systems, {runs} runs, {steps} steps, {} violations {:?}; corrupted certificate caught on {caught}/100 runs",
            violations.len(),
            violations.first()
        ),
    );
}

fn pick_mut<'a, T>(rng: &mut impl Rng, v: &'a mut [T]) -> Option<&'a mut T> {
    if v.is_empty() {
        None
    } else {
        let i = rng.gen_range(0..v.len());
        Some(&mut v[i])
    }
}

/// Applies one random single-field change.
fn mutate(rng: &mut impl Rng, mcs: &Mcs, cert: &Certificate) -> Certificate {
    let mut c = cert.clone();
    let ids: Vec<String> = mcs.rules().iter().map(|r| r.id.clone()).collect();
    let points: Vec<String> = mcs.points().iter().map(|p| p.name.clone()).collect();
    let modulus = mcs.tag_modulus() as u32;
    let k = rng.gen_range(0..c.iterations.len().max(1));
    let kind = rng.gen_range(0..18);
    if c.iterations.is_empty() || kind == 0 {
        match rng.gen_range(0..3) {
            0 => c.version += 1,
            1 => c.input_digest.replace_range(0..1, if c.input_digest.starts_with('0') { "1" } else { "0" }),
            _ => c.iterations.push(cert.iterations.first().cloned().unwrap_or_else(|| empty_iteration(&ids))),
        }
        return c;
    }
    let n_iter = c.iterations.len();
    let it = &mut c.iterations[k];
    let toggle = |rng: &mut dyn rand::RngCore, v: &mut Vec<String>| {
        let id = ids.choose(rng).unwrap().clone();
        match v.iter().position(|x| *x == id) {
            Some(i) => {
                v.remove(i);
            }
            None => v.push(id),
        }
    };
    match kind {
        1 => toggle(rng, &mut it.scc),
        2 => it.scc.push("nosuchrule".into()),
        3 => it.pair.low = *OrderType::ALL.choose(rng).unwrap(),
        4 => it.pair.high = *OrderType::ALL.choose(rng).unwrap(),
        5 | 6 | 7 | 8 => {
            let name = points.choose(rng).unwrap().clone();
            let arity = mcs.points()[mcs.point_index(&name).unwrap()].arity;
            let sets = it.mapping.entry(name).or_default();
            let set = if rng.gen_bool(0.5) { &mut sets.low } else { &mut sets.high };
            match kind {
                5 if !set.is_empty() => {
                    let i = rng.gen_range(0..set.len());
                    set.remove(i);
                }
                6 | 5 => set.push(Entry { pos: rng.gen_range(1..=arity + 1), tag: rng.gen_range(0..=modulus) }),
                7 => {
                    if let Some(e) = pick_mut(rng, set) {
                        e.tag = rng.gen_range(0..=modulus);
                    }
                }
                _ => {
                    if let Some(e) = pick_mut(rng, set) {
                        e.pos = rng.gen_range(0..=arity + 1);
                    }
                }
            }
        }
        9 => {
            if let Some(key) = it.mapping.keys().cloned().collect::<Vec<_>>().choose(rng) {
                it.mapping.remove(key);
            }
        }
        10 => {
            it.mapping.insert("nosuchpoint".into(), Default::default());
        }
        11 | 12 => toggle(rng, &mut it.strict),
        13 | 14 => toggle(rng, &mut it.bounded),
        15 => toggle(rng, &mut it.anchors),
        16 => it.anchors.clear(),
        _ => {
            if n_iter > 1 && rng.gen_bool(0.5) {
                c.iterations.swap(k, (k + 1) % n_iter);
            } else {
                c.iterations.remove(k);
            }
        }
    }
    c
}

fn empty_iteration(ids: &[String]) -> mcnp::certificate::Iteration {
    mcnp::certificate::Iteration {
        scc: ids.to_vec(),
        pair: mcnp::certificate::PairSpec { low: OrderType::Min, high: OrderType::Max },
        mapping: BTreeMap::new(),
        strict: Vec::new(),
        bounded: Vec::new(),
        anchors: ids.to_vec(),
    }
}

#[test]
fn criterion_8_certificate_robustness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut subjects: Vec<(Mcs, Certificate)> = corpus()
        .into_iter()
        .filter_map(|(_, mcs)| prove_default(&mcs).map(|c| (mcs, c)))
        .collect();
    for _ in 0..20 {
        let (mcs, _) = mcnp_by_construction(&mut rng);
        let c = prove_default(&mcs).unwrap();
        subjects.push((mcs, c));
    }
    let (mut total, mut changing, mut kept_valid, mut rejected_valid) = (0usize, 0usize, 0usize, 0usize);
    let mut codes: BTreeMap<ReasonCode, usize> = BTreeMap::new();
    let mut bad = Vec::new();
    while changing < 1000 {
        let (mcs, cert) = subjects.choose(&mut rng).unwrap();
        let m = mutate(&mut rng, mcs, cert);
        if &m == cert {
            continue;
        }
        total += 1;
        let got = verify(mcs, &m).map_err(|e| (e.code, e.iteration));
        match semantic_verify(mcs, &m) {
            Err(expected) => {
                changing += 1;
                *codes.entry(expected.0).or_default() += 1;
                if got != Err(expected) {
                    bad.push(format!("expected {expected:?}, verify gave {got:?}"));
                }
            }
            Ok(()) => {
                kept_valid += 1;
                rejected_valid += got.is_err() as usize;
            }
        }
    }
    let pass = bad.is_empty() && changing >= 1000;
    report(
        8,
        pass,
        &format!(
            "{total} mutations of {} certificates: {changing} semantics-changing (codes {codes:?}), {} wrongly handled {:?}; {kept_valid} still valid ({rejected_valid} of them rejected by the syntactic checker)",
            subjects.len(),
            bad.len(),
            bad.first()
        ),
    );
}

#[test]
fn criterion_9_mcnp_completeness() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut iterations = 0;
    for i in 0..200 {
        let (mcs, f) = mcnp_by_construction(&mut rng);
        match prove_default(&mcs) {
            Some(c) if verify(&mcs, &c).is_ok() => iterations += c.iterations.len(),
            _ => failures.push(format!("system {i} built around {}", f.pair)),
        }
    }
    report(9, failures.is_empty(), &format!("200 systems, {} not proved {:?}, {iterations} mappings in total", failures.len(), failures.first()));
}

fn random_3cnf(rng: &mut impl Rng, vars: u32, ratio: f64) -> Cnf {
    let m = (vars as f64 * ratio).round() as usize;
    let clauses = (0..m)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let v = rng.gen_range(1..=vars) as i32;
                    Lit::from_dimacs(if rng.gen_bool(0.5) { v } else { -v })
                })
                .collect()
        })
        .collect();
    Cnf::from_clauses(vars, clauses)
}

#[test]
fn criterion_10_backend_agreement() {
    let Some(path) = discover_external() else {
        report(10, false, "no external DIMACS solver found (set MCNP_SAT_SOLVER)");
        return;
    };
    let external = Backend::External { path: path.clone() };
    let builtin = Backend::default();
    let mut cnfs: Vec<(String, Cnf)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut systems: Vec<(String, Mcs)> = corpus();
    for i in 0..20 {
        systems.push((format!("constructed {i}"), mcnp_by_construction(&mut rng).0));
    }
    for (name, mcs) in &systems {
        let (work, _) = mcs.drop_unsatisfiable();
        for scc in work.scc_decompose() {
            for pair in OrderPair::default_order() {
                for tags in [true, false] {
                    let enc = encode(&scc, pair, EncoderConfig { tags }).unwrap();
                    cnfs.push((format!("{name} {pair} tags={tags}"), enc.cnf));
                }
            }
        }
    }
    let encodings = cnfs.len();
    for i in 0..100 {
        cnfs.push((format!("random 3-CNF {i}"), random_3cnf(&mut rng, 20 + (i % 41) as u32, 4.26)));
    }
    let (mut sat, mut disagreements) = (0usize, Vec::new());
    for (name, cnf) in &cnfs {
        let a = solve(cnf, &builtin, None).unwrap();
        let b = solve(cnf, &external, None).unwrap();
        sat += a.is_sat() as usize;
        if a.is_sat() != b.is_sat() {
            disagreements.push(name.clone());
        }
    }
    report(
        10,
        disagreements.is_empty(),
        &format!(
            "{encodings} encodings + 100 random CNFs against {}: {sat} sat, {} unsat, {} disagreements {:?}",
            path.display(),
            cnfs.len() - sat,
            disagreements.len(),
            disagreements.first()
        ),
    );
}
