use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn mcnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcnp"))
        .args(args)
        .env_remove("MCNP_SAT_SOLVER")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn prove_then_check_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.json");
    let system = corpus("pq_loops.mcs");
    let out = mcnp(&["prove", path(&system), "--cert", path(&cert)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("TERMINATING (2 level mappings)"), "{}", stdout(&out));
    let out = mcnp(&["check", path(&system), path(&cert)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("VALID"));
}

#[test]
fn every_corpus_certificate_checks() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(corpus("")).unwrap() {
        let system = entry.unwrap().path();
        if system.extension().is_none_or(|e| e != "mcs") {
            continue;
        }
        let cert = dir.path().join("c.json");
        let out = mcnp(&["prove", path(&system), "--cert", path(&cert)]);
        match out.status.code() {
            Some(0) => {
                let check = mcnp(&["check", path(&system), path(&cert)]);
                assert_eq!(check.status.code(), Some(0), "{}: {}", system.display(), stdout(&check));
            }
            Some(1) => {}
            other => panic!("{}: exit {other:?}", system.display()),
        }
    }
}

#[test]
fn nonterminating_system_exits_one() {
    let out = mcnp(&["prove", path(&corpus("nonterm.mcs"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("exhausted-pairs"), "{}", stdout(&out));
    let out = mcnp(&["--json", "prove", path(&corpus("nonterm.mcs"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "not-proved");
    assert_eq!(v["reason"], "exhausted-pairs");
}

#[test]
fn tampered_certificate_is_rejected_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.json");
    let system = corpus("pq_loops.mcs");
    assert_eq!(mcnp(&["prove", path(&system), "--cert", path(&cert)]).status.code(), Some(0));
    let mut c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    c["iterations"].as_array_mut().unwrap().pop();
    std::fs::write(&cert, c.to_string()).unwrap();
    let out = mcnp(&["--json", "check", path(&system), path(&cert)]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["reason"], "rules-remain");

    std::fs::write(&cert, "{\"version\": 1}").unwrap();
    let out = mcnp(&["--json", "check", path(&system), path(&cert)]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["reason"], "malformed");
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(mcnp(&["prove"]).status.code(), Some(2));
    assert_eq!(mcnp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mcnp(&["prove", "/nonexistent.mcs"]).status.code(), Some(2));
    let system = corpus("pq_loops.mcs");
    assert_eq!(mcnp(&["prove", path(&system), "--pairs", "minfoo"]).status.code(), Some(2));
    assert_eq!(mcnp(&["prove", path(&system), "--backend", "z3"]).status.code(), Some(2));
    assert_eq!(mcnp(&["export-dot", path(&system), "--rule", "g9"]).status.code(), Some(2));
    assert_eq!(mcnp(&["simulate", path(&system), "--from", "p(1)"]).status.code(), Some(2));
    let out = mcnp(&["--json", "prove", "/nonexistent.mcs"]);
    let v: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(v["status"], "error");
}

#[test]
fn options_are_honoured() {
    let system = corpus("pq_loops.mcs");
    let out = mcnp(&["prove", path(&system), "--pairs", "maxmin"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    for extra in [["--no-tags", "--parallel"], ["--seed", "7"], ["--timeout", "30"]] {
        let mut args = vec!["prove", path(&system)];
        args.extend(extra);
        assert_eq!(mcnp(&args).status.code(), Some(0), "{extra:?}");
    }
}

#[test]
fn simulate_and_export_dot_print_output() {
    let system = corpus("pq_loops.mcs");
    let out = mcnp(&["--json", "simulate", path(&system), "--from", "p(0,5,5)", "--steps", "10", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["start"], "p(0,5,5)");
    assert!(v["steps"].as_array().unwrap().len() <= 10);

    let out = mcnp(&["export-dot", path(&system)]);
    assert_eq!(out.status.code(), Some(0));
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph") && dot.contains("\"g1\""));
}

#[test]
fn external_backend_agrees() {
    let Some(solver) = mcnp_sat::backend::discover_external() else {
        eprintln!("no external solver found; skipping");
        return;
    };
    let backend = format!("dimacs:{}", solver.display());
    let out = mcnp(&["prove", path(&corpus("pq_loops.mcs")), "--backend", &backend]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let out = mcnp(&["prove", path(&corpus("nonterm.mcs")), "--backend", &backend]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
}
