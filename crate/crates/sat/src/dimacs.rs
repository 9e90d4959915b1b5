//! DIMACS CNF text and the competition-style solver output protocol.

use std::fmt::Write as _;

use crate::backend::{SatError, SatResult};
use crate::cnf::{Cnf, Lit};

/// Renders `cnf` as DIMACS: a `p cnf V C` header and one zero-terminated
/// clause per line.
pub fn emit_dimacs(cnf: &Cnf) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", cnf.num_vars(), cnf.clauses().len()).unwrap();
    for clause in cnf.clauses() {
        for l in clause {
            write!(out, "{} ", l.dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

/// Parses DIMACS CNF text. Comment lines (`c ...`) are skipped.
pub fn parse_dimacs(text: &str) -> Result<Cnf, SatError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 || fields[0] != "cnf" {
                return Err(SatError::Protocol(format!("line {}: bad header", lineno + 1)));
            }
            let v = fields[1].parse().map_err(|_| SatError::Protocol(format!("line {}: bad variable count", lineno + 1)))?;
            let c = fields[2].parse().map_err(|_| SatError::Protocol(format!("line {}: bad clause count", lineno + 1)))?;
            header = Some((v, c));
            continue;
        }
        let (nv, _) = header.ok_or_else(|| SatError::Protocol("clause before header".into()))?;
        for tok in line.split_whitespace() {
            let x: i32 = tok
                .parse()
                .map_err(|_| SatError::Protocol(format!("line {}: bad literal {tok:?}", lineno + 1)))?;
            if x == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                if x.unsigned_abs() > nv {
                    return Err(SatError::Protocol(format!("line {}: literal {x} exceeds header", lineno + 1)));
                }
                current.push(Lit::from_dimacs(x));
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let (nv, nc) = header.ok_or_else(|| SatError::Protocol("missing header".into()))?;
    if nc != clauses.len() {
        return Err(SatError::Protocol(format!("header announces {nc} clauses, found {}", clauses.len())));
    }
    Ok(Cnf::from_clauses(nv, clauses))
}

/// Parses solver output in the `s SATISFIABLE` / `v ...` convention.
///
/// Several `v` lines may carry the model; variables the solver does not
/// mention default to false. Comment lines are ignored.
pub fn parse_solver_output(text: &str, num_vars: u32) -> Result<SatResult, SatError> {
    let mut status: Option<bool> = None;
    let mut model = vec![false; num_vars as usize];
    let mut terminated = false;
    for line in text.lines() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            status = match s.trim() {
                "SATISFIABLE" => Some(true),
                "UNSATISFIABLE" => Some(false),
                other => return Err(SatError::Protocol(format!("unknown status {other:?}"))),
            };
        } else if let Some(vals) = line.strip_prefix('v') {
            for tok in vals.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| SatError::Protocol(format!("bad model literal {tok:?}")))?;
                if x == 0 {
                    terminated = true;
                    continue;
                }
                let v = x.unsigned_abs() as usize;
                if v > num_vars as usize {
                    return Err(SatError::Protocol(format!("model literal {x} out of range")));
                }
                model[v - 1] = x > 0;
            }
        }
    }
    match status {
        Some(true) => {
            if !terminated && num_vars > 0 && !text.lines().any(|l| l.trim_start().starts_with('v')) {
                return Err(SatError::Protocol("SATISFIABLE without model lines".into()));
            }
            Ok(SatResult::Sat(model))
        }
        Some(false) => Ok(SatResult::Unsat),
        None => Err(SatError::Protocol("no status line".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        let cnf = Cnf::from_clauses(2, vec![vec![Lit::from_dimacs(1), Lit::from_dimacs(-2)], vec![Lit::from_dimacs(2)]]);
        let text = emit_dimacs(&cnf);
        assert_eq!(text.lines().next(), Some("p cnf 2 2"));
        assert_eq!(text, "p cnf 2 2\n1 -2 0\n2 0\n");
    }

    #[test]
    fn emit_parse_roundtrip() {
        let mut cnf = Cnf::new();
        let a = cnf.new_var().pos();
        let b = cnf.new_var().pos();
        let g = cnf.and2(a, !b);
        cnf.assert_lit(g);
        let back = parse_dimacs(&emit_dimacs(&cnf)).unwrap();
        assert_eq!(back.num_vars(), cnf.num_vars());
        assert_eq!(back.clauses(), cnf.clauses());
    }

    #[test]
    fn unsat_status() {
        assert_eq!(parse_solver_output("c hi\ns UNSATISFIABLE\n", 3).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn multiple_v_lines() {
        let out = "s SATISFIABLE\nv 1 -2\nv 3 0\n";
        assert_eq!(parse_solver_output(out, 3).unwrap(), SatResult::Sat(vec![true, false, true]));
    }

    #[test]
    fn malformed_output() {
        assert!(matches!(parse_solver_output("", 1), Err(SatError::Protocol(_))));
        assert!(matches!(parse_solver_output("s MAYBE\n", 1), Err(SatError::Protocol(_))));
        assert!(matches!(parse_solver_output("s SATISFIABLE\nv 9 0\n", 2), Err(SatError::Protocol(_))));
        assert!(matches!(parse_solver_output("s SATISFIABLE\n", 2), Err(SatError::Protocol(_))));
    }

    #[test]
    fn dimacs_errors() {
        assert!(parse_dimacs("1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 1 1\n2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 0\n").is_err());
    }
}
