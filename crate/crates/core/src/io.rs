//! The textual `.mcs` format, state literals, and DOT export.
//!
//! ```text
//! # comment
//! g1: p(x1,x2) :- y1>x1, x2>=y2; p(y1,y2).
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Atom, Mcs, ModelError, Rel, RuleDecl, Side, State, TransitionRule, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("variable {0} listed twice")]
    DuplicateVariable(String),
    #[error("variable {0} appears in both argument lists")]
    SharedVariable(String),
    #[error("variable {0} is not an argument of this rule")]
    UndeclaredVariable(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Turnstile,
    Colon,
    Equals,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Eof => "end of input".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Turnstile => "':-'".into(),
            Tok::Colon => "':'".into(),
            Tok::Equals => "'='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Ge => "'>='".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '.' => (Tok::Dot, 1),
            '=' => (Tok::Equals, 1),
            ':' if next == Some('-') => (Tok::Turnstile, 2),
            ':' => (Tok::Colon, 1),
            '>' if next == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            c if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let v = s.parse().map_err(|_| ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::Syntax(format!("integer {s} out of range")),
                })?;
                (Tok::Int(v), j - i)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::Syntax(format!("unexpected character {other:?}")),
                })
            }
        };
        out.push(Spanned { tok, line, col });
        i += len;
        col += len;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, kind: ParseErrorKind) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError { line, col, kind })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(ParseErrorKind::Syntax(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(ParseErrorKind::Syntax(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn comma_list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == close {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(out);
            }
        }
    }

    fn head(&mut self) -> Result<(String, Vec<(String, (usize, usize))>), ParseError> {
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let args = self.comma_list(Tok::RParen, |p| {
            let at = p.here();
            p.ident().map(|s| (s, at))
        })?;
        self.expect(Tok::RParen)?;
        Ok((name, args))
    }

    fn rule(&mut self) -> Result<(RuleDecl, (usize, usize)), ParseError> {
        let start = self.here();
        let label = match (self.peek(), self.peek2()) {
            (Tok::Ident(_), Tok::Colon | Tok::Equals) => {
                let l = self.ident()?;
                self.bump();
                Some(l)
            }
            _ => None,
        };
        let (source, src_args) = self.head()?;
        self.expect(Tok::Turnstile)?;
        let raw_atoms = self.comma_list(Tok::Semi, |p| {
            let at = p.here();
            let lhs = p.ident()?;
            let rel = match p.bump() {
                Tok::Gt => Rel::Gt,
                Tok::Ge => Rel::Ge,
                other => {
                    p.pos -= 1;
                    return p.err(ParseErrorKind::Syntax(format!("expected '>' or '>=', found {}", other.describe())));
                }
            };
            let rhs_at = p.here();
            let rhs = p.ident()?;
            Ok((lhs, at, rel, rhs, rhs_at))
        })?;
        self.expect(Tok::Semi)?;
        let (target, tgt_args) = self.head()?;
        self.expect(Tok::Dot)?;

        let mut scope: BTreeMap<&str, Var> = BTreeMap::new();
        for (side, args) in [(Side::Source, &src_args), (Side::Target, &tgt_args)] {
            for (i, (name, (line, col))) in args.iter().enumerate() {
                if let Some(prev) = scope.insert(name, Var { side, index: i }) {
                    let kind = if prev.side == side {
                        ParseErrorKind::DuplicateVariable(name.clone())
                    } else {
                        ParseErrorKind::SharedVariable(name.clone())
                    };
                    return Err(ParseError { line: *line, col: *col, kind });
                }
            }
        }
        let lookup = |name: &str, (line, col): (usize, usize)| {
            scope.get(name).copied().ok_or_else(|| ParseError {
                line,
                col,
                kind: ParseErrorKind::UndeclaredVariable(name.to_string()),
            })
        };
        let atoms = raw_atoms
            .iter()
            .map(|(l, lat, rel, r, rat)| Ok(Atom::new(lookup(l, *lat)?, *rel, lookup(r, *rat)?)))
            .collect::<Result<Vec<_>, ParseError>>()?;
        let decl = RuleDecl {
            id: label,
            source,
            src_names: src_args.into_iter().map(|a| a.0).collect(),
            target,
            tgt_names: tgt_args.into_iter().map(|a| a.0).collect(),
            atoms,
        };
        Ok((decl, start))
    }
}

/// Parses a system in the `.mcs` format. Point arities are inferred from
/// use and must agree across rules.
pub fn parse_mcs(text: &str) -> Result<Mcs, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut decls = Vec::new();
    let mut starts = Vec::new();
    while *p.peek() != Tok::Eof {
        let (d, at) = p.rule()?;
        decls.push(d);
        starts.push(at);
    }
    Mcs::build(decls).map_err(|e| {
        let rule = match &e {
            ModelError::ArityMismatch { rule, .. } | ModelError::DuplicateRule(rule) | ModelError::BadPosition { rule, .. } => {
                Some(rule.clone())
            }
            _ => None,
        };
        // Locate the offending rule: explicit label first, then default id.
        let at = rule
            .and_then(|id| {
                let labelled = text_rule_index(&id, &starts, text);
                labelled.or_else(|| id.strip_prefix('g').and_then(|n| n.parse::<usize>().ok()).map(|n| n.saturating_sub(1)))
            })
            .and_then(|i| starts.get(i).copied())
            .unwrap_or((1, 1));
        ParseError { line: at.0, col: at.1, kind: e.into() }
    })
}

fn text_rule_index(id: &str, starts: &[(usize, usize)], text: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    starts.iter().rposition(|&(line, col)| {
        lines
            .get(line - 1)
            .and_then(|l| l.get(col - 1..))
            .is_some_and(|rest| rest.strip_prefix(id).is_some_and(|r| r.trim_start().starts_with([':', '='])))
    })
}

/// Parses a state literal such as `p(0,5,-2)` against the points of `mcs`.
pub fn parse_state(mcs: &Mcs, text: &str) -> Result<State, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let name = p.ident()?;
    p.expect(Tok::LParen)?;
    let values = p.comma_list(Tok::RParen, |p| match p.bump() {
        Tok::Int(v) => Ok(v),
        other => {
            p.pos -= 1;
            p.err(ParseErrorKind::Syntax(format!("expected integer, found {}", other.describe())))
        }
    })?;
    p.expect(Tok::RParen)?;
    p.expect(Tok::Eof)?;
    let point = mcs
        .point_index(&name)
        .ok_or_else(|| ParseError { line: 1, col: 1, kind: ModelError::UnknownPoint(name.clone()).into() })?;
    let arity = mcs.points()[point].arity;
    if values.len() != arity {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ModelError::ArityMismatch { point: name, expected: arity, found: values.len(), rule: "<state>".into() }.into(),
        });
    }
    Ok(State { point, values })
}

pub fn render_state(mcs: &Mcs, s: &State) -> String {
    let vals: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
    format!("{}({})", mcs.points()[s.point].name, vals.join(","))
}

fn render_rule(mcs: &Mcs, r: &TransitionRule) -> String {
    let atoms: Vec<String> = r
        .atoms
        .iter()
        .map(|a| format!("{}{}{}", r.var_name(a.lhs), a.rel, r.var_name(a.rhs)))
        .collect();
    format!(
        "{}: {}({}) :- {}; {}({}).",
        r.id,
        mcs.points()[r.source].name,
        r.src_names.join(","),
        atoms.join(", "),
        mcs.points()[r.target].name,
        r.tgt_names.join(",")
    )
}

/// Canonical text of a system, one labelled rule per line.
pub fn render_mcs(mcs: &Mcs) -> String {
    let mut out = String::new();
    for r in mcs.rules() {
        out.push_str(&render_rule(mcs, r));
        out.push('\n');
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The control-flow multigraph: one vertex per point, one arc per rule.
pub fn export_dot(mcs: &Mcs) -> String {
    let mut out = String::from("digraph cfg {\n");
    for p in mcs.points() {
        writeln!(out, "  {} [label={}];", quote(&p.name), quote(&format!("{}/{}", p.name, p.arity))).unwrap();
    }
    for r in mcs.rules() {
        let (s, t) = (&mcs.points()[r.source].name, &mcs.points()[r.target].name);
        writeln!(out, "  {} -> {} [label={}];", quote(s), quote(t), quote(&r.id)).unwrap();
    }
    out.push_str("}\n");
    out
}

/// One rule as a graph over its positions: source row on top, target row
/// below, solid arcs for `>` and dashed arcs for `>=`.
pub fn export_rule_dot(mcs: &Mcs, r: &TransitionRule) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&r.id)).unwrap();
    for (side, names, point) in [
        (Side::Source, &r.src_names, r.source),
        (Side::Target, &r.tgt_names, r.target),
    ] {
        let tag = if side == Side::Source { "source" } else { "target" };
        writeln!(out, "  subgraph cluster_{tag} {{").unwrap();
        writeln!(out, "    label={};", quote(&format!("{}: {}", tag, mcs.points()[point].name))).unwrap();
        writeln!(out, "    rank=same;").unwrap();
        for n in names.iter() {
            writeln!(out, "    {};", quote(n)).unwrap();
        }
        out.push_str("  }\n");
    }
    for a in &r.atoms {
        let style = if a.rel == Rel::Gt { "solid" } else { "dashed" };
        writeln!(out, "  {} -> {} [style={style}];", quote(r.var_name(a.lhs)), quote(r.var_name(a.rhs))).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{AVERAGE, PQ_LOOPS};

    #[test]
    fn parses_worked_example() {
        let m = parse_mcs(PQ_LOOPS).unwrap();
        assert_eq!(m.points().len(), 2);
        assert_eq!(m.points()[0].arity, 3);
        assert_eq!(m.points()[1].arity, 2);
        let g1 = &m.rules()[0];
        assert_eq!(g1.id, "g1");
        assert_eq!(g1.atoms.len(), 5);
        assert_eq!(g1.atoms[0], Atom::new(Var::tgt(0), Rel::Gt, Var::src(0)));
    }

    #[test]
    fn unlabeled_rules_get_positional_ids() {
        let m = parse_mcs("p(x1,x2,x3) :- y1>x1, y2>=x1, x2>=y2, x2>=y3, x2>=x1; p(y1,y2,y3).").unwrap();
        assert_eq!(m.rules()[0].id, "g1");
        let a = parse_mcs(AVERAGE).unwrap();
        assert_eq!(a.rules().len(), 2);
        assert_eq!(a.points()[0].arity, 2);
    }

    #[test]
    fn grammar_edge_cases() {
        assert!(parse_mcs("p(x) :- x>y; q(y,z).").is_ok());
        let e = parse_mcs("p(x) :- x>w; p(y).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UndeclaredVariable("w".into()));
        assert_eq!((e.line, e.col), (1, 11));
        let e = parse_mcs("p(x,x) :- ; p(y,z).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateVariable("x".into()));
        let e = parse_mcs("p(x) :- ; p(x).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::SharedVariable("x".into()));
        let e = parse_mcs("p(x) :- ; p(y).\np(x,z) :- ; p(y).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Model(ModelError::ArityMismatch { .. })));
        assert_eq!(e.line, 2);
        let e = parse_mcs("p(x) :- x => y; p(y).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!((e.line, e.col), (1, 11));
    }

    #[test]
    fn labels_and_comments() {
        let m = parse_mcs("# loop\nstep: p(x) :- x>y; p(y). # trailing\nback = p(x) :- ; p(y).\n").unwrap();
        assert_eq!(m.rules()[0].id, "step");
        assert_eq!(m.rules()[1].id, "back");
        let e = parse_mcs("a: p(x) :- ; p(y).\na: p(x) :- ; p(y).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Model(ModelError::DuplicateRule("a".into())));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn render_round_trip() {
        for text in [PQ_LOOPS, AVERAGE] {
            let m = parse_mcs(text).unwrap();
            assert_eq!(parse_mcs(&render_mcs(&m)).unwrap(), m);
        }
    }

    #[test]
    fn dot_exports() {
        let m = parse_mcs(PQ_LOOPS).unwrap();
        let cfg = export_dot(&m);
        assert_eq!(cfg.matches(" -> ").count(), 4);
        assert!(cfg.contains("\"p\" [") && cfg.contains("\"q\" ["));
        let g1 = export_rule_dot(&m, &m.rules()[0]);
        assert!(g1.contains("\"y1\" -> \"x1\" [style=solid];"));
        assert!(g1.contains("\"x2\" -> \"y2\" [style=dashed];"));
    }

    #[test]
    fn state_literals() {
        let m = parse_mcs(PQ_LOOPS).unwrap();
        let s = parse_state(&m, "p(0,5,-5)").unwrap();
        assert_eq!(s, State { point: 0, values: vec![0, 5, -5] });
        assert_eq!(render_state(&m, &s), "p(0,5,-5)");
        assert!(parse_state(&m, "p(1,2)").is_err());
        assert!(parse_state(&m, "r(1)").is_err());
    }
}
