//! Monotonicity-constraint systems: program points, transition rules, the
//! entailment closure of a rule's constraint, and the control-flow graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type RuleId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("point {point} used with arity {found} in rule {rule}, previously {expected}")]
    ArityMismatch { point: String, expected: usize, found: usize, rule: RuleId },
    #[error("duplicate rule id {0}")]
    DuplicateRule(RuleId),
    #[error("duplicate program point {0}")]
    DuplicatePoint(String),
    #[error("rule {rule}: position {var} is out of range")]
    BadPosition { rule: RuleId, var: Var },
    #[error("unknown rule id {0}")]
    UnknownRule(RuleId),
    #[error("unknown program point {0}")]
    UnknownPoint(String),
}

/// Which state of a rule a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }
}

/// An argument position of a rule's source or target point (0-based index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub side: Side,
    pub index: usize,
}

impl Var {
    pub fn src(index: usize) -> Var {
        Var { side: Side::Source, index }
    }

    pub fn tgt(index: usize) -> Var {
        Var { side: Side::Target, index }
    }

    pub fn flip(self) -> Var {
        Var { side: self.side.flip(), index: self.index }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = if self.side == Side::Source { 'x' } else { 'y' };
        write!(f, "{c}{}", self.index + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Gt,
    Ge,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Gt => ">",
            Rel::Ge => ">=",
        })
    }
}

/// A single order atom `lhs rel rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub lhs: Var,
    pub rel: Rel,
    pub rhs: Var,
}

impl Atom {
    pub fn new(lhs: Var, rel: Rel, rhs: Var) -> Atom {
        Atom { lhs, rel, rhs }
    }

    pub fn holds(&self, value: impl Fn(Var) -> i64) -> bool {
        let (a, b) = (value(self.lhs), value(self.rhs));
        match self.rel {
            Rel::Gt => a > b,
            Rel::Ge => a >= b,
        }
    }
}

/// Strength of an entailed relation between two variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Strength {
    #[default]
    None,
    Ge,
    Gt,
}

/// Entailment closure of a conjunction of order atoms.
///
/// Variables are numbered source positions first, then target positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedConstraint {
    n_src: usize,
    n_tgt: usize,
    rel: Vec<Strength>,
    satisfiable: bool,
}

impl ClosedConstraint {
    pub fn close(n_src: usize, n_tgt: usize, atoms: &[Atom]) -> ClosedConstraint {
        let n = n_src + n_tgt;
        let mut rel = vec![Strength::None; n * n];
        for i in 0..n {
            rel[i * n + i] = Strength::Ge;
        }
        let flat = |v: Var| if v.side == Side::Source { v.index } else { n_src + v.index };
        for a in atoms {
            let s = if a.rel == Rel::Gt { Strength::Gt } else { Strength::Ge };
            let k = flat(a.lhs) * n + flat(a.rhs);
            rel[k] = rel[k].max(s);
        }
        for k in 0..n {
            for i in 0..n {
                let ik = rel[i * n + k];
                if ik == Strength::None {
                    continue;
                }
                for j in 0..n {
                    let kj = rel[k * n + j];
                    if kj == Strength::None {
                        continue;
                    }
                    let via = ik.max(kj);
                    if via > rel[i * n + j] {
                        rel[i * n + j] = via;
                    }
                }
            }
        }
        let satisfiable = (0..n).all(|i| rel[i * n + i] != Strength::Gt);
        if !satisfiable {
            // An inconsistent constraint entails every atom.
            rel.iter_mut().for_each(|r| *r = Strength::Gt);
        }
        ClosedConstraint { n_src, n_tgt, rel, satisfiable }
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn n_tgt(&self) -> usize {
        self.n_tgt
    }

    pub fn len(&self) -> usize {
        self.n_src + self.n_tgt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: Var) -> bool {
        match v.side {
            Side::Source => v.index < self.n_src,
            Side::Target => v.index < self.n_tgt,
        }
    }

    /// Flat index of a variable; panics when out of range.
    pub fn flat(&self, v: Var) -> usize {
        assert!(self.contains(v), "position {v} not in constraint");
        match v.side {
            Side::Source => v.index,
            Side::Target => self.n_src + v.index,
        }
    }

    pub fn var_at(&self, flat: usize) -> Var {
        if flat < self.n_src {
            Var::src(flat)
        } else {
            Var::tgt(flat - self.n_src)
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        (0..self.len()).map(|i| self.var_at(i))
    }

    pub fn strength(&self, a: Var, b: Var) -> Strength {
        let n = self.len();
        self.rel[self.flat(a) * n + self.flat(b)]
    }

    pub fn geq(&self, a: Var, b: Var) -> bool {
        self.strength(a, b) >= Strength::Ge
    }

    pub fn gt(&self, a: Var, b: Var) -> bool {
        self.strength(a, b) == Strength::Gt
    }

    pub fn is_satisfiable(&self) -> bool {
        self.satisfiable
    }

    /// Checked entailment query.
    pub fn entails(&self, a: Var, rel: Rel, b: Var) -> Result<bool, Var> {
        for v in [a, b] {
            if !self.contains(v) {
                return Err(v);
            }
        }
        Ok(match rel {
            Rel::Gt => self.gt(a, b),
            Rel::Ge => self.geq(a, b),
        })
    }

    /// The non-reflexive entailed atoms, strongest relation only.
    pub fn entailed_atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for a in self.vars() {
            for b in self.vars() {
                match self.strength(a, b) {
                    Strength::Gt => out.push(Atom::new(a, Rel::Gt, b)),
                    Strength::Ge if a != b => out.push(Atom::new(a, Rel::Ge, b)),
                    _ => {}
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgramPoint {
    pub name: String,
    pub arity: usize,
}

/// `source(src_vars) :- atoms; target(tgt_vars).` with endpoints given as
/// indices into the owning system's point table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRule {
    pub id: RuleId,
    pub source: usize,
    pub target: usize,
    pub src_names: Vec<String>,
    pub tgt_names: Vec<String>,
    pub atoms: Vec<Atom>,
    closure: ClosedConstraint,
}

impl TransitionRule {
    pub fn closure(&self) -> &ClosedConstraint {
        &self.closure
    }

    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }

    pub fn var_name(&self, v: Var) -> &str {
        match v.side {
            Side::Source => &self.src_names[v.index],
            Side::Target => &self.tgt_names[v.index],
        }
    }

    /// The rule with arcs inverted: source and target swap, and each atom
    /// `a rel b` becomes `b' rel a'` where `'` flips the side.
    pub fn transpose(&self) -> TransitionRule {
        let atoms: Vec<Atom> = self.atoms.iter().map(|a| Atom::new(a.rhs.flip(), a.rel, a.lhs.flip())).collect();
        TransitionRule {
            id: self.id.clone(),
            source: self.target,
            target: self.source,
            src_names: self.tgt_names.clone(),
            tgt_names: self.src_names.clone(),
            closure: ClosedConstraint::close(self.tgt_names.len(), self.src_names.len(), &atoms),
            atoms,
        }
    }
}

/// A rule description with point names, as produced by the parser or
/// generators; `Mcs::build` resolves and validates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub id: Option<RuleId>,
    pub source: String,
    pub src_names: Vec<String>,
    pub target: String,
    pub tgt_names: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl RuleDecl {
    /// A declaration with default variable names `x1..` and `y1..`.
    pub fn anonymous(id: Option<&str>, source: &str, n_src: usize, target: &str, n_tgt: usize, atoms: Vec<Atom>) -> RuleDecl {
        RuleDecl {
            id: id.map(str::to_string),
            source: source.to_string(),
            src_names: (1..=n_src).map(|i| format!("x{i}")).collect(),
            target: target.to_string(),
            tgt_names: (1..=n_tgt).map(|i| format!("y{i}")).collect(),
            atoms,
        }
    }
}

/// A monotonicity-constraint transition system. Sub-systems produced by
/// rule removal or SCC decomposition keep the full point table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mcs {
    points: Vec<ProgramPoint>,
    rules: Vec<TransitionRule>,
}

impl Mcs {
    /// Resolves declarations into a system. Points are created on first use
    /// in declaration order; rules without an id are named `g1`, `g2`, ... by
    /// their position.
    pub fn build(decls: Vec<RuleDecl>) -> Result<Mcs, ModelError> {
        Mcs::build_with_points(Vec::new(), decls)
    }

    pub fn build_with_points(points: Vec<ProgramPoint>, decls: Vec<RuleDecl>) -> Result<Mcs, ModelError> {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.name.clone(), i).is_some() {
                return Err(ModelError::DuplicatePoint(p.name.clone()));
            }
        }
        let mut mcs = Mcs { points, rules: Vec::with_capacity(decls.len()) };
        let mut ids = BTreeSet::new();
        for (pos, d) in decls.into_iter().enumerate() {
            let id = d.id.clone().unwrap_or_else(|| format!("g{}", pos + 1));
            if !ids.insert(id.clone()) {
                return Err(ModelError::DuplicateRule(id));
            }
            let mut endpoint = |name: &str, arity: usize| -> Result<usize, ModelError> {
                match index.get(name) {
                    Some(&i) if mcs.points[i].arity != arity => Err(ModelError::ArityMismatch {
                        point: name.to_string(),
                        expected: mcs.points[i].arity,
                        found: arity,
                        rule: id.clone(),
                    }),
                    Some(&i) => Ok(i),
                    None => {
                        mcs.points.push(ProgramPoint { name: name.to_string(), arity });
                        index.insert(name.to_string(), mcs.points.len() - 1);
                        Ok(mcs.points.len() - 1)
                    }
                }
            };
            let source = endpoint(&d.source, d.src_names.len())?;
            let target = endpoint(&d.target, d.tgt_names.len())?;
            let (ns, nt) = (d.src_names.len(), d.tgt_names.len());
            for a in &d.atoms {
                for v in [a.lhs, a.rhs] {
                    let ok = match v.side {
                        Side::Source => v.index < ns,
                        Side::Target => v.index < nt,
                    };
                    if !ok {
                        return Err(ModelError::BadPosition { rule: id, var: v });
                    }
                }
            }
            let closure = ClosedConstraint::close(ns, nt, &d.atoms);
            mcs.rules.push(TransitionRule {
                id,
                source,
                target,
                src_names: d.src_names,
                tgt_names: d.tgt_names,
                atoms: d.atoms,
                closure,
            });
        }
        Ok(mcs)
    }

    pub fn points(&self) -> &[ProgramPoint] {
        &self.points
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.rules
    }

    pub fn point_index(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p.name == name)
    }

    pub fn rule(&self, id: &str) -> Option<&TransitionRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn rule_ids(&self) -> BTreeSet<RuleId> {
        self.rules.iter().map(|r| r.id.clone()).collect()
    }

    /// Sum of all arities; tagged values are `M * x + tag` with tags below it.
    pub fn tag_modulus(&self) -> usize {
        self.points.iter().map(|p| p.arity).sum()
    }

    /// Points that are an endpoint of some rule.
    pub fn active_points(&self) -> BTreeSet<usize> {
        self.rules.iter().flat_map(|r| [r.source, r.target]).collect()
    }

    /// Control-flow arcs, one per rule.
    pub fn cfg_arcs(&self) -> Vec<(usize, usize)> {
        self.rules.iter().map(|r| (r.source, r.target)).collect()
    }

    fn with_rules(&self, rules: Vec<TransitionRule>) -> Mcs {
        Mcs { points: self.points.clone(), rules }
    }

    pub fn remove_rules<'a, I>(&self, ids: I) -> Result<Mcs, ModelError>
    where
        I: IntoIterator<Item = &'a RuleId>,
    {
        let drop: BTreeSet<&RuleId> = ids.into_iter().collect();
        for id in &drop {
            if self.rule(id).is_none() {
                return Err(ModelError::UnknownRule((*id).clone()));
            }
        }
        Ok(self.with_rules(self.rules.iter().filter(|r| !drop.contains(&r.id)).cloned().collect()))
    }

    pub fn retain_rules(&self, keep: impl Fn(&TransitionRule) -> bool) -> Mcs {
        self.with_rules(self.rules.iter().filter(|r| keep(r)).cloned().collect())
    }

    /// Splits off rules whose constraint has no solution; returns the
    /// remaining system and the ids of the dropped rules.
    pub fn drop_unsatisfiable(&self) -> (Mcs, Vec<RuleId>) {
        let dropped = self.rules.iter().filter(|r| !r.closure.is_satisfiable()).map(|r| r.id.clone()).collect();
        (self.retain_rules(|r| r.closure.is_satisfiable()), dropped)
    }

    /// Non-vacant SCCs of the control-flow graph, each restricted to its
    /// internal rules. Components are listed in reverse topological order.
    pub fn scc_decompose(&self) -> Vec<Mcs> {
        let comp = self.point_components();
        let mut groups: BTreeMap<usize, Vec<TransitionRule>> = BTreeMap::new();
        for r in &self.rules {
            if comp[r.source] == comp[r.target] {
                groups.entry(comp[r.source]).or_default().push(r.clone());
            }
        }
        groups.into_values().map(|rules| self.with_rules(rules)).collect()
    }

    /// Rules that lie on some cycle of the control-flow graph.
    pub fn cyclic_rules(&self) -> Mcs {
        let comp = self.point_components();
        self.retain_rules(|r| comp[r.source] == comp[r.target])
    }

    /// Component number of every point, numbered in Tarjan completion order
    /// (sinks first).
    pub fn point_components(&self) -> Vec<usize> {
        let mut succ = vec![Vec::new(); self.points.len()];
        for r in &self.rules {
            succ[r.source].push(r.target);
        }
        tarjan(&succ)
    }
}

/// Tarjan's algorithm (iterative). Returns the component index of every
/// vertex; components are numbered in the order they complete, which is a
/// reverse topological order of the condensation.
pub fn tarjan(succ: &[Vec<usize>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if let Some(&w) = succ[v].get(top.1) {
                top.1 += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// A concrete program state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub point: usize,
    pub values: Vec<i64>,
}

/// One transition of a run: the rule taken and the state reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub rule: RuleId,
    pub to: State,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub start: State,
    pub steps: Vec<Step>,
}

impl Run {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Consecutive `(from, rule, to)` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (&State, &RuleId, &State)> {
        let froms = std::iter::once(&self.start).chain(self.steps.iter().map(|s| &s.to));
        froms.zip(self.steps.iter()).map(|(from, s)| (from, &s.rule, &s.to))
    }
}

/// Whether `rule` can take `from` to `to` under its constraint.
pub fn step_satisfies(rule: &TransitionRule, from: &State, to: &State) -> bool {
    from.point == rule.source
        && to.point == rule.target
        && from.values.len() == rule.src_names.len()
        && to.values.len() == rule.tgt_names.len()
        && rule.atoms.iter().all(|a| {
            a.holds(|v| match v.side {
                Side::Source => from.values[v.index],
                Side::Target => to.values[v.index],
            })
        })
}
