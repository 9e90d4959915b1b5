//! Brute-force ground truth: valuation enumeration for entailment and order
//! relations, cycle enumeration for anchors, a semantic certificate checker,
//! a concrete run simulator, and random instance generators.
//!
//! Order constraints only see the relative order of values, so instead of
//! every valuation in `{0..k}^V` the enumeration visits one representative
//! per weak ordering of the variables with at most `k + 1` levels: the dense
//! rank vector, which itself lies in `{0..k}^V`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::{input_digest, resolve, Certificate, ReasonCode, ResolvedIteration};
use crate::levelmap::{bounded, orient, phi_eval, LevelMapping, Orientation, PointSets, TaggedArg};
use crate::model::{step_satisfies, Atom, Mcs, Rel, RuleDecl, RuleId, Run, Side, State, Step, TransitionRule, Var};
use crate::orders::{
    difference, in_wf_subset, strictly_greater, weakly_greater, IntMultiset, OrderPair, OrderType, Tagged,
};

fn slot(rule: &TransitionRule, v: Var) -> usize {
    match v.side {
        Side::Source => v.index,
        Side::Target => rule.src_names.len() + v.index,
    }
}

fn n_vars(rule: &TransitionRule) -> usize {
    rule.src_names.len() + rule.tgt_names.len()
}

/// Visits every satisfying valuation of `rule` (one per weak ordering with at
/// most `k + 1` levels), indexed sources first then targets. Stops when
/// `visit` returns false; the result says whether the enumeration completed.
pub fn for_each_model(rule: &TransitionRule, k: usize, mut visit: impl FnMut(&[i64]) -> bool) -> bool {
    let n = n_vars(rule);
    // Atoms are checked as soon as their later variable is placed.
    let mut checks: Vec<Vec<(usize, usize, Rel)>> = vec![Vec::new(); n];
    for a in &rule.atoms {
        let (l, r) = (slot(rule, a.lhs), slot(rule, a.rhs));
        checks[l.max(r)].push((l, r, a.rel));
    }
    let mut ranks = Vec::with_capacity(n);
    place(0, 0, k + 1, &checks, &mut ranks, &mut visit)
}

fn place(
    i: usize,
    blocks: usize,
    max_blocks: usize,
    checks: &[Vec<(usize, usize, Rel)>],
    ranks: &mut Vec<usize>,
    visit: &mut impl FnMut(&[i64]) -> bool,
) -> bool {
    if i == checks.len() {
        let vals: Vec<i64> = ranks.iter().map(|&r| r as i64).collect();
        return visit(&vals);
    }
    let ok = |ranks: &[usize]| {
        checks[i].iter().all(|&(l, r, rel)| match rel {
            Rel::Gt => ranks[l] > ranks[r],
            Rel::Ge => ranks[l] >= ranks[r],
        })
    };
    for j in 0..blocks {
        ranks.push(j);
        if ok(ranks) && !place(i + 1, blocks, max_blocks, checks, ranks, visit) {
            return false;
        }
        ranks.pop();
    }
    if blocks < max_blocks {
        for j in 0..=blocks {
            ranks.iter_mut().filter(|r| **r >= j).for_each(|r| *r += 1);
            ranks.push(j);
            if ok(ranks) && !place(i + 1, blocks + 1, max_blocks, checks, ranks, visit) {
                return false;
            }
            ranks.pop();
            ranks.iter_mut().filter(|r| **r > j).for_each(|r| *r -= 1);
        }
    }
    true
}

/// All satisfying valuations up to order isomorphism.
pub fn models(rule: &TransitionRule) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for_each_model(rule, n_vars(rule).saturating_sub(1), |v| {
        out.push(v.to_vec());
        true
    });
    out
}

/// Whether every valuation in `{0..k}` satisfying the rule satisfies `a rel b`.
pub fn semantic_entails(rule: &TransitionRule, a: Var, rel: Rel, b: Var, k: usize) -> bool {
    let atom = Atom::new(a, rel, b);
    let (sa, sb) = (slot(rule, a), slot(rule, b));
    for_each_model(rule, k, |v| atom.holds(|x| if x == a { v[sa] } else if x == b { v[sb] } else { unreachable!() }))
}

/// Values `modulus * x + tag` of a tagged set under a valuation.
pub fn tagged_values(rule: &TransitionRule, vals: &[i64], set: &[Tagged], modulus: usize) -> IntMultiset {
    set.iter().map(|t| modulus as i64 * vals[slot(rule, t.var)] + t.tag as i64).collect()
}

/// Whether `s ≿ t` (or `s ≻ t`) under `order` for every satisfying valuation.
pub fn semantic_order(rule: &TransitionRule, order: OrderType, s: &[Tagged], t: &[Tagged], strict: bool, modulus: usize) -> bool {
    for_each_model(rule, n_vars(rule).saturating_sub(1), |v| {
        let (sv, tv) = (tagged_values(rule, v, s, modulus), tagged_values(rule, v, t, modulus));
        if strict {
            strictly_greater(order, &sv, &tv)
        } else {
            weakly_greater(order, &sv, &tv)
        }
    })
}

/// Whether `high − low` lies in the well-founded subset for every satisfying
/// valuation. Empty operands count as unbounded.
pub fn semantic_bounded_sets(rule: &TransitionRule, pair: OrderPair, low: &[Tagged], high: &[Tagged], modulus: usize) -> bool {
    if low.is_empty() || high.is_empty() {
        return false;
    }
    for_each_model(rule, n_vars(rule).saturating_sub(1), |v| {
        let (l, h) = (tagged_values(rule, v, low, modulus), tagged_values(rule, v, high, modulus));
        let d = difference(pair.low(), pair.high(), &l, &h).expect("compatible pair, non-empty operands");
        in_wf_subset(d.order, &d.multiset)
    })
}

fn sets_on(f: &LevelMapping, point: usize, side: Side) -> (Vec<Tagged>, Vec<Tagged>) {
    let conv = |v: &[TaggedArg]| v.iter().map(|a| Tagged::new(Var { side, index: a.index }, a.tag)).collect();
    (conv(f.low(point)), conv(f.high(point)))
}

/// Orientation decided over all satisfying valuations.
pub fn semantic_orient(f: &LevelMapping, g: &TransitionRule, modulus: usize) -> Orientation {
    let (p_low, p_high) = sets_on(f, g.source, Side::Source);
    let (q_low, q_high) = sets_on(f, g.target, Side::Target);
    let (lo, hi) = (f.pair.low(), f.pair.high());
    let weak = semantic_order(g, hi, &p_high, &q_high, false, modulus) && semantic_order(g, lo, &q_low, &p_low, false, modulus);
    if !weak {
        Orientation::NotOriented
    } else if semantic_order(g, hi, &p_high, &q_high, true, modulus) || semantic_order(g, lo, &q_low, &p_low, true, modulus) {
        Orientation::Strict
    } else {
        Orientation::Weak
    }
}

pub fn semantic_bounded(f: &LevelMapping, g: &TransitionRule, modulus: usize) -> bool {
    let (low, high) = sets_on(f, g.source, Side::Source);
    semantic_bounded_sets(g, f.pair, &low, &high, modulus)
}

/// Multiset order read as lexicographic comparison of sorted tuples, where
/// a proper prefix is smaller: non-increasing tuples for `ms`, and
/// non-decreasing tuples with the prefix larger for `dms`.
pub fn lexicographic_greater(order: OrderType, s: &[i64], t: &[i64]) -> bool {
    let (mut s, mut t) = (s.to_vec(), t.to_vec());
    match order {
        OrderType::Ms => {
            s.sort_unstable_by(|a, b| b.cmp(a));
            t.sort_unstable_by(|a, b| b.cmp(a));
            s > t
        }
        OrderType::Dms => {
            s.sort_unstable();
            t.sort_unstable();
            for (a, b) in s.iter().zip(&t) {
                if a != b {
                    return a > b;
                }
            }
            s.len() < t.len()
        }
        _ => panic!("lexicographic reading exists for ms and dms only"),
    }
}

/// Component label of every node (the smallest node it is mutually
/// reachable with), from plain reachability.
pub fn brute_force_components(n: usize, arcs: &[(usize, usize)]) -> Vec<usize> {
    let mut reach = vec![vec![false; n]; n];
    for (u, row) in reach.iter_mut().enumerate() {
        row[u] = true;
    }
    for &(u, v) in arcs {
        reach[u][v] = true;
    }
    for w in 0..n {
        for u in 0..n {
            if reach[u][w] {
                for v in 0..n {
                    if reach[w][v] {
                        reach[u][v] = true;
                    }
                }
            }
        }
    }
    (0..n).map(|u| (0..n).find(|&v| reach[u][v] && reach[v][u]).expect("u reaches itself")).collect()
}

/// Rules lying on a cycle, grouped by component; each group sorted.
pub fn brute_force_sccs(mcs: &Mcs) -> BTreeSet<BTreeSet<RuleId>> {
    let comp = brute_force_components(mcs.points().len(), &mcs.cfg_arcs());
    let mut groups: BTreeMap<usize, BTreeSet<RuleId>> = BTreeMap::new();
    for r in mcs.rules() {
        if comp[r.source] == comp[r.target] {
            groups.entry(comp[r.source]).or_default().insert(r.id.clone());
        }
    }
    groups.into_values().collect()
}

/// Rules `g` such that every simple cycle through `g` uses a rule of
/// `strict` and a rule of `bounded`, by enumerating the cycles.
pub fn brute_force_anchors(scc: &Mcs, strict: &BTreeSet<RuleId>, bounded: &BTreeSet<RuleId>) -> BTreeSet<RuleId> {
    fn paths(
        scc: &Mcs,
        at: usize,
        goal: usize,
        visited: &mut Vec<bool>,
        path: &mut Vec<usize>,
        every: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if at == goal {
            return every(path);
        }
        for (i, r) in scc.rules().iter().enumerate() {
            if r.source == at && !visited[r.target] {
                visited[r.target] = true;
                path.push(i);
                let go_on = paths(scc, r.target, goal, visited, path, every);
                path.pop();
                visited[r.target] = false;
                if !go_on {
                    return false;
                }
            }
        }
        true
    }
    let rules = scc.rules();
    rules
        .iter()
        .filter(|g| {
            let mut visited = vec![false; scc.points().len()];
            visited[g.target] = true;
            let mut path = Vec::new();
            paths(scc, g.target, g.source, &mut visited, &mut path, &mut |p| {
                let cycle = || p.iter().map(|&i| &rules[i].id).chain(std::iter::once(&g.id));
                cycle().any(|id| strict.contains(id)) && cycle().any(|id| bounded.contains(id))
            })
        })
        .map(|g| g.id.clone())
        .collect()
}

/// A semantic verification failure: reason and 0-based iteration.
pub type SemanticFailure = (ReasonCode, Option<usize>);

/// Replays a certificate with every syntactic decision replaced by
/// valuation enumeration and every graph decision by brute force. Checks
/// run in the same order as [`crate::certificate::verify`].
pub fn semantic_verify(mcs: &Mcs, cert: &Certificate) -> Result<(), SemanticFailure> {
    if cert.version != crate::certificate::CERT_VERSION {
        return Err((ReasonCode::Malformed, None));
    }
    if cert.input_digest != input_digest(mcs) {
        return Err((ReasonCode::DigestMismatch, None));
    }
    let modulus = mcs.tag_modulus();
    let cyclic = |m: &Mcs| {
        let keep: BTreeSet<RuleId> = brute_force_sccs(m).into_iter().flatten().collect();
        m.retain_rules(|r| keep.contains(&r.id))
    };
    let mut remaining = cyclic(&mcs.retain_rules(|r| !models(r).is_empty()));
    for (k, it) in cert.iterations.iter().enumerate() {
        let r: ResolvedIteration = resolve(mcs, k, it).map_err(|e| (e.code, Some(k)))?;
        let fail = |code| Err((code, Some(k)));
        if !brute_force_sccs(&remaining).contains(&r.scc) {
            return fail(ReasonCode::SccMismatch);
        }
        let scc = remaining.retain_rules(|g| r.scc.contains(&g.id));
        for g in scc.rules() {
            for p in [g.source, g.target] {
                if r.mapping.low(p).is_empty() || r.mapping.high(p).is_empty() {
                    return fail(ReasonCode::EmptySet);
                }
            }
        }
        let mut strict = BTreeSet::new();
        for g in scc.rules() {
            match semantic_orient(&r.mapping, g, modulus) {
                Orientation::NotOriented => return fail(ReasonCode::NotOriented),
                Orientation::Strict => {
                    strict.insert(g.id.clone());
                }
                Orientation::Weak => {}
            }
        }
        if !r.strict.is_subset(&strict) {
            return fail(ReasonCode::StrictClaimFails);
        }
        if r.bounded.iter().any(|g| scc.rule(g).is_none_or(|rule| !semantic_bounded(&r.mapping, rule, modulus))) {
            return fail(ReasonCode::BoundClaimFails);
        }
        if r.anchors.is_empty() || !r.anchors.is_subset(&brute_force_anchors(&scc, &r.strict, &r.bounded)) {
            return fail(ReasonCode::AnchorClaimFails);
        }
        remaining = cyclic(&remaining.retain_rules(|g| !r.anchors.contains(&g.id)));
    }
    if remaining.rules().is_empty() {
        Ok(())
    } else {
        Err((ReasonCode::RulesRemain, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrfFailure {
    WeakDescent,
    StrictDescent,
    NotWellFounded,
    EmptySet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrfViolation {
    /// 0-based index of the run step.
    pub step: usize,
    pub rule: RuleId,
    /// 0-based certificate iteration whose mapping failed.
    pub iteration: usize,
    pub failure: IrfFailure,
}

/// Evaluates every certificate mapping along a concrete run. For each step
/// by rule `g` and each iteration whose component contains `g`: the ranking
/// value must not increase, must decrease if `g` is claimed strict, and
/// must lie in the well-founded subset at the source if `g` is claimed
/// bounded.
pub fn check_irf_on_run(mcs: &Mcs, cert: &Certificate, run: &Run) -> Result<(), IrfViolation> {
    let resolved: Vec<ResolvedIteration> = cert
        .iterations
        .iter()
        .enumerate()
        .map(|(k, it)| resolve(mcs, k, it).expect("certificate resolves against its system"))
        .collect();
    for (step, (from, rule, to)) in run.transitions().enumerate() {
        for (iteration, r) in resolved.iter().enumerate().filter(|(_, r)| r.scc.contains(rule)) {
            let fail = |failure| Err(IrfViolation { step, rule: rule.clone(), iteration, failure });
            let (Ok(a), Ok(b)) = (phi_eval(mcs, &r.mapping, from), phi_eval(mcs, &r.mapping, to)) else {
                return fail(IrfFailure::EmptySet);
            };
            if !weakly_greater(a.order, &a.multiset, &b.multiset) {
                return fail(IrfFailure::WeakDescent);
            }
            if r.strict.contains(rule) && !strictly_greater(a.order, &a.multiset, &b.multiset) {
                return fail(IrfFailure::StrictDescent);
            }
            if r.bounded.contains(rule) && !in_wf_subset(a.order, &a.multiset) {
                return fail(IrfFailure::NotWellFounded);
            }
        }
    }
    Ok(())
}

/// Samples a target valuation for `rule` from source values, or `None` when
/// the rule cannot fire. Constraints are difference constraints
/// `a − b ≥ w`; bounds come from shortest paths through a zero node, and
/// targets are fixed one at a time inside their feasible interval.
pub fn sample_target<R: Rng>(rule: &TransitionRule, from: &[i64], rng: &mut R) -> Option<Vec<i64>> {
    const SPREAD: i64 = 6;
    let (ns, nt) = (rule.src_names.len(), rule.tgt_names.len());
    let n = 1 + ns + nt;
    let node = |v: Var| 1 + slot(rule, v);
    // d[u][v]: upper bound on value(v) − value(u).
    let mut d = vec![vec![None::<i64>; n]; n];
    let tighten = |d: &mut Vec<Vec<Option<i64>>>, u: usize, v: usize, w: i64| {
        if d[u][v].is_none_or(|old| w < old) {
            d[u][v] = Some(w);
        }
    };
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = Some(0);
    }
    for (i, &c) in from.iter().enumerate() {
        tighten(&mut d, 0, 1 + i, c);
        tighten(&mut d, 1 + i, 0, -c);
    }
    for a in &rule.atoms {
        let w = if a.rel == Rel::Gt { 1 } else { 0 };
        tighten(&mut d, node(a.lhs), node(a.rhs), -w);
    }
    let close = |d: &mut Vec<Vec<Option<i64>>>| -> bool {
        for k in 0..n {
            for u in 0..n {
                let Some(uk) = d[u][k] else { continue };
                for v in 0..n {
                    if let Some(kv) = d[k][v] {
                        if d[u][v].is_none_or(|old| uk + kv < old) {
                            d[u][v] = Some(uk + kv);
                        }
                    }
                }
            }
        }
        (0..n).all(|u| d[u][u].is_none_or(|x| x >= 0))
    };
    if !close(&mut d) {
        return None;
    }
    let base = if from.is_empty() { 0 } else { from.iter().sum::<i64>() / from.len() as i64 };
    let mut order: Vec<usize> = (0..nt).collect();
    order.shuffle(rng);
    let mut out = vec![0; nt];
    for j in order {
        let t = 1 + ns + j;
        let lo = d[t][0].map(|x| -x);
        let hi = d[0][t];
        let value = match (lo, hi) {
            (Some(l), Some(h)) => rng.gen_range(l..=h),
            (Some(l), None) => l + rng.gen_range(0..=SPREAD),
            (None, Some(h)) => h - rng.gen_range(0..=SPREAD),
            (None, None) => base + rng.gen_range(-SPREAD..=SPREAD),
        };
        out[j] = value;
        tighten(&mut d, 0, t, value);
        tighten(&mut d, t, 0, -value);
        let feasible = close(&mut d);
        debug_assert!(feasible, "a value inside the feasible interval keeps the system feasible");
    }
    Some(out)
}

/// A random run from `initial`: each step picks uniformly among the rules
/// that can fire and samples a target state for it.
pub fn simulate_run(mcs: &Mcs, initial: State, max_len: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = Run { start: initial.clone(), steps: Vec::new() };
    let mut cur = initial;
    while run.steps.len() < max_len {
        let options: Vec<(&TransitionRule, Vec<i64>)> = mcs
            .rules()
            .iter()
            .filter(|r| r.source == cur.point && r.src_names.len() == cur.values.len())
            .filter_map(|r| sample_target(r, &cur.values, &mut rng).map(|t| (r, t)))
            .collect();
        let Some((rule, values)) = options.choose(&mut rng) else { break };
        let next = State { point: rule.target, values: values.clone() };
        assert!(step_satisfies(rule, &cur, &next), "sampled step violates rule {}", rule.id);
        run.steps.push(Step { rule: rule.id.clone(), to: next.clone() });
        cur = next;
    }
    run
}

/// A random state at `point` with values in `-range..=range`.
pub fn random_state<R: Rng>(mcs: &Mcs, point: usize, range: i64, rng: &mut R) -> State {
    let values = (0..mcs.points()[point].arity).map(|_| rng.gen_range(-range..=range)).collect();
    State { point, values }
}

fn random_atoms<R: Rng>(rng: &mut R, n_src: usize, n_tgt: usize, count: usize) -> Vec<Atom> {
    let vars: Vec<Var> = (0..n_src).map(Var::src).chain((0..n_tgt).map(Var::tgt)).collect();
    if vars.len() < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let a = *vars.choose(rng).expect("non-empty");
            let b = loop {
                let b = *vars.choose(rng).expect("non-empty");
                if b != a {
                    break b;
                }
            };
            Atom::new(a, if rng.gen_bool(0.5) { Rel::Gt } else { Rel::Ge }, b)
        })
        .collect()
}

/// A single random rule `p → q` with `1..=max_arity` positions per side and
/// up to `max_atoms` atoms.
pub fn random_rule<R: Rng>(rng: &mut R, max_arity: usize, max_atoms: usize) -> TransitionRule {
    let (ns, nt) = (rng.gen_range(1..=max_arity), rng.gen_range(1..=max_arity));
    let count = rng.gen_range(0..=max_atoms);
    let atoms = random_atoms(rng, ns, nt, count);
    let mcs = Mcs::build(vec![RuleDecl::anonymous(None, "p", ns, "q", nt, atoms)]).expect("well-formed rule");
    mcs.rules()[0].clone()
}

/// A random tagged set over the variables of `rule`.
pub fn random_tagged_set<R: Rng>(rng: &mut R, rule: &TransitionRule, max_len: usize, modulus: usize) -> Vec<Tagged> {
    let mut vars: Vec<Var> = (0..rule.src_names.len()).map(Var::src).chain((0..rule.tgt_names.len()).map(Var::tgt)).collect();
    vars.shuffle(rng);
    let len = rng.gen_range(0..=max_len.min(vars.len()));
    vars[..len].iter().map(|&v| Tagged::new(v, rng.gen_range(0..modulus.max(1)) as u32)).collect()
}

/// A random system over `n_points` points with arities in `1..=max_arity`.
pub fn random_mcs<R: Rng>(rng: &mut R, n_points: usize, n_rules: usize, max_arity: usize, max_atoms: usize) -> Mcs {
    let arity: Vec<usize> = (0..n_points).map(|_| rng.gen_range(1..=max_arity)).collect();
    let decls = (0..n_rules)
        .map(|_| {
            let (p, q) = (rng.gen_range(0..n_points), rng.gen_range(0..n_points));
            let count = rng.gen_range(0..=max_atoms);
            let atoms = random_atoms(rng, arity[p], arity[q], count);
            RuleDecl::anonymous(None, &format!("p{p}"), arity[p], &format!("p{q}"), arity[q], atoms)
        })
        .collect();
    Mcs::build(decls).expect("generated system is well-formed")
}

pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect()
}

/// Atoms making `s ≻ t` (or `s ≿ t` when `strict` is false) hold under
/// `order` whatever the rest of the constraint says. Weak witnesses fall
/// back to `>` when the tags would break a `≥`.
fn order_witness(order: OrderType, s: &[Tagged], t: &[Tagged], strict: bool) -> Vec<Atom> {
    // A coverer with several weak assignments is not an ms covering.
    let strict = strict || matches!(order, OrderType::Ms | OrderType::Dms);
    let rel = |a: Tagged, b: Tagged| {
        if !strict && a.tag >= b.tag {
            (a.var != b.var).then_some(Atom::new(a.var, Rel::Ge, b.var))
        } else {
            Some(Atom::new(a.var, Rel::Gt, b.var))
        }
    };
    match order {
        // One element of s dominates all of t.
        OrderType::Max | OrderType::Ms => t.iter().filter_map(|&b| rel(s[0], b)).collect(),
        // Every element of s dominates one element of t.
        OrderType::Min | OrderType::Dms => s.iter().filter_map(|&a| rel(a, t[0])).collect(),
    }
}

fn bound_witness(pair: OrderPair, low: &[Tagged], high: &[Tagged]) -> Vec<Atom> {
    use crate::orders::BoundCheck;
    match pair.bound_check() {
        BoundCheck::Cover(o) => order_witness(o, high, low, false),
        BoundCheck::SomeArc => order_witness(OrderType::Max, &high[..1], &low[..1], false),
        BoundCheck::AllArcs => high.iter().flat_map(|&h| order_witness(OrderType::Max, &[h], low, false)).collect(),
    }
}

/// A system together with a level mapping that orients every rule strictly
/// and bounds every rule, so that one iteration removes all rules. The
/// control-flow graph is a random cycle through all points plus extra arcs.
pub fn mcnp_by_construction<R: Rng>(rng: &mut R) -> (Mcs, LevelMapping) {
    'retry: loop {
        let n_points = rng.gen_range(1..=3);
        let arity: Vec<usize> = (0..n_points).map(|_| rng.gen_range(1..=3)).collect();
        let modulus: usize = arity.iter().sum();
        let pairs = OrderPair::default_order();
        let pair = *pairs.choose(rng).expect("pairs");
        let tagged = rng.gen_bool(0.5);
        let pick = |rng: &mut R, n: usize| -> Vec<TaggedArg> {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let len = rng.gen_range(1..=n);
            let mut v: Vec<TaggedArg> = idx[..len]
                .iter()
                .map(|&i| TaggedArg::new(i, if tagged { rng.gen_range(0..modulus) as u32 } else { 0 }))
                .collect();
            v.sort();
            v
        };
        let sets: Vec<PointSets> = arity.iter().map(|&n| PointSets { low: pick(rng, n), high: pick(rng, n) }).collect();
        let mapping = LevelMapping { pair, sets };

        let mut arcs: Vec<(usize, usize)> = (0..n_points).map(|p| (p, (p + 1) % n_points)).collect();
        for _ in 0..rng.gen_range(0..=3) {
            arcs.push((rng.gen_range(0..n_points), rng.gen_range(0..n_points)));
        }
        let mut decls = Vec::new();
        for &(p, q) in &arcs {
            let (ps, qs) = (sets_on(&mapping, p, Side::Source), sets_on(&mapping, q, Side::Target));
            let mut atoms = order_witness(pair.high(), &ps.1, &qs.1, true);
            atoms.extend(order_witness(pair.low(), &qs.0, &ps.0, false));
            atoms.extend(bound_witness(pair, &ps.0, &ps.1));
            let witness = atoms.len();
            let extra = rng.gen_range(0..=3);
            atoms.extend(random_atoms(rng, arity[p], arity[q], extra));
            // Drop random atoms until the constraint is satisfiable.
            let decl = loop {
                let d = RuleDecl::anonymous(None, &format!("p{p}"), arity[p], &format!("p{q}"), arity[q], atoms.clone());
                let one = Mcs::build(vec![d.clone()]).expect("well-formed rule");
                if one.rules()[0].closure().is_satisfiable() {
                    break d;
                }
                if atoms.len() == witness {
                    continue 'retry;
                }
                atoms.pop();
            };
            decls.push(decl);
        }
        let points = (0..n_points)
            .map(|p| crate::model::ProgramPoint { name: format!("p{p}"), arity: arity[p] })
            .collect();
        let mcs = Mcs::build_with_points(points, decls).expect("generated system is well-formed");
        debug_assert!(mcs.rules().iter().all(|g| orient(&mapping, g) == Orientation::Strict && bounded(&mapping, g)));
        return (mcs, mapping);
    }
}
