//! Level mappings: orientation and boundedness of rules, evaluation on
//! concrete states, and anchor identification by reachability.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::model::{tarjan, Mcs, RuleId, Side, State, TransitionRule, Var};
use crate::orders::{
    decide_bounded_syntactic, decide_order_syntactic, difference, DifferenceResult, IntMultiset, OrderPair, Tagged,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelMapError {
    #[error("level mapping has an empty set at point {0}")]
    EmptySet(String),
}

/// A tagged argument position of a program point (0-based index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaggedArg {
    pub index: usize,
    pub tag: u32,
}

impl TaggedArg {
    pub fn new(index: usize, tag: u32) -> TaggedArg {
        TaggedArg { index, tag }
    }

    fn on(self, side: Side) -> Tagged {
        Tagged::new(Var { side, index: self.index }, self.tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointSets {
    pub low: Vec<TaggedArg>,
    pub high: Vec<TaggedArg>,
}

impl PointSets {
    pub fn is_empty(&self) -> bool {
        self.low.is_empty() && self.high.is_empty()
    }
}

/// Per program point, a low and a high set of tagged positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMapping {
    pub pair: OrderPair,
    pub sets: Vec<PointSets>,
}

impl LevelMapping {
    /// The mapping with empty sets everywhere.
    pub fn empty(pair: OrderPair, n_points: usize) -> LevelMapping {
        LevelMapping { pair, sets: vec![PointSets::default(); n_points] }
    }

    pub fn low(&self, point: usize) -> &[TaggedArg] {
        &self.sets[point].low
    }

    pub fn high(&self, point: usize) -> &[TaggedArg] {
        &self.sets[point].high
    }

    pub fn is_untagged(&self) -> bool {
        self.sets.iter().flat_map(|s| s.low.iter().chain(&s.high)).all(|a| a.tag == 0)
    }

    fn side_sets(&self, point: usize, side: Side) -> (Vec<Tagged>, Vec<Tagged>) {
        let conv = |v: &[TaggedArg]| v.iter().map(|a| a.on(side)).collect();
        (conv(self.low(point)), conv(self.high(point)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    NotOriented,
    Weak,
    Strict,
}

/// Classifies `g`: high sets must weakly descend and low sets weakly ascend;
/// strictness on either side makes the orientation strict.
pub fn orient(f: &LevelMapping, g: &TransitionRule) -> Orientation {
    let c = g.closure();
    let (p_low, p_high) = f.side_sets(g.source, Side::Source);
    let (q_low, q_high) = f.side_sets(g.target, Side::Target);
    let (lo, hi) = (f.pair.low(), f.pair.high());
    let weak = decide_order_syntactic(c, hi, &p_high, &q_high, false) && decide_order_syntactic(c, lo, &q_low, &p_low, false);
    if !weak {
        return Orientation::NotOriented;
    }
    if decide_order_syntactic(c, hi, &p_high, &q_high, true) || decide_order_syntactic(c, lo, &q_low, &p_low, true) {
        Orientation::Strict
    } else {
        Orientation::Weak
    }
}

/// Boundedness of `g`, decided on the sets of its source point.
pub fn bounded(f: &LevelMapping, g: &TransitionRule) -> bool {
    let (low, high) = f.side_sets(g.source, Side::Source);
    decide_bounded_syntactic(g.closure(), f.pair, &low, &high)
}

/// Evaluates the mapping's ranking value `high − low` at a concrete state,
/// with tagged values `modulus * x + tag`.
pub fn phi_eval(mcs: &Mcs, f: &LevelMapping, state: &State) -> Result<DifferenceResult, LevelMapError> {
    let m = mcs.tag_modulus() as i64;
    let value = |a: &TaggedArg| m * state.values[a.index] + a.tag as i64;
    let low: IntMultiset = f.low(state.point).iter().map(value).collect();
    let high: IntMultiset = f.high(state.point).iter().map(value).collect();
    if low.is_empty() || high.is_empty() {
        return Err(LevelMapError::EmptySet(mcs.points()[state.point].name.clone()));
    }
    Ok(difference(f.pair.low(), f.pair.high(), &low, &high).expect("pair is compatible and operands non-empty"))
}

/// Orientation and boundedness classes of every rule of `scc`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Classification {
    pub not_oriented: BTreeSet<RuleId>,
    pub strict: BTreeSet<RuleId>,
    pub bounded: BTreeSet<RuleId>,
}

pub fn classify(scc: &Mcs, f: &LevelMapping) -> Classification {
    let mut out = Classification::default();
    for g in scc.rules() {
        match orient(f, g) {
            Orientation::NotOriented => {
                out.not_oriented.insert(g.id.clone());
            }
            Orientation::Strict => {
                out.strict.insert(g.id.clone());
            }
            Orientation::Weak => {}
        }
        if bounded(f, g) {
            out.bounded.insert(g.id.clone());
        }
    }
    out
}

/// `reach[u]` = points reachable from `u` (including `u`) using rules
/// outside `excluded`.
fn reachability(scc: &Mcs, excluded: &BTreeSet<RuleId>) -> Vec<Vec<bool>> {
    let n = scc.points().len();
    let mut succ = vec![Vec::new(); n];
    for r in scc.rules().iter().filter(|r| !excluded.contains(&r.id)) {
        succ[r.source].push(r.target);
    }
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &succ[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Rules `g = p → q` such that every cycle through `g` contains a rule of
/// `strict` and a rule of `bounded`. A rule is safe for a set `X` when it is
/// in `X` or `p` is unreachable from `q` without rules of `X`.
pub fn find_anchors(scc: &Mcs, strict: &BTreeSet<RuleId>, bounded: &BTreeSet<RuleId>) -> BTreeSet<RuleId> {
    let reach_s = reachability(scc, strict);
    let reach_b = reachability(scc, bounded);
    scc.rules()
        .iter()
        .filter(|g| {
            let s_safe = strict.contains(&g.id) || !reach_s[g.target][g.source];
            let b_safe = bounded.contains(&g.id) || !reach_b[g.target][g.source];
            s_safe && b_safe
        })
        .map(|g| g.id.clone())
        .collect()
}

/// A node numbering agreeing with `set`: numbers only increase along rules
/// of `set`. Built from the components of `scc` without `set`, numbered in
/// reverse topological order starting at 1.
pub fn node_numbering(scc: &Mcs, set: &BTreeSet<RuleId>) -> BTreeMap<usize, usize> {
    let mut succ = vec![Vec::new(); scc.points().len()];
    for r in scc.rules().iter().filter(|r| !set.contains(&r.id)) {
        succ[r.source].push(r.target);
    }
    let comp = tarjan(&succ);
    scc.active_points().into_iter().map(|p| (p, comp[p] + 1)).collect()
}

/// Whether `num` agrees with `set` over the rules of `scc`.
pub fn numbering_agrees(scc: &Mcs, num: &BTreeMap<usize, usize>, set: &BTreeSet<RuleId>) -> bool {
    scc.rules().iter().all(|r| num[&r.target] <= num[&r.source] || set.contains(&r.id))
}

/// Everything the prover learns about one level mapping on one SCC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorAnalysis {
    pub strict: BTreeSet<RuleId>,
    pub bounded: BTreeSet<RuleId>,
    pub anchors: BTreeSet<RuleId>,
    pub num_strict: Option<BTreeMap<usize, usize>>,
    pub num_bounded: Option<BTreeMap<usize, usize>>,
}

impl AnchorAnalysis {
    pub fn compute(scc: &Mcs, strict: BTreeSet<RuleId>, bounded: BTreeSet<RuleId>, with_numberings: bool) -> AnchorAnalysis {
        let anchors = find_anchors(scc, &strict, &bounded);
        let (num_strict, num_bounded) = if with_numberings {
            (Some(node_numbering(scc, &strict)), Some(node_numbering(scc, &bounded)))
        } else {
            (None, None)
        };
        AnchorAnalysis { strict, bounded, anchors, num_strict, num_bounded }
    }
}
