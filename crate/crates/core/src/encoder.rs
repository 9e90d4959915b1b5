//! Propositional encoding of "some level mapping of a given order pair
//! orients every rule of an SCC and anchors at least one of them", and
//! decoding of models back into level mappings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use mcnp_sat::cnf::bits_for;
use mcnp_sat::{BitVec, Cnf, Lit};
use thiserror::Error;

use crate::levelmap::{bounded, find_anchors, orient, LevelMapping, Orientation, PointSets, TaggedArg};
use crate::model::{Mcs, RuleId, Side, Var};
use crate::orders::{BoundCheck, OrderPair, OrderType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("component has no rules")]
    Empty,
    #[error("rules do not form a single strongly connected component")]
    NotStronglyConnected,
    #[error("rule {0} has an unsatisfiable constraint")]
    UnsatisfiableRule(RuleId),
    #[error("model does not match the encoding: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    /// When false, every tag is fixed to zero.
    pub tags: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { tags: true }
    }
}

/// Per-rule flag literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleVars {
    pub weak: Lit,
    pub strict: Lit,
    pub bound: Lit,
    pub anchor: Lit,
    pub weak_low: Lit,
    pub strict_low: Lit,
    pub weak_high: Lit,
    pub strict_high: Lit,
}

/// Where each part of a level mapping lives in the formula.
#[derive(Debug, Clone)]
pub struct EncodingVars {
    pub pair: OrderPair,
    pub points: BTreeSet<usize>,
    pub low: BTreeMap<(usize, usize), Lit>,
    pub high: BTreeMap<(usize, usize), Lit>,
    pub tags: BTreeMap<(usize, usize), BitVec>,
    pub num_strict: BTreeMap<usize, BitVec>,
    pub num_bounded: BTreeMap<usize, BitVec>,
    pub rules: BTreeMap<RuleId, RuleVars>,
    n_points: usize,
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub cnf: Cnf,
    pub vars: EncodingVars,
}

struct Builder<'a> {
    scc: &'a Mcs,
    cnf: Cnf,
    vars: EncodingVars,
    tagged: bool,
    edges: HashMap<(usize, Var, Var, bool), Lit>,
    tag_cmp: HashMap<((usize, usize), (usize, usize), bool), Lit>,
}

/// A selectable position: its selection literal and its variable in the rule.
type Item = (Lit, Var);

impl Builder<'_> {
    fn tag_key(&self, g: usize, v: Var) -> (usize, usize) {
        let r = &self.scc.rules()[g];
        (if v.side == Side::Source { r.source } else { r.target }, v.index)
    }

    /// Literal for `π_g ⊨ (a, tag) ▷ (b, tag)`.
    fn edge(&mut self, g: usize, a: Var, b: Var, strict: bool) -> Lit {
        if let Some(&l) = self.edges.get(&(g, a, b, strict)) {
            return l;
        }
        let c = self.scc.rules()[g].closure();
        let lit = if c.gt(a, b) {
            self.cnf.true_lit()
        } else if !c.geq(a, b) {
            self.cnf.false_lit()
        } else if !self.tagged {
            self.cnf.constant(!strict)
        } else {
            let (ka, kb) = (self.tag_key(g, a), self.tag_key(g, b));
            let cmp = match self.tag_cmp.get(&(ka, kb, strict)) {
                Some(&l) => l,
                None => {
                    let (ta, tb) = (self.vars.tags[&ka].clone(), self.vars.tags[&kb].clone());
                    let l = if strict { self.cnf.bv_gt(&ta, &tb) } else { self.cnf.bv_ge(&ta, &tb) };
                    self.tag_cmp.insert((ka, kb, strict), l);
                    l
                }
            };
            let rel = if strict { ">" } else { ">=" };
            let name = format!("e[{}][{}{}{}]", self.scc.rules()[g].id, a, rel, b);
            let e = self.cnf.named_var(name).pos();
            self.cnf.equate(e, cmp);
            e
        };
        self.edges.insert((g, a, b, strict), lit);
        lit
    }

    /// `(weak, strict)` literals for `S ≿ T` / `S ≻ T` under `order`.
    fn order_side(&mut self, g: usize, order: OrderType, s: &[Item], t: &[Item]) -> (Lit, Lit) {
        let transposed = matches!(order, OrderType::Min | OrderType::Dms);
        let (cover, covered) = if transposed { (t, s) } else { (s, t) };
        let rel = |b: &mut Self, c: usize, d: usize, strict: bool| {
            if transposed {
                b.edge(g, covered[d].1, cover[c].1, strict)
            } else {
                b.edge(g, cover[c].1, covered[d].1, strict)
            }
        };
        if matches!(order, OrderType::Max | OrderType::Min) {
            let mut per_mode = [self.cnf.true_lit(); 2];
            for (k, strict) in [false, true].into_iter().enumerate() {
                let mut conj = Vec::new();
                for d in 0..covered.len() {
                    let mut opts = Vec::new();
                    for c in 0..cover.len() {
                        let e = rel(self, c, d, strict);
                        opts.push(self.cnf.and2(cover[c].0, e));
                    }
                    let any = self.cnf.or(&opts);
                    conj.push(self.cnf.or2(!covered[d].0, any));
                }
                if strict {
                    let sels: Vec<Lit> = cover.iter().map(|i| i.0).collect();
                    conj.push(self.cnf.or(&sels));
                }
                per_mode[k] = self.cnf.and(&conj);
            }
            return (per_mode[0], per_mode[1]);
        }
        // Multiset orders: selectors pick a coverer for each covered
        // position; a coverer in strict mode covers strictly, otherwise it
        // covers at most one position.
        let weak = self.cnf.new_var().pos();
        let strict = self.cnf.new_var().pos();
        let mut chosen: Vec<Vec<Lit>> = vec![Vec::new(); covered.len()];
        let mut strict_modes = Vec::new();
        for c in 0..cover.len() {
            let mode = self.cnf.new_var().pos();
            let mut row = Vec::new();
            for d in 0..covered.len() {
                let ge = rel(self, c, d, false);
                if ge == self.cnf.false_lit() {
                    continue;
                }
                let gt = rel(self, c, d, true);
                let sel = self.cnf.new_var().pos();
                self.cnf.add_clause([!sel, cover[c].0]);
                self.cnf.add_clause([!sel, covered[d].0]);
                self.cnf.add_clause([!sel, ge]);
                self.cnf.add_clause([!sel, !mode, gt]);
                row.push(sel);
                chosen[d].push(sel);
            }
            self.cnf.at_most_one_unless(mode, &row);
            strict_modes.push(self.cnf.and2(cover[c].0, mode));
        }
        for (d, opts) in chosen.iter().enumerate() {
            let mut clause = vec![!weak, !covered[d].0];
            clause.extend(opts);
            self.cnf.add_clause(clause);
        }
        self.cnf.imply(strict, weak);
        let mut clause = vec![!strict];
        clause.extend(strict_modes);
        self.cnf.add_clause(clause);
        (weak, strict)
    }

    fn bound(&mut self, g: usize, low: &[Item], high: &[Item]) -> Lit {
        match self.vars.pair.bound_check() {
            BoundCheck::Cover(order) => self.order_side(g, order, high, low).0,
            BoundCheck::SomeArc => {
                let mut opts = Vec::new();
                for h in high {
                    for l in low {
                        let e = self.edge(g, h.1, l.1, false);
                        opts.push(self.cnf.and(&[h.0, l.0, e]));
                    }
                }
                self.cnf.or(&opts)
            }
            BoundCheck::AllArcs => {
                let mut conj = Vec::new();
                for h in high {
                    for l in low {
                        let e = self.edge(g, h.1, l.1, false);
                        conj.push(self.cnf.or(&[!h.0, !l.0, e]));
                    }
                }
                self.cnf.and(&conj)
            }
        }
    }

    fn named(&mut self, name: String, value: Lit) -> Lit {
        let v = self.cnf.named_var(name).pos();
        self.cnf.equate(v, value);
        v
    }

    fn items(&self, point: usize, side: Side, high: bool) -> Vec<Item> {
        let sel = if high { &self.vars.high } else { &self.vars.low };
        (0..self.scc.points()[point].arity).map(|i| (sel[&(point, i)], Var { side, index: i })).collect()
    }
}

fn check_scc(scc: &Mcs) -> Result<(), EncodeError> {
    if scc.rules().is_empty() {
        return Err(EncodeError::Empty);
    }
    if let Some(r) = scc.rules().iter().find(|r| !r.closure().is_satisfiable()) {
        return Err(EncodeError::UnsatisfiableRule(r.id.clone()));
    }
    let comps = scc.scc_decompose();
    if comps.len() != 1 || comps[0].rules().len() != scc.rules().len() {
        return Err(EncodeError::NotStronglyConnected);
    }
    Ok(())
}

/// Builds the formula for one strongly connected component and order pair.
pub fn encode(scc: &Mcs, pair: OrderPair, cfg: EncoderConfig) -> Result<Encoding, EncodeError> {
    check_scc(scc)?;
    let points = scc.active_points();
    let mut cnf = Cnf::new();
    let tag_width = if cfg.tags { bits_for(scc.tag_modulus()) } else { 0 };
    let num_width = bits_for(points.len());
    let (mut low, mut high, mut tags) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    let (mut num_strict, mut num_bounded) = (BTreeMap::new(), BTreeMap::new());
    for &p in &points {
        let pt = &scc.points()[p];
        for i in 0..pt.arity {
            low.insert((p, i), cnf.named_var(format!("low[{}.{}]", pt.name, i + 1)).pos());
            high.insert((p, i), cnf.named_var(format!("high[{}.{}]", pt.name, i + 1)).pos());
            tags.insert((p, i), cnf.new_bitvec(&format!("tag[{}.{}]", pt.name, i + 1), tag_width));
        }
        num_strict.insert(p, cnf.new_bitvec(&format!("numS[{}]", pt.name), num_width));
        num_bounded.insert(p, cnf.new_bitvec(&format!("numB[{}]", pt.name), num_width));
    }
    let vars = EncodingVars {
        pair,
        points,
        low,
        high,
        tags,
        num_strict,
        num_bounded,
        rules: BTreeMap::new(),
        n_points: scc.points().len(),
    };
    let mut b = Builder { scc, cnf, vars, tagged: cfg.tags, edges: HashMap::new(), tag_cmp: HashMap::new() };

    let mut anchors = Vec::new();
    for (g, rule) in scc.rules().iter().enumerate() {
        let (p, q) = (rule.source, rule.target);
        let p_low = b.items(p, Side::Source, false);
        let p_high = b.items(p, Side::Source, true);
        let q_low = b.items(q, Side::Target, false);
        let q_high = b.items(q, Side::Target, true);
        let (wh, sh) = b.order_side(g, pair.high(), &p_high, &q_high);
        let (wl, sl) = b.order_side(g, pair.low(), &q_low, &p_low);
        let bd = b.bound(g, &p_low, &p_high);

        let id = &rule.id;
        let weak_low = b.named(format!("weak_low[{id}]"), wl);
        let strict_low = b.named(format!("strict_low[{id}]"), sl);
        let weak_high = b.named(format!("weak_high[{id}]"), wh);
        let strict_high = b.named(format!("strict_high[{id}]"), sh);
        let w = b.cnf.and2(weak_low, weak_high);
        let weak = b.named(format!("weak[{id}]"), w);
        let either = b.cnf.or2(strict_low, strict_high);
        let s = b.cnf.and2(weak, either);
        let strict = b.named(format!("strict[{id}]"), s);
        let bound = b.named(format!("bound[{id}]"), bd);

        let (ns_p, ns_q) = (b.vars.num_strict[&p].clone(), b.vars.num_strict[&q].clone());
        let (nb_p, nb_q) = (b.vars.num_bounded[&p].clone(), b.vars.num_bounded[&q].clone());
        // Every cycle through the rule meets the strict set if the rule is
        // strict itself or the numbering separates its endpoints; likewise
        // for the bounded set.
        let ne_s = b.cnf.bv_ne(&ns_p, &ns_q);
        let ne_b = b.cnf.bv_ne(&nb_p, &nb_q);
        let via_s = b.cnf.or2(strict, ne_s);
        let via_b = b.cnf.or2(bound, ne_b);
        let a = b.cnf.and2(via_s, via_b);
        let anchor = b.named(format!("anchor[{id}]"), a);

        let up_s = b.cnf.bv_lt(&ns_p, &ns_q);
        b.cnf.imply(up_s, strict);
        let up_b = b.cnf.bv_lt(&nb_p, &nb_q);
        b.cnf.imply(up_b, bound);

        b.cnf.assert_lit(weak);
        anchors.push(anchor);
        let rv = RuleVars { weak, strict, bound, anchor, weak_low, strict_low, weak_high, strict_high };
        b.vars.rules.insert(id.clone(), rv);
    }
    b.cnf.add_clause(anchors);
    for p in b.vars.points.clone() {
        let arity = scc.points()[p].arity;
        let lows: Vec<Lit> = (0..arity).map(|i| b.vars.low[&(p, i)]).collect();
        let highs: Vec<Lit> = (0..arity).map(|i| b.vars.high[&(p, i)]).collect();
        b.cnf.add_clause(lows);
        b.cnf.add_clause(highs);
    }
    Ok(Encoding { cnf: b.cnf, vars: b.vars })
}

/// A level mapping read off a model, with the flags the model sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedMapping {
    pub mapping: LevelMapping,
    pub strict: BTreeSet<RuleId>,
    pub bounded: BTreeSet<RuleId>,
    pub anchors: BTreeSet<RuleId>,
    pub num_strict: BTreeMap<usize, u64>,
    pub num_bounded: BTreeMap<usize, u64>,
}

/// Reads a level mapping from a model. Tags are replaced by their rank
/// among all tag values, which keeps every comparison and bounds them by
/// the number of positions. The flags are checked against a recomputation
/// from the decoded mapping.
pub fn decode_model(scc: &Mcs, model: &[bool], vars: &EncodingVars) -> Result<DecodedMapping, EncodeError> {
    let lit = |l: Lit| l.eval(model);
    let raw: BTreeMap<(usize, usize), u64> = vars.tags.iter().map(|(k, bv)| (*k, bv.eval(model))).collect();
    let distinct: BTreeSet<u64> = raw.values().copied().collect();
    let rank: BTreeMap<u64, u32> = distinct.into_iter().enumerate().map(|(i, v)| (v, i as u32)).collect();
    let mut mapping = LevelMapping::empty(vars.pair, vars.n_points);
    for &p in &vars.points {
        let mut sets = PointSets::default();
        for i in 0..scc.points()[p].arity {
            let tag = rank[&raw[&(p, i)]];
            if lit(vars.low[&(p, i)]) {
                sets.low.push(TaggedArg::new(i, tag));
            }
            if lit(vars.high[&(p, i)]) {
                sets.high.push(TaggedArg::new(i, tag));
            }
        }
        mapping.sets[p] = sets;
    }
    let pick = |f: fn(&RuleVars) -> Lit| -> BTreeSet<RuleId> {
        vars.rules.iter().filter(|(_, rv)| lit(f(rv))).map(|(id, _)| id.clone()).collect()
    };
    let strict = pick(|rv| rv.strict);
    let bounded_flags = pick(|rv| rv.bound);
    let anchors = pick(|rv| rv.anchor);

    for g in scc.rules() {
        let rv = &vars.rules[&g.id];
        let o = orient(&mapping, g);
        if !lit(rv.weak) || o == Orientation::NotOriented {
            return Err(EncodeError::Inconsistent(format!("rule {} is not oriented", g.id)));
        }
        if strict.contains(&g.id) && o != Orientation::Strict {
            return Err(EncodeError::Inconsistent(format!("rule {} flagged strict", g.id)));
        }
        if bounded_flags.contains(&g.id) && !bounded(&mapping, g) {
            return Err(EncodeError::Inconsistent(format!("rule {} flagged bounded", g.id)));
        }
    }
    if anchors.is_empty() || !anchors.is_subset(&find_anchors(scc, &strict, &bounded_flags)) {
        return Err(EncodeError::Inconsistent("anchor flags are not anchors".into()));
    }
    let nums = |m: &BTreeMap<usize, BitVec>| m.iter().map(|(p, bv)| (*p, bv.eval(model))).collect();
    Ok(DecodedMapping {
        mapping,
        strict,
        bounded: bounded_flags,
        anchors,
        num_strict: nums(&vars.num_strict),
        num_bounded: nums(&vars.num_bounded),
    })
}
