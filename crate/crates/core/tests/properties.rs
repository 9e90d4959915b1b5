use std::collections::BTreeSet;

use mcnp::io::{parse_mcs, render_mcs};
use mcnp::levelmap::{bounded, classify, find_anchors, orient, phi_eval, LevelMapping, Orientation, PointSets, TaggedArg};
use mcnp::model::{ClosedConstraint, Mcs, ProgramPoint, RuleDecl, State};
use mcnp::oracle::{
    brute_force_anchors, brute_force_components, brute_force_sccs, random_digraph, random_mcs, random_rule, sample_target,
};
use mcnp::orders::{compare_semantic, in_wf_subset, strictly_greater, weakly_greater, Comparison, IntMultiset, OrderPair, OrderType};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mapping(rng: &mut impl Rng, mcs: &Mcs, pair: OrderPair, max_tag: u32) -> LevelMapping {
    let sets = mcs
        .points()
        .iter()
        .map(|p| {
            let mut pick = || {
                let mut idx: Vec<usize> = (0..p.arity).collect();
                idx.shuffle(rng);
                let len = if p.arity == 0 { 0 } else { rng.gen_range(1..=p.arity) };
                idx[..len].iter().map(|&i| TaggedArg::new(i, rng.gen_range(0..=max_tag))).collect()
            };
            PointSets { low: pick(), high: pick() }
        })
        .collect();
    LevelMapping { pair, sets }
}

fn multiset() -> impl Strategy<Value = IntMultiset> {
    prop::collection::vec(-8i64..=8, 0..5).prop_map(IntMultiset::new)
}

fn order() -> impl Strategy<Value = OrderType> {
    prop::sample::select(OrderType::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn closure_is_a_sound_quasi_order(seed in any::<u64>()) {
        let rule = random_rule(&mut rng(seed), 4, 8);
        let c = rule.closure();
        let vars: Vec<_> = c.vars().collect();
        for &a in &vars {
            prop_assert!(c.geq(a, a));
            for &b in &vars {
                prop_assert!(!c.gt(a, b) || c.geq(a, b));
                for &d in &vars {
                    if c.geq(a, b) && c.geq(b, d) {
                        prop_assert!(c.geq(a, d));
                    }
                    if (c.gt(a, b) && c.geq(b, d)) || (c.geq(a, b) && c.gt(b, d)) {
                        prop_assert!(c.gt(a, d));
                    }
                }
            }
            if c.is_satisfiable() {
                prop_assert!(!c.gt(a, a));
            }
        }
        let again = ClosedConstraint::close(c.n_src(), c.n_tgt(), &c.entailed_atoms());
        prop_assert_eq!(&again, c);
    }

    #[test]
    fn transpose_is_an_involution(seed in any::<u64>()) {
        let rule = random_rule(&mut rng(seed), 4, 8);
        prop_assert_eq!(rule.transpose().transpose(), rule.clone());
        let t = rule.transpose();
        for a in rule.closure().vars() {
            for b in rule.closure().vars() {
                prop_assert_eq!(rule.closure().strength(a, b), t.closure().strength(b.flip(), a.flip()));
            }
        }
    }

    #[test]
    fn components_match_reachability(seed in any::<u64>(), n in 1usize..=8, m in 0usize..=14) {
        let mut r = rng(seed);
        let arcs = random_digraph(&mut r, n, m);
        let points = (0..n).map(|i| ProgramPoint { name: format!("v{i}"), arity: 0 }).collect();
        let decls = arcs.iter().map(|&(u, v)| RuleDecl::anonymous(None, &format!("v{u}"), 0, &format!("v{v}"), 0, vec![])).collect();
        let mcs = Mcs::build_with_points(points, decls).unwrap();
        let got: BTreeSet<BTreeSet<String>> = mcs.scc_decompose().iter().map(|c| c.rule_ids()).collect();
        prop_assert_eq!(&got, &brute_force_sccs(&mcs));
        let comp = brute_force_components(n, &arcs);
        let tarjan = mcs.point_components();
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(comp[u] == comp[v], tarjan[u] == tarjan[v]);
            }
        }
        // Topological order: arcs never lead to a component completed later.
        for &(u, v) in &arcs {
            prop_assert!(tarjan[v] <= tarjan[u]);
        }
    }

    #[test]
    fn anchors_match_cycle_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=5);
        let m = r.gen_range(1..=8);
        let mcs = random_mcs(&mut r, n, m, 1, 0);
        for scc in mcs.scc_decompose() {
            let ids: Vec<String> = scc.rule_ids().into_iter().collect();
            let s: BTreeSet<String> = ids.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
            let b: BTreeSet<String> = ids.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
            prop_assert_eq!(find_anchors(&scc, &s, &b), brute_force_anchors(&scc, &s, &b));
        }
        let all = mcs.rule_ids();
        prop_assert_eq!(find_anchors(&mcs, &BTreeSet::new(), &BTreeSet::new()), brute_force_anchors(&mcs, &BTreeSet::new(), &BTreeSet::new()));
        prop_assert_eq!(find_anchors(&mcs, &all, &all), all);
    }

    #[test]
    fn rendering_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=4), r.gen_range(1..=6));
        let mcs = random_mcs(&mut r, n, m, 4, 6);
        let text = render_mcs(&mcs);
        prop_assert_eq!(parse_mcs(&text).unwrap(), mcs);
    }

    #[test]
    fn semantic_orders_are_total(mu in order(), s in multiset(), t in multiset()) {
        let st = strictly_greater(mu, &s, &t);
        let ts = strictly_greater(mu, &t, &s);
        let eq = weakly_greater(mu, &s, &t) && weakly_greater(mu, &t, &s);
        prop_assert_eq!(st as u8 + ts as u8 + eq as u8, 1);
        let expected = if st { Comparison::Greater } else if ts { Comparison::Less } else { Comparison::Equivalent };
        prop_assert_eq!(compare_semantic(mu, &s, &t), expected);
        prop_assert_eq!(weakly_greater(mu, &s, &t), !ts);
    }

    #[test]
    fn orientation_and_boundedness_hold_on_samples(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mcs = random_mcs(&mut r, 2, 3, 3, 6);
        let pairs = OrderPair::default_order();
        let pair = *pairs.choose(&mut r).unwrap();
        let f = random_mapping(&mut r, &mcs, pair, mcs.tag_modulus() as u32 - 1);
        for g in mcs.rules() {
            let o = orient(&f, g);
            let bnd = bounded(&f, g);
            for _ in 0..20 {
                let from = State { point: g.source, values: (0..g.src_names.len()).map(|_| r.gen_range(-6..=6)).collect() };
                let Some(values) = sample_target(g, &from.values, &mut r) else { break };
                let to = State { point: g.target, values };
                let (a, b) = (phi_eval(&mcs, &f, &from).unwrap(), phi_eval(&mcs, &f, &to).unwrap());
                if o != Orientation::NotOriented {
                    prop_assert!(weakly_greater(a.order, &a.multiset, &b.multiset));
                }
                if o == Orientation::Strict {
                    prop_assert!(strictly_greater(a.order, &a.multiset, &b.multiset));
                }
                if bnd {
                    prop_assert!(in_wf_subset(a.order, &a.multiset));
                }
            }
        }
    }
}

#[test]
fn classification_matches_orient() {
    let mut r = rng(11);
    for _ in 0..200 {
        let mcs = random_mcs(&mut r, 2, 4, 3, 5);
        let f = random_mapping(&mut r, &mcs, OrderPair::new(OrderType::Min, OrderType::Max).unwrap(), 0);
        let c = classify(&mcs, &f);
        for g in mcs.rules() {
            assert_eq!(c.not_oriented.contains(&g.id), orient(&f, g) == Orientation::NotOriented);
            assert_eq!(c.strict.contains(&g.id), orient(&f, g) == Orientation::Strict);
            assert_eq!(c.bounded.contains(&g.id), bounded(&f, g));
        }
    }
}
