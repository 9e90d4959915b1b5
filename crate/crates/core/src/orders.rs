//! Multiset order types, their semantics on concrete integers, and the
//! graph criteria that decide them from a rule's closed constraint.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClosedConstraint, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("order pair ({low}, {high}) is not compatible")]
    Incompatible { low: OrderType, high: OrderType },
    #[error("difference needs non-empty operands")]
    EmptyOperand,
    #[error("unknown order {0:?}")]
    UnknownOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderType {
    Max,
    Min,
    Ms,
    Dms,
}

impl OrderType {
    pub const ALL: [OrderType; 4] = [OrderType::Max, OrderType::Min, OrderType::Ms, OrderType::Dms];

    pub fn name(self) -> &'static str {
        match self {
            OrderType::Max => "max",
            OrderType::Min => "min",
            OrderType::Ms => "ms",
            OrderType::Dms => "dms",
        }
    }

    /// The order obtained by negating both operands and swapping them.
    pub fn dual(self) -> OrderType {
        match self {
            OrderType::Max => OrderType::Min,
            OrderType::Min => OrderType::Max,
            OrderType::Ms => OrderType::Dms,
            OrderType::Dms => OrderType::Ms,
        }
    }

    /// Whether the criterion is evaluated on the transposed constraint.
    fn transposed(self) -> bool {
        matches!(self, OrderType::Min | OrderType::Dms)
    }

    fn is_extremum(self) -> bool {
        matches!(self, OrderType::Max | OrderType::Min)
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderType {
    type Err = OrderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OrderType::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| OrderError::UnknownOrder(s.to_string()))
    }
}

/// A compatible `(low, high)` pair of order types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderPair {
    low: OrderType,
    high: OrderType,
}

pub fn compatible(low: OrderType, high: OrderType) -> bool {
    low.is_extremum() || high.is_extremum()
}

/// How boundedness of a rule is decided for a given pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCheck {
    /// `high ≿ low` under the given extremum order.
    Cover(OrderType),
    /// Some high position is at least some low position.
    SomeArc,
    /// Every high position is at least every low position.
    AllArcs,
}

impl OrderPair {
    pub fn new(low: OrderType, high: OrderType) -> Result<OrderPair, OrderError> {
        if compatible(low, high) {
            Ok(OrderPair { low, high })
        } else {
            Err(OrderError::Incompatible { low, high })
        }
    }

    pub fn low(self) -> OrderType {
        self.low
    }

    pub fn high(self) -> OrderType {
        self.high
    }

    /// The twelve compatible pairs in the prover's default search order.
    pub fn default_order() -> Vec<OrderPair> {
        use OrderType::*;
        [
            (Min, Max),
            (Max, Min),
            (Min, Min),
            (Max, Max),
            (Max, Ms),
            (Max, Dms),
            (Min, Ms),
            (Min, Dms),
            (Ms, Min),
            (Ms, Max),
            (Dms, Min),
            (Dms, Max),
        ]
        .into_iter()
        .map(|(l, h)| OrderPair { low: l, high: h })
        .collect()
    }

    /// Order type of `high - low`.
    pub fn difference_type(self) -> OrderType {
        if self.low.is_extremum() {
            self.high
        } else {
            self.low.dual()
        }
    }

    pub fn bound_check(self) -> BoundCheck {
        use OrderType::*;
        match (self.low, self.high) {
            (Max, Max) => BoundCheck::Cover(Max),
            (Min, Min) => BoundCheck::Cover(Min),
            (Min, Max) => BoundCheck::SomeArc,
            (Max, Min) => BoundCheck::AllArcs,
            (Min, Ms | Dms) => BoundCheck::Cover(Min),
            (Ms | Dms, Max) => BoundCheck::Cover(Max),
            (Max, Ms | Dms) | (Ms | Dms, Min) => BoundCheck::AllArcs,
            (Ms | Dms, Ms | Dms) => unreachable!("incompatible pair"),
        }
    }
}

impl fmt::Display for OrderPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.low, self.high)
    }
}

impl FromStr for OrderPair {
    type Err = OrderError;

    /// Accepts the concatenated form used on the command line, e.g. `minmax`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        for low in OrderType::ALL {
            if let Some(rest) = s.strip_prefix(low.name()) {
                if let Ok(high) = rest.parse::<OrderType>() {
                    return OrderPair::new(low, high);
                }
            }
        }
        Err(OrderError::UnknownOrder(s.to_string()))
    }
}

/// A finite multiset of integers, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IntMultiset(Vec<i64>);

impl IntMultiset {
    pub fn new(mut elems: Vec<i64>) -> IntMultiset {
        elems.sort_unstable();
        IntMultiset(elems)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<i64> {
        self.0.last().copied()
    }

    pub fn min(&self) -> Option<i64> {
        self.0.first().copied()
    }

    /// Elements of `self` and `other` left after cancelling common ones.
    fn cancel(&self, other: &IntMultiset) -> (Vec<i64>, Vec<i64>) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            match (self.0.get(i), other.0.get(j)) {
                (Some(x), Some(y)) if x == y => {
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    a.push(*x);
                    i += 1;
                }
                (Some(_), Some(y)) => {
                    b.push(*y);
                    j += 1;
                }
                (Some(x), None) => {
                    a.push(*x);
                    i += 1;
                }
                (None, Some(y)) => {
                    b.push(*y);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        (a, b)
    }
}

impl FromIterator<i64> for IntMultiset {
    fn from_iter<I: IntoIterator<Item = i64>>(iter: I) -> Self {
        IntMultiset::new(iter.into_iter().collect())
    }
}

impl fmt::Display for IntMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Greater,
    Equivalent,
    Less,
}

/// `s ≻ t` under `order`.
pub fn strictly_greater(order: OrderType, s: &IntMultiset, t: &IntMultiset) -> bool {
    match order {
        OrderType::Max => match (s.max(), t.max()) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            (None, _) => false,
        },
        OrderType::Min => match (s.min(), t.min()) {
            (Some(a), Some(b)) => a > b,
            (None, Some(_)) => true,
            (_, None) => false,
        },
        OrderType::Ms => {
            let (s1, t1) = s.cancel(t);
            match (s1.last(), t1.last()) {
                (None, _) => false,
                (Some(_), None) => true,
                (Some(a), Some(b)) => a > b,
            }
        }
        OrderType::Dms => {
            let (s1, t1) = s.cancel(t);
            match (s1.first(), t1.first()) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(a), Some(b)) => a > b,
            }
        }
    }
}

/// `s ≿ t` under `order`.
pub fn weakly_greater(order: OrderType, s: &IntMultiset, t: &IntMultiset) -> bool {
    match order {
        OrderType::Max => match (s.max(), t.max()) {
            (_, None) => true,
            (Some(a), Some(b)) => a >= b,
            (None, Some(_)) => false,
        },
        OrderType::Min => match (s.min(), t.min()) {
            (None, _) => true,
            (Some(a), Some(b)) => a >= b,
            (Some(_), None) => false,
        },
        OrderType::Ms | OrderType::Dms => s == t || strictly_greater(order, s, t),
    }
}

pub fn compare_semantic(order: OrderType, s: &IntMultiset, t: &IntMultiset) -> Comparison {
    match (weakly_greater(order, s, t), weakly_greater(order, t, s)) {
        (true, true) => Comparison::Equivalent,
        (true, false) => Comparison::Greater,
        (false, true) => Comparison::Less,
        (false, false) => unreachable!("{order} is total"),
    }
}

/// Membership in the well-founded part of the order. The empty multiset
/// counts as a member for every order type.
pub fn in_wf_subset(order: OrderType, s: &IntMultiset) -> bool {
    match order {
        OrderType::Max => s.max().is_none_or(|m| m >= 0),
        OrderType::Min => s.min().is_none_or(|m| m >= 0),
        OrderType::Ms | OrderType::Dms => s.as_slice().iter().all(|&x| x >= 0),
    }
}

pub fn negate(s: &IntMultiset) -> IntMultiset {
    s.as_slice().iter().map(|x| -x).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceResult {
    pub multiset: IntMultiset,
    pub order: OrderType,
}

/// `high - low` for multisets typed by a compatible pair.
pub fn difference(low_type: OrderType, high_type: OrderType, low: &IntMultiset, high: &IntMultiset) -> Result<DifferenceResult, OrderError> {
    let pair = OrderPair::new(low_type, high_type)?;
    if low.is_empty() || high.is_empty() {
        return Err(OrderError::EmptyOperand);
    }
    let extremum = |t: OrderType, m: &IntMultiset| if t == OrderType::Max { m.max().unwrap() } else { m.min().unwrap() };
    let multiset = if low_type.is_extremum() {
        let l = extremum(low_type, low);
        high.as_slice().iter().map(|h| h - l).collect()
    } else {
        let h = extremum(high_type, high);
        low.as_slice().iter().map(|l| h - l).collect()
    };
    Ok(DifferenceResult { multiset, order: pair.difference_type() })
}

/// An argument position carrying a tag; its value is `M * x + tag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tagged {
    pub var: Var,
    pub tag: u32,
}

impl Tagged {
    pub fn new(var: Var, tag: u32) -> Tagged {
        Tagged { var, tag }
    }
}

/// Entailment between tagged positions.
pub fn tagged_rel(c: &ClosedConstraint, a: Tagged, b: Tagged, strict: bool) -> bool {
    if c.gt(a.var, b.var) {
        return true;
    }
    c.geq(a.var, b.var) && if strict { a.tag > b.tag } else { a.tag >= b.tag }
}

/// Covering search shared by all four criteria. `rel(c, d, strict)` says
/// whether coverer `c` covers `d`.
fn covering(n_cover: usize, n_covered: usize, rel: impl Fn(usize, usize, bool) -> bool, multiset_like: bool, strict: bool) -> bool {
    if !multiset_like {
        if strict && n_cover == 0 {
            return false;
        }
        return (0..n_covered).all(|d| (0..n_cover).any(|c| rel(c, d, strict)));
    }
    // Each coverer either covers all its assigned elements strictly, or
    // covers at most one element.
    struct Load {
        count: usize,
        all_strict: bool,
    }
    fn assign(d: usize, n_covered: usize, loads: &mut [Load], rel: &dyn Fn(usize, usize, bool) -> bool, strict: bool) -> bool {
        if d == n_covered {
            return !strict || loads.iter().any(|l| l.all_strict);
        }
        for c in 0..loads.len() {
            if !rel(c, d, false) {
                continue;
            }
            let s = rel(c, d, true);
            let (count, all_strict) = (loads[c].count, loads[c].all_strict);
            let next_strict = all_strict && s;
            if !next_strict && count + 1 > 1 {
                continue;
            }
            loads[c] = Load { count: count + 1, all_strict: next_strict };
            if assign(d + 1, n_covered, loads, rel, strict) {
                return true;
            }
            loads[c] = Load { count, all_strict };
        }
        false
    }
    let mut loads: Vec<Load> = (0..n_cover).map(|_| Load { count: 0, all_strict: true }).collect();
    assign(0, n_covered, &mut loads, &rel, strict)
}

/// Decides `π ⊨ S ≿ T` (or `≻` when `strict`) from the closed constraint.
///
/// For max and ms every element of `T` is covered by an element of `S`; min
/// and dms use the same conditions on the transposed constraint, where `T`
/// covers `S`.
pub fn decide_order_syntactic(c: &ClosedConstraint, order: OrderType, s: &[Tagged], t: &[Tagged], strict: bool) -> bool {
    let multiset_like = matches!(order, OrderType::Ms | OrderType::Dms);
    if order.transposed() {
        covering(t.len(), s.len(), |ci, di, st| tagged_rel(c, s[di], t[ci], st), multiset_like, strict)
    } else {
        covering(s.len(), t.len(), |ci, di, st| tagged_rel(c, s[ci], t[di], st), multiset_like, strict)
    }
}

/// Decides whether `high − low` lies in the well-founded subset under every
/// solution of the constraint.
pub fn decide_bounded_syntactic(c: &ClosedConstraint, pair: OrderPair, low: &[Tagged], high: &[Tagged]) -> bool {
    match pair.bound_check() {
        BoundCheck::Cover(order) => decide_order_syntactic(c, order, high, low, false),
        BoundCheck::SomeArc => high.iter().any(|&h| low.iter().any(|&l| tagged_rel(c, h, l, false))),
        BoundCheck::AllArcs => high.iter().all(|&h| low.iter().all(|&l| tagged_rel(c, h, l, false))),
    }
}
