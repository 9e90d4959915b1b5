use std::collections::BTreeMap;
use std::fmt;
use std::ops::Not;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }
}

/// A signed literal in DIMACS convention: `v` or `-v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn from_dimacs(value: i32) -> Lit {
        assert!(value != 0, "literal 0 is the DIMACS clause terminator");
        Lit(value)
    }

    pub fn dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Truth value of this literal under a total assignment indexed by
    /// `Var::index`.
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var().index()] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unsigned integer encoded by its bits, least significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVec(pub Vec<Lit>);

impl BitVec {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn eval(&self, model: &[bool]) -> u64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, l)| if l.eval(model) { 1u64 << i } else { 0 })
            .sum()
    }
}

/// Number of bits needed to give `n` objects distinct unsigned codes.
pub fn bits_for(n: usize) -> usize {
    let mut w = 0;
    while (1usize << w) < n {
        w += 1;
    }
    w
}

/// A CNF formula under construction.
///
/// Variable 1 is reserved for the constant `true` (a unit clause pins it),
/// which lets every gate constructor fold constants eagerly.
#[derive(Debug, Clone)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    names: BTreeMap<String, Var>,
    has_constant: bool,
}

impl Default for Cnf {
    fn default() -> Self {
        Self::new()
    }
}

impl Cnf {
    pub fn new() -> Cnf {
        let mut cnf = Cnf {
            num_vars: 0,
            clauses: Vec::new(),
            names: BTreeMap::new(),
            has_constant: true,
        };
        let t = cnf.new_var();
        cnf.clauses.push(vec![t.pos()]);
        cnf.names.insert("true".to_string(), t);
        cnf
    }

    /// Builds a plain clause set (no reserved constant) from DIMACS data.
    pub fn from_clauses(num_vars: u32, clauses: Vec<Vec<Lit>>) -> Cnf {
        Cnf {
            num_vars,
            clauses,
            names: BTreeMap::new(),
            has_constant: false,
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn names(&self) -> &BTreeMap<String, Var> {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.names.get(name).copied()
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars)
    }

    /// Allocates a variable and records it in the name table.
    ///
    /// Panics if the name is already taken; names are structural keys and a
    /// collision is an encoder bug.
    pub fn named_var(&mut self, name: impl Into<String>) -> Var {
        let name = name.into();
        let v = self.new_var();
        let prev = self.names.insert(name.clone(), v);
        assert!(prev.is_none(), "duplicate CNF variable name {name}");
        v
    }

    pub fn true_lit(&self) -> Lit {
        Lit(1)
    }

    pub fn false_lit(&self) -> Lit {
        Lit(-1)
    }

    pub fn constant(&self, value: bool) -> Lit {
        if value {
            self.true_lit()
        } else {
            self.false_lit()
        }
    }

    fn is_true(&self, l: Lit) -> bool {
        self.has_constant && l == self.true_lit()
    }

    fn is_false(&self, l: Lit) -> bool {
        self.has_constant && l == self.false_lit()
    }

    pub fn add_clause(&mut self, clause: impl IntoIterator<Item = Lit>) {
        let mut c: Vec<Lit> = Vec::new();
        for l in clause {
            if self.is_true(l) {
                return;
            }
            if self.is_false(l) {
                continue;
            }
            assert!(l.var().0 <= self.num_vars, "literal {l} not allocated");
            if c.contains(&!l) {
                return;
            }
            if !c.contains(&l) {
                c.push(l);
            }
        }
        self.clauses.push(c);
    }

    pub fn assert_lit(&mut self, l: Lit) {
        self.add_clause([l]);
    }

    pub fn and(&mut self, lits: &[Lit]) -> Lit {
        let mut ins: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            if self.is_false(l) || ins.contains(&!l) {
                return self.false_lit();
            }
            if !self.is_true(l) && !ins.contains(&l) {
                ins.push(l);
            }
        }
        match ins.len() {
            0 => self.true_lit(),
            1 => ins[0],
            _ => {
                let out = self.new_var().pos();
                for &l in &ins {
                    self.clauses.push(vec![!out, l]);
                }
                let mut big: Vec<Lit> = ins.iter().map(|&l| !l).collect();
                big.push(out);
                self.clauses.push(big);
                out
            }
        }
    }

    pub fn or(&mut self, lits: &[Lit]) -> Lit {
        let negated: Vec<Lit> = lits.iter().map(|&l| !l).collect();
        !self.and(&negated)
    }

    pub fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        self.and(&[a, b])
    }

    pub fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        self.or(&[a, b])
    }

    pub fn implies(&mut self, a: Lit, b: Lit) -> Lit {
        self.or(&[!a, b])
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        if self.is_false(a) {
            return b;
        }
        if self.is_false(b) {
            return a;
        }
        if self.is_true(a) {
            return !b;
        }
        if self.is_true(b) {
            return !a;
        }
        if a == b {
            return self.false_lit();
        }
        if a == !b {
            return self.true_lit();
        }
        let out = self.new_var().pos();
        self.clauses.push(vec![!out, a, b]);
        self.clauses.push(vec![!out, !a, !b]);
        self.clauses.push(vec![out, !a, b]);
        self.clauses.push(vec![out, a, !b]);
        out
    }

    pub fn iff(&mut self, a: Lit, b: Lit) -> Lit {
        !self.xor(a, b)
    }

    /// Adds clauses forcing `a <-> b`.
    pub fn equate(&mut self, a: Lit, b: Lit) {
        self.add_clause([!a, b]);
        self.add_clause([a, !b]);
    }

    /// Adds clauses forcing `a -> b`.
    pub fn imply(&mut self, a: Lit, b: Lit) {
        self.add_clause([!a, b]);
    }

    /// Sequential at-most-one over `lits`, active only when `guard` is false.
    pub fn at_most_one_unless(&mut self, guard: Lit, lits: &[Lit]) {
        if lits.len() <= 1 {
            return;
        }
        if lits.len() <= 4 {
            for i in 0..lits.len() {
                for j in i + 1..lits.len() {
                    self.add_clause([guard, !lits[i], !lits[j]]);
                }
            }
            return;
        }
        // Sinz's sequential counter: s_i means "some of lits[0..=i] is true".
        let mut prev = lits[0];
        for &l in &lits[1..] {
            self.add_clause([guard, !prev, !l]);
            let s = self.new_var().pos();
            self.add_clause([!prev, s]);
            self.add_clause([!l, s]);
            prev = s;
        }
    }

    pub fn new_bitvec(&mut self, name: &str, width: usize) -> BitVec {
        BitVec(
            (0..width)
                .map(|i| self.named_var(format!("{name}[{i}]")).pos())
                .collect(),
        )
    }

    pub fn const_bitvec(&self, value: u64, width: usize) -> BitVec {
        BitVec(
            (0..width)
                .map(|i| self.constant(value >> i & 1 == 1))
                .collect(),
        )
    }

    /// `a > b` over unsigned values; operands are zero-extended to a common width.
    pub fn bv_gt(&mut self, a: &BitVec, b: &BitVec) -> Lit {
        let w = a.width().max(b.width());
        let f = self.false_lit();
        let bit = |v: &BitVec, i: usize| v.0.get(i).copied().unwrap_or(f);
        let mut gt = self.false_lit();
        for i in 0..w {
            let (ai, bi) = (bit(a, i), bit(b, i));
            let here = self.and2(ai, !bi);
            let same = self.iff(ai, bi);
            let carry = self.and2(same, gt);
            gt = self.or2(here, carry);
        }
        gt
    }

    pub fn bv_ge(&mut self, a: &BitVec, b: &BitVec) -> Lit {
        !self.bv_gt(b, a)
    }

    pub fn bv_lt(&mut self, a: &BitVec, b: &BitVec) -> Lit {
        self.bv_gt(b, a)
    }

    pub fn bv_ne(&mut self, a: &BitVec, b: &BitVec) -> Lit {
        let w = a.width().max(b.width());
        let f = self.false_lit();
        let bit = |v: &BitVec, i: usize| v.0.get(i).copied().unwrap_or(f);
        let diffs: Vec<(Lit, Lit)> = (0..w).map(|i| (bit(a, i), bit(b, i))).collect();
        let xs: Vec<Lit> = diffs.into_iter().map(|(x, y)| self.xor(x, y)).collect();
        self.or(&xs)
    }

    /// True when every clause has a true literal under `model`.
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        model.len() >= self.num_vars as usize
            && self
                .clauses
                .iter()
                .all(|c| c.iter().any(|l| l.eval(model)))
    }

    /// First clause violated by `model`, if any.
    pub fn first_violation(&self, model: &[bool]) -> Option<usize> {
        self.clauses
            .iter()
            .position(|c| !c.iter().any(|l| l.eval(model)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_models(n: u32) -> impl Iterator<Item = Vec<bool>> {
        (0..1u64 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
    }

    /// For every assignment of the inputs, the clauses admit exactly one
    /// value of the gate output and it equals `expected`.
    fn check_gate(build: impl Fn(&mut Cnf, &[Lit]) -> Lit, arity: u32, expected: impl Fn(&[bool]) -> bool) {
        let mut cnf = Cnf::new();
        let ins: Vec<Lit> = (0..arity).map(|_| cnf.new_var().pos()).collect();
        let out = build(&mut cnf, &ins);
        let n = cnf.num_vars();
        for inputs in all_models(arity) {
            let mut outs = std::collections::BTreeSet::new();
            for m in all_models(n) {
                if !m[0] || ins.iter().zip(&inputs).any(|(l, &v)| l.eval(&m) != v) {
                    continue;
                }
                if cnf.satisfied_by(&m) {
                    outs.insert(out.eval(&m));
                }
            }
            assert_eq!(outs.into_iter().collect::<Vec<_>>(), vec![expected(&inputs)], "inputs {inputs:?}");
        }
    }

    #[test]
    fn gates_are_faithful() {
        check_gate(|c, i| c.and(i), 3, |v| v.iter().all(|&b| b));
        check_gate(|c, i| c.or(i), 3, |v| v.iter().any(|&b| b));
        check_gate(|c, i| c.xor(i[0], i[1]), 2, |v| v[0] ^ v[1]);
        check_gate(|c, i| c.iff(i[0], i[1]), 2, |v| v[0] == v[1]);
        check_gate(|c, i| c.implies(i[0], i[1]), 2, |v| !v[0] || v[1]);
    }

    #[test]
    fn comparators_match_integers() {
        let val = |v: &[bool]| v.iter().enumerate().map(|(i, &b)| (b as u32) << i).sum::<u32>();
        for (wa, wb) in [(2, 2), (3, 1), (1, 3), (0, 2)] {
            let split = move |v: &[bool]| (val(&v[..wa]), val(&v[wa..wa + wb]));
            let mk = |_: &mut Cnf, i: &[Lit]| (BitVec(i[..wa].to_vec()), BitVec(i[wa..].to_vec()));
            let ar = (wa + wb) as u32;
            check_gate(|c, i| { let (a, b) = mk(c, i); c.bv_gt(&a, &b) }, ar, |v| { let (a, b) = split(v); a > b });
            check_gate(|c, i| { let (a, b) = mk(c, i); c.bv_ge(&a, &b) }, ar, |v| { let (a, b) = split(v); a >= b });
            check_gate(|c, i| { let (a, b) = mk(c, i); c.bv_ne(&a, &b) }, ar, |v| { let (a, b) = split(v); a != b });
        }
    }

    #[test]
    fn constants_fold() {
        let mut cnf = Cnf::new();
        let a = cnf.new_var().pos();
        let t = cnf.true_lit();
        let f = cnf.false_lit();
        assert_eq!(cnf.and(&[a, t]), a);
        assert_eq!(cnf.and(&[a, f]), f);
        assert_eq!(cnf.or(&[a, t]), t);
        assert_eq!(cnf.and(&[]), t);
        assert_eq!(cnf.xor(a, a), f);
        let before = cnf.clauses().len();
        cnf.add_clause([a, t]);
        assert_eq!(cnf.clauses().len(), before);
    }

    #[test]
    fn at_most_one_respects_guard() {
        for n in [3usize, 6] {
            let mut cnf = Cnf::new();
            let g = cnf.new_var().pos();
            let xs: Vec<Lit> = (0..n).map(|_| cnf.new_var().pos()).collect();
            cnf.at_most_one_unless(g, &xs);
            let nv = cnf.num_vars();
            let mut seen = std::collections::BTreeSet::new();
            for m in all_models(nv) {
                if m[0] && cnf.satisfied_by(&m) {
                    let cnt = xs.iter().filter(|l| l.eval(&m)).count();
                    seen.insert((g.eval(&m), cnt));
                }
            }
            assert!(seen.iter().all(|&(gv, c)| gv || c <= 1));
            assert!(seen.contains(&(true, n)));
            assert!(seen.contains(&(false, 1)));
        }
    }

    #[test]
    fn bits_for_small_counts() {
        assert_eq!(bits_for(0), 0);
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(5), 3);
        assert_eq!(bits_for(8), 3);
    }
}
