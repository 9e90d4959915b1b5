//! Embedded CDCL solver: two-watched-literal propagation, first-UIP clause
//! learning, activity-based branching with index tie-breaking, phase saving
//! and Luby restarts.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};

use crate::cnf::{Cnf, Lit};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Sat(Vec<bool>),
    Unsat,
    /// The deadline passed or the cancel flag was raised.
    Interrupted,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
}

const UNASSIGNED: i8 = 0;

fn code(l: Lit) -> usize {
    let v = l.var().index();
    2 * v + usize::from(!l.is_positive())
}

pub struct Solver<'a> {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    value: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    bump: f64,
    phase: Vec<bool>,
    seen: Vec<bool>,
    deadline: Option<Instant>,
    cancel: Option<&'a AtomicBool>,
    pub stats: Stats,
}

impl<'a> Solver<'a> {
    /// `seed` perturbs the initial branching activities; `None` keeps the
    /// plain lowest-index-first order.
    pub fn new(cnf: &Cnf, seed: Option<u64>) -> Solver<'a> {
        let n = cnf.num_vars() as usize;
        let mut activity = vec![0.0; n];
        if let Some(seed) = seed {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            for a in activity.iter_mut() {
                *a = rng.gen::<f64>() * 1e-3;
            }
        }
        Solver {
            num_vars: n,
            clauses: Vec::with_capacity(cnf.clauses().len()),
            watches: vec![Vec::new(); 2 * n],
            value: vec![UNASSIGNED; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            bump: 1.0,
            phase: vec![false; n],
            seen: vec![false; n],
            deadline: None,
            cancel: None,
            stats: Stats::default(),
        }
        .with_clauses(cnf)
    }

    fn with_clauses(mut self, cnf: &Cnf) -> Self {
        for c in cnf.clauses() {
            self.clauses.push(c.clone());
        }
        self
    }

    pub fn deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn cancel_flag(mut self, flag: Option<&'a AtomicBool>) -> Self {
        self.cancel = flag;
        self
    }

    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.value[l.var().index()];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn assign(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var().index();
        self.value[v] = if l.is_positive() { 1 } else { -1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn interrupted(&self) -> bool {
        if let Some(flag) = self.cancel {
            if flag.load(Ordering::Relaxed) {
                return true;
            }
        }
        matches!(self.deadline, Some(d) if Instant::now() >= d)
    }

    /// Attaches clause `ci` (length >= 2) on its first two literals.
    fn watch(&mut self, ci: usize) {
        let (a, b) = (self.clauses[ci][0], self.clauses[ci][1]);
        self.watches[code(!a)].push(ci);
        self.watches[code(!b)].push(ci);
    }

    /// Returns the index of a conflicting clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            // Clauses watching !p: p just became true, so !p is false.
            let ws = std::mem::take(&mut self.watches[code(p)]);
            let mut keep = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let false_lit = !p;
            let mut idx = 0;
            while idx < ws.len() {
                let ci = ws[idx];
                idx += 1;
                if conflict.is_some() {
                    keep.push(ci);
                    continue;
                }
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if self.lit_value_raw(first) == 1 {
                    keep.push(ci);
                    continue;
                }
                let mut moved = false;
                for k in 2..self.clauses[ci].len() {
                    let l = self.clauses[ci][k];
                    if self.lit_value_raw(l) != -1 {
                        self.clauses[ci].swap(1, k);
                        let nw = self.clauses[ci][1];
                        self.watches[code(!nw)].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                keep.push(ci);
                if self.lit_value_raw(first) == -1 {
                    conflict = Some(ci);
                } else {
                    self.assign(first, Some(ci));
                }
            }
            // Entries added to this list during the scan (none can be, since
            // a clause never re-watches the literal it just left) are kept.
            let mut rest = std::mem::take(&mut self.watches[code(p)]);
            keep.append(&mut rest);
            self.watches[code(p)] = keep;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn lit_value_raw(&self, l: Lit) -> i8 {
        self.lit_value(l)
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.bump;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.bump *= 1e-100;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit::from_dimacs(1)];
        let mut counter = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level();
        loop {
            let clause = self.clauses[confl].clone();
            let start = usize::from(p.is_some());
            for &q in &clause[start..] {
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().index()] = false;
            counter -= 1;
            if counter == 0 {
                break;
            }
            confl = self.reason[pl.var().index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();
        for l in &learnt[1..] {
            self.seen[l.var().index()] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var().index()];
        }
        self.bump *= 1.0 / 0.95;
        (learnt, bt)
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            self.phase[v] = l.is_positive();
            self.value[v] = UNASSIGNED;
            self.reason[v] = None;
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_branch(&self) -> Option<Lit> {
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars {
            if self.value[v] == UNASSIGNED {
                match best {
                    Some(b) if self.activity[b] >= self.activity[v] => {}
                    _ => best = Some(v),
                }
            }
        }
        best.map(|v| {
            let l = crate::cnf::Var(v as u32 + 1).pos();
            if self.phase[v] {
                l
            } else {
                !l
            }
        })
    }

    fn luby(mut i: u64) -> u64 {
        // Luby sequence 1,1,2,1,1,2,4,... (0-based index).
        let mut size = 1u64;
        let mut seq = 0u32;
        while size < i + 1 {
            seq += 1;
            size = 2 * size + 1;
        }
        while size - 1 != i {
            size = (size - 1) >> 1;
            seq -= 1;
            i %= size;
        }
        1u64 << seq
    }

    pub fn solve(mut self) -> (Outcome, Stats) {
        // Load clauses: units are enqueued, empty clause means UNSAT.
        let mut units = Vec::new();
        for ci in 0..self.clauses.len() {
            match self.clauses[ci].len() {
                0 => return (Outcome::Unsat, self.stats),
                1 => units.push(self.clauses[ci][0]),
                _ => self.watch(ci),
            }
        }
        for u in units {
            match self.lit_value(u) {
                1 => {}
                -1 => return (Outcome::Unsat, self.stats),
                _ => self.assign(u, None),
            }
        }
        let mut restart_round = 0u64;
        let mut conflicts_until_restart = 100 * Self::luby(0);
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    return (Outcome::Unsat, self.stats);
                }
                let (learnt, bt) = self.analyze(confl);
                self.backtrack(bt);
                if learnt.len() == 1 {
                    self.assign(learnt[0], None);
                } else {
                    self.clauses.push(learnt);
                    let ci = self.clauses.len() - 1;
                    self.watch(ci);
                    let first = self.clauses[ci][0];
                    self.assign(first, Some(ci));
                }
                if self.stats.conflicts.is_multiple_of(256) && self.interrupted() {
                    return (Outcome::Interrupted, self.stats);
                }
                conflicts_until_restart = conflicts_until_restart.saturating_sub(1);
                if conflicts_until_restart == 0 {
                    restart_round += 1;
                    conflicts_until_restart = 100 * Self::luby(restart_round);
                    self.backtrack(0);
                }
            } else {
                match self.pick_branch() {
                    None => {
                        let model = self.value.iter().map(|&v| v == 1).collect();
                        return (Outcome::Sat(model), self.stats);
                    }
                    Some(l) => {
                        self.stats.decisions += 1;
                        if self.stats.decisions.is_multiple_of(1024) && self.interrupted() {
                            return (Outcome::Interrupted, self.stats);
                        }
                        self.trail_lim.push(self.trail.len());
                        self.assign(l, None);
                    }
                }
            }
        }
    }
}

/// Solves `cnf` with the embedded solver and no resource limits.
pub fn solve_embedded(cnf: &Cnf, seed: Option<u64>) -> Outcome {
    Solver::new(cnf, seed).solve().0
}
