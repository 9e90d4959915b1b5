//! Propositional plumbing for the termination prover.
//!
//! [`Cnf`] is a clause store with Tseitin gate constructors and unsigned
//! bit-vector comparators. Formulas are solved either by the embedded
//! [`solver::Solver`] (a CDCL procedure) or by an external binary that speaks
//! the DIMACS competition protocol, see [`backend`].

pub mod backend;
pub mod cnf;
pub mod dimacs;
pub mod solver;

pub use backend::{solve, Backend, SatError, SatResult};
pub use cnf::{BitVec, Cnf, Lit, Var};
