//! Termination proofs for integer monotonicity-constraint transition
//! systems.
//!
//! The prover searches, one strongly connected component at a time, for
//! level mappings built from multiset orders over argument positions. Each
//! mapping anchors some transition rules; anchored rules are removed and the
//! search continues until no cycle is left. The sequence of mappings is
//! emitted as a [`certificate::Certificate`] that [`certificate::verify`]
//! checks without any SAT solving.

pub mod certificate;
pub mod encoder;
pub mod engine;
pub mod io;
pub mod levelmap;
pub mod model;
pub mod oracle;
pub mod orders;

pub use certificate::{verify, Certificate, ReasonCode, VerifyError};
pub use engine::{prove, NotProved, ProofOutcome, ProverConfig};
pub use io::{parse_mcs, render_mcs};
pub use model::{Mcs, RuleId};
