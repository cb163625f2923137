//! dpcert: decide UNSAT by iterated variable elimination and certify the
//! verdict with a lightweight interactive protocol.
//!
//! The solver eliminates variables one at a time, tracking clause
//! multiplicities exactly, so the final formula is either empty (satisfiable)
//! or a counted stack of empty clauses (unsatisfiable). To certify the
//! latter without shipping the whole derivation, the prover encodes each
//! intermediate formula as a polynomial over a random prime field and plays
//! a sum-check-style reduction: one constant-size message per elimination
//! step, ending in a single evaluation of the input formula by the verifier.
//!
//! Module map:
//! - [`formula`]: counted-multiset CNF, DIMACS parsing, assignments
//! - [`dp`]: the elimination procedure, schedules, ordering policies
//! - [`field`]: fixed-width prime fields and prime sampling
//! - [`arith`]: the polynomial encoding, round maps, shape checks
//! - [`wire`]: byte-exact message framing and transports
//! - [`protocol`]: prover/verifier state machines and drivers
//! - [`bench`]: instance generators, proof emission, experiments

pub mod arith;
pub mod bench;
pub mod dp;
pub mod field;
pub mod formula;
pub mod protocol;
pub mod wire;

pub use dp::{solve, OrderPolicy, Trace, Verdict};
pub use formula::{parse_dimacs, Clause, Formula, Literal};
pub use protocol::{run_protocol, Outcome, ProtocolParams, ProverKind, RejectReason};
