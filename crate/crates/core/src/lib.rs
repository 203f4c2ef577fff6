//! Deterministic variable fixing for Lovász Local Lemma instances under the
//! exponential criterion `p < 2^-d`, for variables that affect at most three
//! events, together with a round-based LOCAL-model simulation of the same
//! process. All probabilities are exact rationals.

pub mod cli;
pub mod fixer;
pub mod fixtures;
pub mod format;
pub mod generators;
pub mod instance;
pub mod ledger;
pub mod local_sim;
pub mod order;
pub mod prob;
pub mod rational;
pub mod representable;
pub mod trace;
pub mod verify;

pub use instance::{BadEvent, DependencyGraph, InstanceError, LllInstance, Variable, VariableHypergraph};
pub use prob::{PartialAssignment, ProbEngine, ProbError};
pub use representable::{EdgeSplit, Triple};
