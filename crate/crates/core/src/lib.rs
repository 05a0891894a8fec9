//! Explicit-time verification kernel: timed objects with two-state
//! invariants, Deadline and Timer primitives, bounded exhaustive
//! exploration of thread programs, and brute-force admissibility checks.

pub mod admissibility;
pub mod cli;
pub mod corpus;
pub mod exec;
pub mod explorer;
pub mod kernel;
pub mod lang;
pub mod primitives;
pub mod program;
pub mod time;
