//! Time and power allocation for wireless-powered integrated sensing and
//! communication.
//!
//! A base station first broadcasts power for `t0` seconds; each user then
//! spends its harvested energy in its own slot, sending data to the BS while
//! illuminating a set of targets whose positions the BS estimates from range
//! measurements. The solver maximizes the minimum user throughput subject to
//! the time budget, power caps, energy causality, and an upper bound on the
//! trace of each target's Cramér-Rao bound.
//!
//! Module map:
//! - [`scenario`]: instances and seeded generation
//! - [`sensing`]: range geometry, Fisher information, CRB polynomial
//! - [`allocation`]: natural-domain variables and the feasibility audit
//! - [`reformulation`]: log-domain problem and convex subproblems
//! - [`program`], [`solver`]: barrier method and the outer loop
//! - [`oracle`]: brute-force and finite-difference references

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocation;
pub mod oracle;
pub mod program;
pub mod reformulation;
pub mod scenario;
pub mod sensing;
pub mod solver;

pub use allocation::Allocation;
pub use scenario::{Scenario, SystemParams};
pub use sensing::{build_tables, SensingTables};
pub use solver::{sca_solve, Scheme, SolveReport, SolverConfig, Status};
