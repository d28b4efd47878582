//! Outer successive-convex-approximation loop, its inner barrier solver,
//! feasible initialization and the two benchmark schemes.

pub mod barrier;
mod init;
mod sca;

pub use barrier::{BarrierConfig, BarrierSolution};
pub use init::init_feasible;
pub use sca::{
    sca_solve, solve_equal_time, solve_max_power, solve_scheme, solve_with_layout, AUDIT_TOL,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::scenario::SystemParams;
use crate::sensing::GeometryError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("start point is not strictly feasible: {detail}")]
    InfeasibleStart { detail: String },

    #[error(
        "line search stalled at barrier weight {barrier_weight:e} (Newton decrement {decrement:e})"
    )]
    LineSearchStall { barrier_weight: f64, decrement: f64 },

    #[error("Newton centering hit its iteration cap at barrier weight {barrier_weight:e} (decrement {decrement:e})")]
    MaxNewtonIters { barrier_weight: f64, decrement: f64 },

    #[error("Newton system is singular at barrier weight {barrier_weight:e}")]
    SingularNewtonSystem { barrier_weight: f64 },

    #[error("final allocation fails the feasibility audit: {worst} violated by {violation:e}")]
    AuditFailed { worst: String, violation: f64 },

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub barrier: BarrierConfig,
    /// Relative improvement below which the outer loop stops.
    pub lambda_th: f64,
    pub max_outer_iters: usize,
    /// Strict lower bound on the power-transfer duration, s.
    pub t0_floor: f64,
    /// Random power vectors tried when the capped powers violate a CRB bound.
    pub init_attempts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            barrier: BarrierConfig::default(),
            lambda_th: 1e-5,
            max_outer_iters: 100,
            t0_floor: 1e-9,
            init_attempts: 64,
        }
    }
}

impl SolverConfig {
    /// Defaults with the stopping threshold taken from the instance.
    pub fn from_params(params: &SystemParams) -> Self {
        Self {
            lambda_th: params.lambda_th,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.barrier.validate().map_err(SolverError::Config)?;
        if !(self.lambda_th > 0.0) || !(self.t0_floor > 0.0) || self.max_outer_iters == 0 {
            return Err(SolverError::Config(
                "lambda_th, t0_floor and max_outer_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIters,
    Infeasible,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "Converged",
            Status::MaxIters => "MaxIters",
            Status::Infeasible => "Infeasible",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Joint optimization of `t0`, every slot duration and every power.
    Proposed,
    /// All users share one slot duration.
    EqualTime,
    /// All users transmit at the power cap.
    MaxPower,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::EqualTime, Scheme::MaxPower];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::EqualTime => "equal-time",
            Scheme::MaxPower => "max-power",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown scheme '{s}' (expected proposed, equal-time or max-power)")
            })
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    /// Minimum throughput in bits at the initial point and after each
    /// accepted outer iteration.
    pub objective_trace: Vec<f64>,
    pub allocation: Option<Allocation>,
    pub throughput_per_user: Vec<f64>,
    /// Trace of the CRB per target in m^2; `None` where the FIM is singular.
    pub crb_per_target: Vec<Option<f64>>,
    /// Wall-clock time per stage.
    pub timing_ms: Option<BTreeMap<String, f64>>,
    /// Number of convex subproblems solved.
    #[serde(skip)]
    pub outer_iterations: usize,
}

impl SolveReport {
    pub fn infeasible() -> Self {
        Self {
            status: Status::Infeasible,
            objective_trace: Vec::new(),
            allocation: None,
            throughput_per_user: Vec::new(),
            crb_per_target: Vec::new(),
            timing_ms: None,
            outer_iterations: 0,
        }
    }

    /// Final minimum throughput in bits, if a solution exists.
    pub fn objective(&self) -> Option<f64> {
        match self.status {
            Status::Infeasible => None,
            _ => self.objective_trace.last().copied(),
        }
    }
}
