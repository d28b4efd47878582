//! Log-domain form of the allocation problem.
//!
//! Slot durations and powers are replaced by `u = ln t` and `v = ln p`; the
//! throughput objective is replaced by its logarithm, which is jointly
//! concave in `(u, v)`. `t0` stays in the natural domain.

mod crb;
mod subproblem;

pub use crb::{ftilde, ftilde_gradient, ftilde_linearized, LinearizedCrb};
pub use subproblem::{
    build_subproblem, PowerTerm, PowerVars, Residual, ResidualKind, Subproblem, TimeVars, VarLayout,
};

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::allocation::Allocation;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("{what} must be positive for the log transform, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

/// Decision variables in the log domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPoint {
    pub t0: f64,
    /// Log slot durations.
    pub u: Vec<f64>,
    /// Log powers.
    pub v: Vec<f64>,
}

pub fn to_log_domain(alloc: &Allocation) -> Result<LogPoint, DomainError> {
    let log = |what, x: f64| {
        if x > 0.0 {
            Ok(x.ln())
        } else {
            Err(DomainError::NonPositive { what, value: x })
        }
    };
    if !(alloc.t0 > 0.0) {
        return Err(DomainError::NonPositive {
            what: "t0",
            value: alloc.t0,
        });
    }
    Ok(LogPoint {
        t0: alloc.t0,
        u: alloc
            .t
            .iter()
            .map(|&t| log("slot duration", t))
            .collect::<Result<_, _>>()?,
        v: alloc
            .p
            .iter()
            .map(|&p| log("power", p))
            .collect::<Result<_, _>>()?,
    })
}

pub fn from_log_domain(point: &LogPoint) -> Allocation {
    Allocation {
        t0: point.t0,
        t: point.u.iter().map(|u| u.exp()).collect(),
        p: point.v.iter().map(|v| v.exp()).collect(),
    }
}

/// `ln(log2(1 + e^(v + log_gain)))` and its first two derivatives in `v`,
/// where `log_gain = ln(h / sigma^2)`.
pub(crate) fn log_spectral_efficiency(v: f64, log_gain: f64) -> (f64, f64, f64) {
    let x = (v + log_gain).exp();
    let l = x.ln_1p();
    let q = x / (1.0 + x);
    let value = l.ln() - LN_2.ln();
    let d1 = q / l;
    // q ((1 - q) L - q) / L^2, with (1 - q) L - q = (L - x) / (1 + x)
    let d2 = q * ((l - x) / (1.0 + x)) / (l * l);
    (value, d1, d2)
}

/// Natural log of the slot throughput in bits, as a function of the log
/// duration `u` and log power `v`.
pub fn log_throughput(u: f64, v: f64, h: f64, sigma2: f64, bandwidth: f64) -> f64 {
    u + bandwidth.ln() + log_spectral_efficiency(v, (h / sigma2).ln()).0
}

/// Gradient and Hessian of [`log_throughput`] in `(u, v)`.
pub fn log_throughput_derivs(
    _u: f64,
    v: f64,
    h: f64,
    sigma2: f64,
    _bandwidth: f64,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let (_, d1, d2) = log_spectral_efficiency(v, (h / sigma2).ln());
    ([1.0, d1], [[0.0, 0.0], [0.0, d2]])
}
