//! Range-based localization geometry, Fisher information and the CRB
//! constraint polynomial.
//!
//! Transmitter index `0` is the BS (monostatic path), indices `1..=M` are the
//! users (bistatic path back to the BS). User-only quantities (`alpha`,
//! `beta`, `phi`) are indexed from 0 by user, i.e. entry `j` belongs to
//! transmitter `j + 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{distance, Point, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("target at ({0}, {1}) coincides with a path endpoint")]
    CoincidentPoints(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeMode {
    /// Transmitter -> target -> BS with distinct endpoints.
    Bistatic,
    /// BS -> target -> BS.
    Monostatic,
}

fn unit_from(target: Point, from: Point) -> Result<[f64; 2], GeometryError> {
    let d = distance(from, target);
    if !(d > 0.0) {
        return Err(GeometryError::CoincidentPoints(target[0], target[1]));
    }
    Ok([(from[0] - target[0]) / d, (from[1] - target[1]) / d])
}

pub fn round_trip_distance(
    tx: Point,
    bs: Point,
    target: Point,
    mode: RangeMode,
) -> Result<f64, GeometryError> {
    let d_bs = distance(bs, target);
    if !(d_bs > 0.0) {
        return Err(GeometryError::CoincidentPoints(target[0], target[1]));
    }
    match mode {
        RangeMode::Monostatic => Ok(2.0 * d_bs),
        RangeMode::Bistatic => {
            let d_tx = distance(tx, target);
            if !(d_tx > 0.0) {
                return Err(GeometryError::CoincidentPoints(target[0], target[1]));
            }
            Ok(d_tx + d_bs)
        }
    }
}

/// Gradient of the round-trip distance with respect to the target position.
pub fn range_gradient(
    tx: Point,
    bs: Point,
    target: Point,
    mode: RangeMode,
) -> Result<[f64; 2], GeometryError> {
    let e_bs = unit_from(target, bs)?;
    match mode {
        RangeMode::Monostatic => Ok([-2.0 * e_bs[0], -2.0 * e_bs[1]]),
        RangeMode::Bistatic => {
            let e_tx = unit_from(target, tx)?;
            Ok([-e_tx[0] - e_bs[0], -e_tx[1] - e_bs[1]])
        }
    }
}

/// Range-information coefficient `8 pi^2 W^2 h / (sigma^2 c^2)`.
pub fn sensing_coefficient(bandwidth: f64, h: f64, sigma2: f64, c: f64) -> f64 {
    8.0 * PI * PI * bandwidth * bandwidth * h / (sigma2 * c * c)
}

/// Precomputed coefficients for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTables {
    /// Range-gradient components per transmitter, length `M + 1`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Sensing coefficient per transmitter, length `M + 1`.
    pub k: Vec<f64>,
    /// Linear user coefficients, length `M`.
    pub alpha: Vec<f64>,
    /// Constant contributed by the BS at its fixed power.
    pub mu: f64,
    /// Pairwise user coefficients, dense row-major `M x M`.
    pub beta: Vec<f64>,
    /// BS-user cross coefficients, length `M`.
    pub phi: Vec<f64>,
}

impl TargetTables {
    pub fn num_users(&self) -> usize {
        self.alpha.len()
    }

    #[inline]
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[i * self.alpha.len() + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTables {
    pub num_users: usize,
    pub targets: Vec<TargetTables>,
}

/// Squared cross product `(x_i y_j - x_j y_i)^2`.
fn cross_sq(xi: f64, yi: f64, xj: f64, yj: f64) -> f64 {
    let c = xi * yj - xj * yi;
    c * c
}

pub fn build_tables(scenario: &Scenario) -> Result<SensingTables, GeometryError> {
    let p = &scenario.params;
    let m = scenario.num_users();
    let mut targets = Vec::with_capacity(scenario.num_targets());
    for (n, q) in scenario.target_pos.iter().enumerate() {
        let mut x = Vec::with_capacity(m + 1);
        let mut y = Vec::with_capacity(m + 1);
        let mut k = Vec::with_capacity(m + 1);
        for tx in 0..=m {
            let (pos, mode) = if tx == 0 {
                (scenario.bs_pos, RangeMode::Monostatic)
            } else {
                (scenario.user_pos[tx - 1], RangeMode::Bistatic)
            };
            let g = range_gradient(pos, scenario.bs_pos, *q, mode)?;
            x.push(g[0]);
            y.push(g[1]);
            k.push(sensing_coefficient(
                p.bandwidth,
                scenario.h_to_target[tx][n],
                p.sigma2,
                p.c,
            ));
        }

        let alpha = (1..=m)
            .map(|i| k[i] * (x[i] * x[i] + y[i] * y[i]))
            .collect();
        let mu = p.p0 * k[0] * (x[0] * x[0] + y[0] * y[0]);
        let mut beta = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (i + 1, j + 1);
                let v = k[a] * k[b] * cross_sq(x[a], y[a], x[b], y[b]);
                beta[i * m + j] = v;
                beta[j * m + i] = v;
            }
        }
        let phi = (1..=m)
            .map(|i| k[0] * k[i] * cross_sq(x[0], y[0], x[i], y[i]))
            .collect();
        targets.push(TargetTables {
            x,
            y,
            k,
            alpha,
            mu,
            beta,
            phi,
        });
    }
    Ok(SensingTables {
        num_users: m,
        targets,
    })
}

/// Entries of the 2x2 Fisher information matrix `[[a, c], [c, b]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fim2x2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrbTrace {
    Finite(f64),
    Singular,
}

impl CrbTrace {
    pub fn value(self) -> Option<f64> {
        match self {
            CrbTrace::Finite(v) => Some(v),
            CrbTrace::Singular => None,
        }
    }
}

impl Fim2x2 {
    pub fn det(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    fn pd_cutoff(&self) -> f64 {
        1e-12 * (self.a * self.b).max(1.0)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.det() > self.pd_cutoff()
    }

    /// Trace of the inverse, or `Singular` when the determinant is below
    /// `1e-12 * max(1, a*b)`.
    pub fn crb_trace(&self) -> CrbTrace {
        let det = self.det();
        if det > self.pd_cutoff() {
            CrbTrace::Finite((self.a + self.b) / det)
        } else {
            CrbTrace::Singular
        }
    }
}

/// Fisher information for target `n` with user powers `p` and BS power `p0`.
pub fn fim(p: &[f64], p0: f64, tables: &SensingTables, n: usize) -> Fim2x2 {
    let t = &tables.targets[n];
    let mut out = Fim2x2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };
    for tx in 0..t.k.len() {
        let w = if tx == 0 { p0 } else { p[tx - 1] } * t.k[tx];
        out.a += w * t.x[tx] * t.x[tx];
        out.b += w * t.y[tx] * t.y[tx];
        out.c += w * t.x[tx] * t.y[tx];
    }
    out
}

/// The CRB constraint polynomial `A + B - eta (AB - C^2)` written in the
/// user powers; non-positive exactly when the CRB trace is within `eta`.
pub fn fn_value(p: &[f64], tables: &SensingTables, eta: f64, p0: f64, n: usize) -> f64 {
    let t = &tables.targets[n];
    let m = t.num_users();
    let linear: f64 = t.alpha.iter().zip(p).map(|(a, p)| a * p).sum();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += t.beta(i, j) * p[i] * p[j];
        }
    }
    let cross: f64 = t.phi.iter().zip(p).map(|(f, p)| f * p).sum();
    linear + t.mu - 0.5 * eta * quad - eta * p0 * cross
}
