//! Brute-force and finite-difference checks that do not go through the
//! log-domain reformulation or the convex solver.
//!
//! For a fixed power vector the remaining problem in `(t0, t)` is a linear
//! max-min program with a closed-form optimum: equalize `t_m c_m = s`, give
//! `t0` exactly the energy the hungriest user needs, and spend the rest of
//! the budget. With `c_m = W log2(1 + p_m h_m / sigma^2)` and energy rate
//! `k_m = zeta_m h_m p0`,
//!
//! `s* = T_max / (max_m p_m / (c_m k_m) + sum_m 1 / c_m)`.
//!
//! The oracle therefore grids only the powers (log-spaced, with successive
//! zoomed passes around the incumbent) and solves the times exactly.

use thiserror::Error;

use crate::allocation::Allocation;
use crate::scenario::Scenario;
use crate::sensing::{build_tables, fn_value, GeometryError, SensingTables};

/// Largest user count the grid search accepts.
pub const MAX_ORACLE_USERS: usize = 3;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid search is limited to {MAX_ORACLE_USERS} users, scenario has {0}")]
    TooManyUsers(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Grid points per power axis in every pass.
    pub points_per_axis: usize,
    /// Power range of the first pass, W.
    pub p_lo: f64,
    pub p_hi: f64,
    /// Zoomed passes after the first; each spans four steps of the previous
    /// grid around the incumbent.
    pub refinements: usize,
    /// Relative slack allowed on the CRB polynomial.
    pub feas_tol: f64,
    /// Include energy causality (`t_m p_m <= E_m(t0)`).
    pub energy: bool,
    /// Include the CRB bounds.
    pub crb: bool,
    /// Power-transfer duration used when energy causality is switched off.
    pub t0_floor: f64,
}

impl GridSpec {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let p_max = scenario.params.p_max;
        Self {
            points_per_axis: 64,
            p_lo: p_max * 1e-6,
            p_hi: p_max,
            refinements: 4,
            feas_tol: 0.0,
            energy: true,
            crb: true,
            t0_floor: 1e-9,
        }
    }

    fn validate(&self, p_max: f64) -> Result<(), OracleError> {
        if self.points_per_axis < 2 {
            return Err(OracleError::InvalidGrid(
                "need at least 2 points per axis".into(),
            ));
        }
        if !(self.p_lo > 0.0 && self.p_lo < self.p_hi && self.p_hi <= p_max) {
            return Err(OracleError::InvalidGrid(format!(
                "power range [{}, {}] must lie in (0, {p_max}]",
                self.p_lo, self.p_hi
            )));
        }
        if !(self.t0_floor > 0.0) || self.feas_tol < 0.0 {
            return Err(OracleError::InvalidGrid(
                "t0_floor > 0 and feas_tol >= 0 required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub allocation: Allocation,
    /// Minimum throughput in bits.
    pub objective: f64,
    /// Grid points visited over all passes.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Solved(OracleSolution),
    Infeasible,
}

impl OracleOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            OracleOutcome::Solved(s) => Some(s.objective),
            OracleOutcome::Infeasible => None,
        }
    }
}

/// Best `(t0, t)` for fixed powers, from the closed form in the module docs.
pub fn optimal_times(
    scenario: &Scenario,
    p: &[f64],
    energy: bool,
    t0_floor: f64,
) -> Option<Allocation> {
    let prm = &scenario.params;
    let m = scenario.num_users();
    let mut inv_rate_sum = 0.0;
    let mut energy_need = 0.0f64;
    let mut rate = Vec::with_capacity(m);
    for i in 0..m {
        let c = prm.bandwidth * (p[i] * scenario.h_bs_user[i] / prm.sigma2).ln_1p()
            / std::f64::consts::LN_2;
        if !(c > 0.0) {
            return None;
        }
        inv_rate_sum += 1.0 / c;
        energy_need = energy_need.max(p[i] / (c * scenario.harvest_rate(i)));
        rate.push(c);
    }
    let (s, t0) = if energy {
        let s = prm.t_max / (energy_need + inv_rate_sum);
        (s, s * energy_need)
    } else {
        ((prm.t_max - t0_floor) / inv_rate_sum, t0_floor)
    };
    Some(Allocation {
        t0,
        t: rate.iter().map(|c| s / c).collect(),
        p: p.to_vec(),
    })
}

fn crb_ok(p: &[f64], scenario: &Scenario, tables: &SensingTables, tol: f64) -> bool {
    let prm = &scenario.params;
    tables.targets.iter().enumerate().all(|(n, t)| {
        let scale = t.mu + t.alpha.iter().zip(p).map(|(a, p)| a * p).sum::<f64>();
        fn_value(p, tables, prm.eta, prm.p0, n) <= tol * scale
    })
}

/// Exhaustive search over a log-spaced power grid with exact time
/// allocation, refined by zoomed passes around the best point.
pub fn grid_search_solve(
    scenario: &Scenario,
    grid: &GridSpec,
) -> Result<OracleOutcome, OracleError> {
    let m = scenario.num_users();
    if m > MAX_ORACLE_USERS {
        return Err(OracleError::TooManyUsers(m));
    }
    grid.validate(scenario.params.p_max)?;
    let tables = build_tables(scenario)?;
    let n_pts = grid.points_per_axis;
    let (log_lo, log_hi) = (grid.p_lo.ln(), grid.p_hi.ln());

    let mut ranges = vec![(log_lo, log_hi); m];
    let mut best: Option<(f64, Allocation)> = None;
    let mut evaluated = 0;
    let mut idx = vec![0usize; m];
    let mut p = vec![0.0; m];
    for _pass in 0..=grid.refinements {
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(lo, hi)| {
                (0..n_pts)
                    .map(|k| {
                        // the power cap itself must be a grid point
                        if k + 1 == n_pts && hi == log_hi {
                            grid.p_hi
                        } else {
                            (lo + (hi - lo) * k as f64 / (n_pts - 1) as f64).exp()
                        }
                    })
                    .collect()
            })
            .collect();
        idx.iter_mut().for_each(|i| *i = 0);
        'grid: loop {
            for d in 0..m {
                p[d] = axes[d][idx[d]];
            }
            evaluated += 1;
            if !grid.crb || crb_ok(&p, scenario, &tables, grid.feas_tol) {
                if let Some(alloc) = optimal_times(scenario, &p, grid.energy, grid.t0_floor) {
                    let value = alloc.min_throughput(scenario);
                    if best.as_ref().is_none_or(|(b, _)| value > *b) {
                        best = Some((value, alloc));
                    }
                }
            }
            for d in 0..m {
                idx[d] += 1;
                if idx[d] < n_pts {
                    continue 'grid;
                }
                idx[d] = 0;
            }
            break;
        }
        let Some((_, incumbent)) = &best else {
            return Ok(OracleOutcome::Infeasible);
        };
        for d in 0..m {
            let (lo, hi) = ranges[d];
            let half = 2.0 * (hi - lo) / (n_pts - 1) as f64;
            let c = incumbent.p[d].ln();
            ranges[d] = ((c - half).max(log_lo), (c + half).min(log_hi));
        }
    }
    let (objective, allocation) = best.expect("feasible after first pass");
    Ok(OracleOutcome::Solved(OracleSolution {
        allocation,
        objective,
        evaluated,
    }))
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let (hi, lo) = (x[i] + h, x[i] - h);
            probe[i] = hi;
            let up = f(&probe);
            probe[i] = lo;
            let down = f(&probe);
            probe[i] = x[i];
            // divide by the step actually taken after rounding
            (up - down) / (hi - lo)
        })
        .collect()
}

/// Largest per-coordinate gap between a central-difference gradient and the
/// analytic one, relative to `max(1, |analytic|_inf)`.
pub fn finite_diff_check(f: impl Fn(&[f64]) -> f64, analytic: &[f64], x: &[f64], h: f64) -> f64 {
    let fd = central_difference(f, x, h);
    let scale = analytic.iter().fold(1.0f64, |a, g| a.max(g.abs()));
    fd.iter()
        .zip(analytic)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

/// Same check for a Hessian, differencing an analytic gradient row by row.
pub fn finite_diff_hessian_check(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    analytic: &[Vec<f64>],
    x: &[f64],
    h: f64,
) -> f64 {
    let n = x.len();
    let mut probe = x.to_vec();
    let scale = analytic
        .iter()
        .flatten()
        .fold(1.0f64, |a, g| a.max(g.abs()));
    let mut worst = 0.0f64;
    for j in 0..n {
        let (hi, lo) = (x[j] + h, x[j] - h);
        probe[j] = hi;
        let up = grad(&probe);
        probe[j] = lo;
        let down = grad(&probe);
        probe[j] = x[j];
        for i in 0..n {
            let fd = (up[i] - down[i]) / (hi - lo);
            worst = worst.max((fd - analytic[i][j]).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SystemParams;

    #[test]
    fn affine_gradient_is_exact() {
        let f = |x: &[f64]| 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2] + 7.0;
        let err = finite_diff_check(f, &[3.0, -2.0, 0.5], &[0.1, -4.0, 12.0], 1e-3);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn quadratic_hessian() {
        let g = |x: &[f64]| vec![2.0 * x[0] + x[1], x[0] + 4.0 * x[1]];
        let h = vec![vec![2.0, 1.0], vec![1.0, 4.0]];
        assert!(finite_diff_hessian_check(g, &h, &[0.3, -0.2], 1e-5) < 1e-9);
    }

    #[test]
    fn too_many_users_is_refused() {
        let s = Scenario::generate(0, SystemParams::with_sizes(4, 1)).unwrap();
        assert!(matches!(
            grid_search_solve(&s, &GridSpec::for_scenario(&s)),
            Err(OracleError::TooManyUsers(4))
        ));
    }

    #[test]
    fn bad_grid_is_rejected() {
        let s = Scenario::generate(0, SystemParams::with_sizes(1, 1)).unwrap();
        let mut g = GridSpec::for_scenario(&s);
        g.points_per_axis = 1;
        assert!(grid_search_solve(&s, &g).is_err());
        let mut g = GridSpec::for_scenario(&s);
        g.p_hi = 3.0;
        assert!(grid_search_solve(&s, &g).is_err());
    }

    #[test]
    fn closed_form_times_are_tight() {
        let s = Scenario::generate(4, SystemParams::with_sizes(3, 1)).unwrap();
        let p = [0.3, 1.1, 0.02];
        let a = optimal_times(&s, &p, true, 1e-9).unwrap();
        let total = a.t0 + a.t.iter().sum::<f64>();
        assert!((total - s.params.t_max).abs() < 1e-12);
        let r = a.throughputs(&s);
        assert!(r.iter().all(|x| (x - r[0]).abs() <= 1e-9 * r[0]));
        // one user is energy-tight, none is violated
        let mut tight = 0;
        for i in 0..3 {
            let e = s.harvest_rate(i) * a.t0;
            assert!(a.t[i] * a.p[i] <= e * (1.0 + 1e-12));
            if (a.t[i] * a.p[i] - e).abs() <= 1e-12 * e {
                tight += 1;
            }
        }
        assert!(tight >= 1);
        let mut relaxed = s.clone();
        relaxed.params.eta = 1e9;
        assert!(a
            .audit(&relaxed, &build_tables(&relaxed).unwrap())
            .passes(1e-12));
    }
}
