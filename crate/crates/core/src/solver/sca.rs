use std::collections::BTreeMap;
use std::time::Instant;

use log::debug;

use crate::allocation::Allocation;
use crate::reformulation::{
    build_subproblem, from_log_domain, log_throughput, LogPoint, PowerVars, TimeVars, VarLayout,
};
use crate::scenario::Scenario;
use crate::sensing::{build_tables, fim, SensingTables};

use super::barrier;
use super::{init_feasible, Scheme, SolveReport, SolverConfig, SolverError, Status};

/// Relative tolerance of the final feasibility audit.
pub const AUDIT_TOL: f64 = 1e-6;

fn min_log_throughput(scenario: &Scenario, point: &LogPoint) -> f64 {
    let prm = &scenario.params;
    (0..scenario.num_users())
        .map(|m| {
            log_throughput(
                point.u[m],
                point.v[m],
                scenario.h_bs_user[m],
                prm.sigma2,
                prm.bandwidth,
            )
        })
        .fold(f64::INFINITY, f64::min)
}

fn finish(
    scenario: &Scenario,
    tables: &SensingTables,
    status: Status,
    trace: Vec<f64>,
    alloc: Allocation,
    outer_iterations: usize,
    timing: BTreeMap<String, f64>,
) -> Result<SolveReport, SolverError> {
    let audit = alloc.audit(scenario, tables);
    if !audit.passes(AUDIT_TOL) {
        return Err(SolverError::AuditFailed {
            worst: audit.worst,
            violation: audit.max_violation,
        });
    }
    let prm = &scenario.params;
    let crb_per_target = (0..tables.targets.len())
        .map(|n| fim(&alloc.p, prm.p0, tables, n).crb_trace().value())
        .collect();
    Ok(SolveReport {
        status,
        objective_trace: trace,
        throughput_per_user: alloc.throughputs(scenario),
        allocation: Some(alloc),
        crb_per_target,
        timing_ms: Some(timing),
        outer_iterations,
    })
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the outer loop for an arbitrary variable layout.
///
/// Each round linearizes the CRB constraints at the incumbent powers, solves
/// the resulting convex program from the incumbent and accepts the result if
/// it raises the minimum throughput. Fixed-power layouts have no CRB
/// residuals and finish after a single round.
pub fn solve_with_layout(
    scenario: &Scenario,
    tables: &SensingTables,
    layout: VarLayout,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    config.validate()?;
    let started = Instant::now();
    let mut timing = BTreeMap::new();

    let Some(init) = init_feasible(scenario, tables, &layout, config) else {
        debug!("no feasible starting point");
        let mut report = SolveReport::infeasible();
        timing.insert("init".to_string(), ms_since(started));
        report.timing_ms = Some(timing);
        return Ok(report);
    };
    timing.insert("init".to_string(), ms_since(started));

    let solve_started = Instant::now();
    let mut point = init;
    let mut alloc = from_log_domain(&point);
    let mut best = alloc.min_throughput(scenario);
    let mut trace = vec![best];
    let mut status = Status::MaxIters;
    let mut rounds = 0;
    let single_round = matches!(layout.power, PowerVars::Fixed(_));

    while rounds < config.max_outer_iters {
        rounds += 1;
        let sub = build_subproblem(scenario, tables, layout, &point.v, config.t0_floor);
        let s_start = min_log_throughput(scenario, &point) - 1.0;
        let start = layout.pack(&point, s_start);
        let sol = barrier::solve(&sub.program, &start, &config.barrier)?;
        let (next, _) = layout.unpack(&sol.x);
        let next_alloc = from_log_domain(&next);
        let value = next_alloc.min_throughput(scenario);
        debug!(
            "round {rounds}: min throughput {value:.6e} bits ({} Newton steps, gap {:.1e})",
            sol.newton_iters, sol.duality_gap
        );
        if !(value > best) {
            status = Status::Converged;
            break;
        }
        let improvement = (value - best) / best.abs().max(1.0);
        point = next;
        alloc = next_alloc;
        best = value;
        trace.push(value);
        if single_round || improvement < config.lambda_th {
            status = Status::Converged;
            break;
        }
    }
    timing.insert("solve".to_string(), ms_since(solve_started));
    timing.insert("total".to_string(), ms_since(started));
    finish(scenario, tables, status, trace, alloc, rounds, timing)
}

/// Joint time and power allocation.
pub fn sca_solve(scenario: &Scenario, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    let tables = build_tables(scenario)?;
    solve_with_layout(
        scenario,
        &tables,
        VarLayout::proposed(scenario.num_users()),
        config,
    )
}

/// Benchmark with one slot duration shared by every user.
pub fn solve_equal_time(
    scenario: &Scenario,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let tables = build_tables(scenario)?;
    let layout = VarLayout {
        num_users: scenario.num_users(),
        time: TimeVars::Shared,
        power: PowerVars::Free,
    };
    solve_with_layout(scenario, &tables, layout, config)
}

/// Benchmark with every user transmitting at the power cap.
pub fn solve_max_power(
    scenario: &Scenario,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let tables = build_tables(scenario)?;
    let layout = VarLayout {
        num_users: scenario.num_users(),
        time: TimeVars::PerUser,
        power: PowerVars::Fixed(scenario.params.p_max),
    };
    solve_with_layout(scenario, &tables, layout, config)
}

pub fn solve_scheme(
    scheme: Scheme,
    scenario: &Scenario,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    match scheme {
        Scheme::Proposed => sca_solve(scenario, config),
        Scheme::EqualTime => solve_equal_time(scenario, config),
        Scheme::MaxPower => solve_max_power(scenario, config),
    }
}
