use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{error, info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use wpisac_core::oracle::{grid_search_solve, GridSpec, OracleOutcome};
use wpisac_core::solver::{solve_scheme, SolverError};
use wpisac_core::{build_tables, Scenario, Scheme, SolveReport, Status};

use crate::config::{ExperimentConfig, Format, SweepAxis};

/// Relative slack of the sweep monotonicity post-check.
pub const MONOTONE_TOL: f64 = 1e-6;

/// Process exit status, ordered by precedence when several runs combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Converged,
    Infeasible,
    Failed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Converged => 0,
            Outcome::Failed => 1,
            Outcome::Infeasible => 2,
        }
    }

    fn of(result: &Result<SolveReport, SolverError>) -> Self {
        match result {
            Ok(r) => match r.status {
                Status::Converged => Outcome::Converged,
                Status::Infeasible => Outcome::Infeasible,
                Status::MaxIters => Outcome::Failed,
            },
            Err(_) => Outcome::Failed,
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

/// Headers are written explicitly so empty tables still carry them.
fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")
}

fn run_schemes(
    schemes: &[Scheme],
    scenario: &Scenario,
    cfg: &ExperimentConfig,
) -> Vec<Result<SolveReport, SolverError>> {
    let solver = cfg.solver_config(&scenario.params);
    schemes
        .par_iter()
        .map(|&scheme| {
            let mut r = solve_scheme(scheme, scenario, &solver);
            if let Ok(report) = &mut r {
                if !cfg.timing {
                    report.timing_ms = None;
                }
            }
            r
        })
        .collect()
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let scenario = cfg.scenario()?;
    let mut text = scenario.to_json()?;
    text.push('\n');
    emit(cfg.out.as_deref(), text.as_bytes())?;
    Ok(Outcome::Converged)
}

pub fn dump_tables(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.format != Format::Json {
        bail!("dump-tables writes JSON only");
    }
    let tables = build_tables(&cfg.scenario()?)?;
    emit_json(cfg.out.as_deref(), &tables)?;
    Ok(Outcome::Converged)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    scheme: &'a str,
    iteration: usize,
    min_throughput_bits: f64,
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let scenario = cfg.scenario()?;
    let schemes = cfg.scheme.schemes();
    let results = thread_pool(cfg.jobs)?.install(|| run_schemes(&schemes, &scenario, cfg));
    let mut outcome = Outcome::Converged;
    for (scheme, r) in schemes.iter().zip(&results) {
        outcome = outcome.max(Outcome::of(r));
        match r {
            Ok(report) => info!(
                "{scheme}: {} after {} rounds",
                report.status, report.outer_iterations
            ),
            Err(e) => error!("{scheme}: {e}"),
        }
    }

    match cfg.format {
        Format::Json => {
            let value = if let [one] = results.as_slice() {
                match one {
                    Ok(report) => serde_json::to_value(report)?,
                    Err(_) => return Ok(outcome),
                }
            } else {
                let mut map = Map::new();
                for (scheme, r) in schemes.iter().zip(&results) {
                    let v = match r {
                        Ok(report) => serde_json::to_value(report)?,
                        Err(_) => Value::Null,
                    };
                    map.insert(scheme.name().to_string(), v);
                }
                Value::Object(map)
            };
            emit_json(cfg.out.as_deref(), &value)?;
        }
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record(["scheme", "iteration", "min_throughput_bits"])?;
            for (scheme, r) in schemes.iter().zip(&results) {
                let Ok(report) = r else { continue };
                for (iteration, &v) in report.objective_trace.iter().enumerate() {
                    w.serialize(TraceRow {
                        scheme: scheme.name(),
                        iteration,
                        min_throughput_bits: v,
                    })?;
                }
            }
            emit(cfg.out.as_deref(), &w.into_inner()?)?;
        }
    }
    Ok(outcome)
}

pub const SWEEP_HEADER: [&str; 5] = [
    "axis_value",
    "scheme",
    "min_throughput_bits",
    "status",
    "iterations",
];

/// One `(axis value, scheme)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: String,
    pub min_throughput_bits: Option<f64>,
    pub status: String,
    pub iterations: usize,
}

/// Indices into `rows` where a scheme's throughput drops as the axis value
/// grows. Infeasible and failed rows are skipped.
pub fn monotonicity_violations(rows: &[SweepRow]) -> Vec<usize> {
    let mut bad = Vec::new();
    for scheme in Scheme::ALL {
        let mut prev: Option<f64> = None;
        for (i, row) in rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.scheme == scheme.name())
        {
            let Some(v) = row.min_throughput_bits else {
                continue;
            };
            if let Some(p) = prev {
                if v < p - MONOTONE_TOL * p.abs() {
                    bad.push(i);
                }
            }
            prev = Some(prev.map_or(v, |p| p.max(v)));
        }
    }
    bad
}

fn sweep_row(axis_value: f64, scheme: Scheme, r: Result<SolveReport, SolverError>) -> SweepRow {
    match r {
        Ok(report) => SweepRow {
            axis_value,
            scheme: scheme.name().into(),
            min_throughput_bits: report.objective(),
            status: report.status.to_string(),
            iterations: report.outer_iterations,
        },
        Err(e) => {
            warn!("{scheme} at {axis_value}: {e}");
            SweepRow {
                axis_value,
                scheme: scheme.name().into(),
                min_throughput_bits: None,
                status: "Failed".into(),
                iterations: 0,
            }
        }
    }
}

pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let base = cfg.scenario()?;
    let schemes = cfg.scheme.schemes();
    let cells: Vec<(f64, Scheme)> = values
        .iter()
        .flat_map(|&v| schemes.iter().map(move |&s| (v, s)))
        .collect();
    let pool = thread_pool(cfg.jobs)?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(value, scheme)| {
                let mut scenario = base.clone();
                axis.apply(&mut scenario.params, value);
                if let Err(e) = scenario.params.validate() {
                    return sweep_row(value, scheme, Err(SolverError::Config(e.to_string())));
                }
                let solver = cfg.solver_config(&scenario.params);
                sweep_row(value, scheme, solve_scheme(scheme, &scenario, &solver))
            })
            .collect()
    });
    Ok(rows)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Some((axis, values)) = &cfg.sweep else {
        bail!("sweep needs --sweep-axis and --sweep-values");
    };
    let rows = run_sweep(cfg, *axis, values)?;
    let mut outcome = Outcome::Converged;
    if rows
        .iter()
        .any(|r| r.status == "Failed" || r.status == "MaxIters")
    {
        outcome = Outcome::Failed;
    }
    for i in monotonicity_violations(&rows) {
        let r = &rows[i];
        error!(
            "{} throughput drops at {} = {}",
            r.scheme,
            axis_name(*axis),
            r.axis_value
        );
        outcome = Outcome::Failed;
    }

    match cfg.format {
        Format::Json => emit_json(cfg.out.as_deref(), &rows)?,
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record(SWEEP_HEADER)?;
            for row in &rows {
                w.serialize(row)?;
            }
            emit(cfg.out.as_deref(), &w.into_inner()?)?;
        }
    }
    Ok(outcome)
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Eta => "eta",
        SweepAxis::P0 => "p0",
    }
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.format != Format::Json {
        bail!("oracle writes JSON only");
    }
    let scenario = cfg.scenario()?;
    let mut grid = GridSpec::for_scenario(&scenario);
    if let Some(n) = cfg.grid_points {
        grid.points_per_axis = n;
    }
    let (value, outcome) = match grid_search_solve(&scenario, &grid)? {
        OracleOutcome::Solved(sol) => (
            json!({
                "status": "Solved",
                "objective": sol.objective,
                "allocation": sol.allocation,
                "throughput_per_user": sol.allocation.throughputs(&scenario),
                "evaluated": sol.evaluated,
            }),
            Outcome::Converged,
        ),
        OracleOutcome::Infeasible => (json!({ "status": "Infeasible" }), Outcome::Infeasible),
    };
    emit_json(cfg.out.as_deref(), &value)?;
    Ok(outcome)
}
