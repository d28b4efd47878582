use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::reformulation::{LogPoint, PowerVars, TimeVars, VarLayout};
use crate::scenario::{harvested_energy, Scenario};
use crate::sensing::{fn_value, SensingTables};

use super::SolverConfig;

/// Relative margin that keeps the start strictly inside every constraint.
const MARGIN: f64 = 1e-3;

/// Stream tag mixed into the scenario seed for initialization draws.
const INIT_STREAM: u64 = 0x1a17_f00d;

fn satisfies_crb(p: &[f64], scenario: &Scenario, tables: &SensingTables, strict: bool) -> bool {
    let prm = &scenario.params;
    (0..tables.targets.len()).all(|n| {
        let f = fn_value(p, tables, prm.eta, prm.p0, n);
        if strict {
            f < 0.0
        } else {
            f <= 0.0
        }
    })
}

fn candidate_powers(
    scenario: &Scenario,
    tables: &SensingTables,
    layout: &VarLayout,
    config: &SolverConfig,
) -> Option<Vec<f64>> {
    let m = scenario.num_users();
    let p_max = scenario.params.p_max;
    if let PowerVars::Fixed(p) = layout.power {
        let p = vec![p; m];
        return satisfies_crb(&p, scenario, tables, false).then_some(p);
    }
    let top = p_max * (1.0 - MARGIN);
    let p = vec![top; m];
    if satisfies_crb(&p, scenario, tables, true) {
        return Some(p);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed ^ INIT_STREAM);
    for _ in 0..config.init_attempts {
        // uniform on (0, 1]
        let p: Vec<f64> = (0..m)
            .map(|_| top * (1.0 - (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64))
            .collect();
        if satisfies_crb(&p, scenario, tables, true) {
            return Some(p);
        }
    }
    None
}

/// Strictly feasible starting point for the given layout, or `None` when no
/// tried power vector meets every CRB bound.
///
/// Powers start at the cap (less a small margin); `t0` takes half the budget
/// and each slot the smaller of an even share of the other half and what its
/// harvested energy can sustain.
pub fn init_feasible(
    scenario: &Scenario,
    tables: &SensingTables,
    layout: &VarLayout,
    config: &SolverConfig,
) -> Option<LogPoint> {
    let prm = &scenario.params;
    let m = scenario.num_users();
    let p = candidate_powers(scenario, tables, layout, config)?;
    let t0 = prm.t_max / 2.0;
    let share = prm.t_max / (2.0 * m as f64);
    let mut t: Vec<f64> = (0..m)
        .map(|i| {
            let e = harvested_energy(t0, prm.p0, prm.zeta[i], scenario.h_bs_user[i]);
            share.min(e / p[i]) * (1.0 - MARGIN)
        })
        .collect();
    if layout.time == TimeVars::Shared {
        let common = t.iter().copied().fold(f64::INFINITY, f64::min);
        t.iter_mut().for_each(|x| *x = common);
    }
    Some(LogPoint {
        t0,
        u: t.iter().map(|t| t.ln()).collect(),
        v: p.iter().map(|p| p.ln()).collect(),
    })
}
