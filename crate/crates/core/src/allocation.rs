//! Natural-domain decision variables and the feasibility audit.

use serde::{Deserialize, Serialize};

use crate::scenario::{harvested_energy, Scenario};
use crate::sensing::{fn_value, SensingTables};

/// Power-transfer duration `t0`, per-user slot durations `t` and powers `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub t0: f64,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

/// Shannon throughput in bits of one slot.
pub fn throughput_bits(t: f64, p: f64, h: f64, sigma2: f64, bandwidth: f64) -> f64 {
    t * bandwidth * (p * h / sigma2).ln_1p() / std::f64::consts::LN_2
}

/// Largest relative constraint violation found by [`Allocation::audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub max_violation: f64,
    pub worst: String,
}

impl Audit {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }

    fn record(&mut self, violation: f64, what: impl FnOnce() -> String) {
        let v = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation
        };
        if v > self.max_violation {
            self.max_violation = v;
            self.worst = what();
        }
    }
}

impl Allocation {
    pub fn num_users(&self) -> usize {
        self.t.len()
    }

    pub fn throughputs(&self, scenario: &Scenario) -> Vec<f64> {
        let p = &scenario.params;
        (0..self.num_users())
            .map(|m| {
                throughput_bits(
                    self.t[m],
                    self.p[m],
                    scenario.h_bs_user[m],
                    p.sigma2,
                    p.bandwidth,
                )
            })
            .collect()
    }

    pub fn min_throughput(&self, scenario: &Scenario) -> f64 {
        self.throughputs(scenario)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every constraint of the original problem directly on the
    /// natural variables. Violations are relative: time against `t_max`,
    /// power against `p_max`, energy against the harvested energy, and the
    /// CRB polynomial against `A + B`.
    pub fn audit(&self, scenario: &Scenario, tables: &SensingTables) -> Audit {
        let prm = &scenario.params;
        let mut audit = Audit {
            max_violation: f64::NEG_INFINITY,
            worst: String::new(),
        };
        if self.t.len() != prm.num_users || self.p.len() != prm.num_users {
            audit.record(f64::INFINITY, || "shape".into());
            return audit;
        }
        let positive = std::iter::once(self.t0)
            .chain(self.t.iter().copied())
            .chain(self.p.iter().copied());
        if positive.clone().any(|v| !(v > 0.0)) {
            audit.record(f64::INFINITY, || "non-positive variable".into());
        }
        let total = self.t0 + self.t.iter().sum::<f64>();
        audit.record((total - prm.t_max) / prm.t_max, || "time budget".into());
        for m in 0..prm.num_users {
            audit.record((self.p[m] - prm.p_max) / prm.p_max, || {
                format!("power cap user {}", m + 1)
            });
            let e = harvested_energy(self.t0, prm.p0, prm.zeta[m], scenario.h_bs_user[m]);
            audit.record((self.t[m] * self.p[m] - e) / e, || {
                format!("energy causality user {}", m + 1)
            });
        }
        for n in 0..tables.targets.len() {
            let t = &tables.targets[n];
            let scale = t.mu + t.alpha.iter().zip(&self.p).map(|(a, p)| a * p).sum::<f64>();
            let f = fn_value(&self.p, tables, prm.eta, prm.p0, n);
            audit.record(f / scale.max(f64::MIN_POSITIVE), || {
                format!("crb target {}", n + 1)
            });
        }
        audit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SystemParams;
    use crate::sensing::build_tables;

    #[test]
    fn throughput_formula() {
        // SNR 1 -> one bit per second per hertz.
        let r = throughput_bits(2.0, 1.0, 1e-10, 1e-10, 1e6);
        assert!((r - 2e6).abs() < 1e-6);
    }

    #[test]
    fn audit_flags_each_constraint() {
        let mut params = SystemParams::with_sizes(2, 1);
        params.eta = 1e6;
        let s = Scenario::generate(5, params).unwrap();
        let tables = build_tables(&s).unwrap();
        let e0 = s.harvest_rate(0) * 5.0;
        let e1 = s.harvest_rate(1) * 5.0;
        let ok = Allocation {
            t0: 5.0,
            t: vec![e0 / 1.0 * 0.5, e1 / 1.0 * 0.5],
            p: vec![1.0, 1.0],
        };
        assert!(ok.audit(&s, &tables).passes(0.0));

        let mut bad = ok.clone();
        bad.p[0] = 2.5;
        bad.t[0] = e0 / 2.5 * 0.5;
        assert!(bad.audit(&s, &tables).worst.starts_with("power cap"));

        let mut bad = ok.clone();
        bad.t[1] = e1 * 2.0;
        assert!(bad.audit(&s, &tables).worst.starts_with("energy"));

        let mut bad = ok.clone();
        bad.t0 = 10.0;
        assert!(bad.audit(&s, &tables).worst.starts_with("time budget"));

        let mut bad = ok;
        bad.t[0] = 0.0;
        assert!(!bad.audit(&s, &tables).passes(1e-6));
    }
}
