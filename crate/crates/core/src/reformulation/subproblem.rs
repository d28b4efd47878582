//! Epigraph-form convex subproblem built around an anchor power vector.
//!
//! Variables are packed as `[t0, u..., v..., s]`. The objective minimizes
//! `-s`, with one epigraph residual `s - ln R_m <= 0` per user.

use crate::program::{ConvexProgram, ResidualEval, SmoothResidual};
use crate::scenario::{harvested_energy, Scenario};
use crate::sensing::SensingTables;

use super::crb::LinearizedCrb;
use super::{log_spectral_efficiency, LogPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVars {
    /// One log duration per user.
    PerUser,
    /// A single log duration shared by all users.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerVars {
    /// One log power per user.
    Free,
    /// Every user transmits at this fixed power (W).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarLayout {
    pub num_users: usize,
    pub time: TimeVars,
    pub power: PowerVars,
}

impl VarLayout {
    pub fn proposed(num_users: usize) -> Self {
        Self {
            num_users,
            time: TimeVars::PerUser,
            power: PowerVars::Free,
        }
    }

    fn num_u(&self) -> usize {
        match self.time {
            TimeVars::PerUser => self.num_users,
            TimeVars::Shared => 1,
        }
    }

    fn num_v(&self) -> usize {
        match self.power {
            PowerVars::Free => self.num_users,
            PowerVars::Fixed(_) => 0,
        }
    }

    pub fn dim(&self) -> usize {
        2 + self.num_u() + self.num_v()
    }

    pub fn t0(&self) -> usize {
        0
    }

    pub fn u(&self, m: usize) -> usize {
        match self.time {
            TimeVars::PerUser => 1 + m,
            TimeVars::Shared => 1,
        }
    }

    pub fn v(&self, m: usize) -> Option<usize> {
        match self.power {
            PowerVars::Free => Some(1 + self.num_u() + m),
            PowerVars::Fixed(_) => None,
        }
    }

    pub fn s(&self) -> usize {
        self.dim() - 1
    }

    pub fn power_term(&self, m: usize) -> PowerTerm {
        match self.power {
            PowerVars::Free => PowerTerm::Var(self.v(m).unwrap()),
            PowerVars::Fixed(p) => PowerTerm::Const(p.ln()),
        }
    }

    /// Packs a log point; shared layouts take the first user's duration.
    pub fn pack(&self, point: &LogPoint, s: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[0] = point.t0;
        for m in 0..self.num_u() {
            x[self.u(m)] = point.u[m];
        }
        for m in 0..self.num_v() {
            x[self.v(m).unwrap()] = point.v[m];
        }
        x[self.s()] = s;
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (LogPoint, f64) {
        let point = LogPoint {
            t0: x[0],
            u: (0..self.num_users).map(|m| x[self.u(m)]).collect(),
            v: (0..self.num_users)
                .map(|m| self.power_term(m).get(x))
                .collect(),
        };
        (point, x[self.s()])
    }
}

/// A log power that is either a variable or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerTerm {
    Var(usize),
    Const(f64),
}

impl PowerTerm {
    pub fn get(self, x: &[f64]) -> f64 {
        match self {
            PowerTerm::Var(i) => x[i],
            PowerTerm::Const(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Epigraph,
    TimeBudget,
    PowerCap,
    Energy,
    Crb,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    /// `s - (u + ln W + ln log2(1 + (h/sigma^2) e^v))`
    Epigraph {
        s: usize,
        u: usize,
        v: PowerTerm,
        log_gain: f64,
        log_bandwidth: f64,
    },
    /// `t0 + sum_k count_k e^{u_k} - t_max`
    TimeBudget {
        t0: usize,
        slots: Vec<(usize, f64)>,
        t_max: f64,
    },
    /// `v - ln p_max`
    PowerCap { v: usize, log_p_max: f64 },
    /// `u + v - ln(zeta h p0 t0)`
    Energy {
        u: usize,
        v: PowerTerm,
        t0: usize,
        zeta: f64,
        h: f64,
        p0: f64,
    },
    /// Linearized CRB polynomial in the log powers.
    Crb {
        vars: Vec<usize>,
        lin: LinearizedCrb,
    },
}

impl Residual {
    pub fn kind(&self) -> ResidualKind {
        match self {
            Residual::Epigraph { .. } => ResidualKind::Epigraph,
            Residual::TimeBudget { .. } => ResidualKind::TimeBudget,
            Residual::PowerCap { .. } => ResidualKind::PowerCap,
            Residual::Energy { .. } => ResidualKind::Energy,
            Residual::Crb { .. } => ResidualKind::Crb,
        }
    }
}

impl SmoothResidual for Residual {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Residual::Epigraph {
                s,
                u,
                v,
                log_gain,
                log_bandwidth,
            } => x[*s] - (x[*u] + log_bandwidth + log_spectral_efficiency(v.get(x), *log_gain).0),
            Residual::TimeBudget { t0, slots, t_max } => {
                x[*t0] + slots.iter().map(|&(i, c)| c * x[i].exp()).sum::<f64>() - t_max
            }
            Residual::PowerCap { v, log_p_max } => x[*v] - log_p_max,
            Residual::Energy {
                u,
                v,
                t0,
                zeta,
                h,
                p0,
            } => {
                let e = harvested_energy(x[*t0], *p0, *zeta, *h);
                if e > 0.0 {
                    x[*u] + v.get(x) - e.ln()
                } else {
                    f64::INFINITY
                }
            }
            Residual::Crb { vars, lin } => lin.value(vars.iter().map(|&i| x[i])),
        }
    }

    fn eval(&self, x: &[f64]) -> ResidualEval {
        let value = self.value(x);
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        match self {
            Residual::Epigraph {
                s, u, v, log_gain, ..
            } => {
                grad.push((*s, 1.0));
                grad.push((*u, -1.0));
                if let PowerTerm::Var(i) = v {
                    let (_, d1, d2) = log_spectral_efficiency(x[*i], *log_gain);
                    grad.push((*i, -d1));
                    hess.push((*i, *i, -d2));
                }
            }
            Residual::TimeBudget { t0, slots, .. } => {
                grad.push((*t0, 1.0));
                for &(i, c) in slots {
                    let e = c * x[i].exp();
                    grad.push((i, e));
                    hess.push((i, i, e));
                }
            }
            Residual::PowerCap { v, .. } => grad.push((*v, 1.0)),
            Residual::Energy { u, v, t0, .. } => {
                grad.push((*u, 1.0));
                if let PowerTerm::Var(i) = v {
                    grad.push((*i, 1.0));
                }
                grad.push((*t0, -1.0 / x[*t0]));
                hess.push((*t0, *t0, 1.0 / (x[*t0] * x[*t0])));
            }
            Residual::Crb { vars, lin } => {
                for (k, &i) in vars.iter().enumerate() {
                    grad.push((i, lin.gradient_entry(k, x[i])));
                    hess.push((i, i, lin.hessian_entry(k, x[i])));
                }
            }
        }
        ResidualEval { value, grad, hess }
    }
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub layout: VarLayout,
    pub program: ConvexProgram<Residual>,
}

impl Subproblem {
    pub fn count(&self, kind: ResidualKind) -> usize {
        self.program
            .residuals
            .iter()
            .filter(|r| r.kind() == kind)
            .count()
    }

    /// Drops every residual of the given kind.
    pub fn without(mut self, kind: ResidualKind) -> Self {
        self.program.residuals.retain(|r| r.kind() != kind);
        self
    }
}

/// Assembles the convex subproblem with the CRB constraints linearized at
/// the log powers `v_anchor`. Fixed-power layouts carry no power-cap or CRB
/// residuals; those are checked once on the fixed powers instead.
pub fn build_subproblem(
    scenario: &Scenario,
    tables: &SensingTables,
    layout: VarLayout,
    v_anchor: &[f64],
    t0_floor: f64,
) -> Subproblem {
    let prm = &scenario.params;
    let m = layout.num_users;
    let mut residuals = Vec::new();
    for i in 0..m {
        residuals.push(Residual::Epigraph {
            s: layout.s(),
            u: layout.u(i),
            v: layout.power_term(i),
            log_gain: (scenario.h_bs_user[i] / prm.sigma2).ln(),
            log_bandwidth: prm.bandwidth.ln(),
        });
    }
    let slots = match layout.time {
        TimeVars::PerUser => (0..m).map(|i| (layout.u(i), 1.0)).collect(),
        TimeVars::Shared => vec![(layout.u(0), m as f64)],
    };
    residuals.push(Residual::TimeBudget {
        t0: layout.t0(),
        slots,
        t_max: prm.t_max,
    });
    if let PowerVars::Free = layout.power {
        for i in 0..m {
            residuals.push(Residual::PowerCap {
                v: layout.v(i).unwrap(),
                log_p_max: prm.p_max.ln(),
            });
        }
    }
    for i in 0..m {
        residuals.push(Residual::Energy {
            u: layout.u(i),
            v: layout.power_term(i),
            t0: layout.t0(),
            zeta: prm.zeta[i],
            h: scenario.h_bs_user[i],
            p0: prm.p0,
        });
    }
    if let PowerVars::Free = layout.power {
        let vars: Vec<usize> = (0..m).map(|i| layout.v(i).unwrap()).collect();
        for target in &tables.targets {
            residuals.push(Residual::Crb {
                vars: vars.clone(),
                lin: LinearizedCrb::new(target, v_anchor, prm.eta, prm.p0),
            });
        }
    }

    let mut cost = vec![0.0; layout.dim()];
    cost[layout.s()] = -1.0;
    Subproblem {
        layout,
        program: ConvexProgram {
            dim: layout.dim(),
            cost,
            residuals,
            lower_bounds: vec![(layout.t0(), t0_floor)],
        },
    }
}
