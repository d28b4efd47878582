//! Log-barrier path-following method with damped Newton centering.

use log::trace;
use nalgebra::{DMatrix, DVector};

use crate::program::{ConvexProgram, SmoothResidual};

use super::SolverError;

/// Newton decrement below which steps skip the sufficient-decrease test.
const PURE_NEWTON_DECREMENT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConfig {
    /// Barrier weight on the objective at the first centering step.
    pub t_init: f64,
    /// Factor applied to the barrier weight after each centering step.
    pub multiplier: f64,
    /// Stop once `1 / t` (duality gap per barrier term) is below this.
    pub gap_target: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Armijo sufficient-decrease fraction.
    pub ls_alpha: f64,
    /// Backtracking contraction.
    pub ls_beta: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            t_init: 1.0,
            multiplier: 10.0,
            gap_target: 1e-8,
            newton_tol: 1e-9,
            max_newton_iters: 200,
            ls_alpha: 0.25,
            ls_beta: 0.5,
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.t_init, self.gap_target, self.newton_tol, self.ls_alpha];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_newton_iters == 0 {
            return Err("barrier parameters must be positive".into());
        }
        if !(self.multiplier > 1.0) {
            return Err(format!(
                "barrier multiplier must exceed 1, got {}",
                self.multiplier
            ));
        }
        if !(self.ls_beta > 0.0 && self.ls_beta < 1.0) || self.ls_alpha >= 0.5 {
            return Err("backtracking needs beta in (0, 1) and alpha in (0, 0.5)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub barrier_weight: f64,
    /// `m / t`, an upper bound on the suboptimality of `objective`.
    pub duality_gap: f64,
    pub newton_iters: usize,
    /// Infinity norm of the Lagrangian gradient with the central-path duals.
    pub kkt_residual: f64,
    /// Dual estimate `1 / (-t g_k)` for each residual.
    pub duals: Vec<f64>,
}

struct Newton {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    values: Vec<f64>,
}

fn assemble<R: SmoothResidual>(prog: &ConvexProgram<R>, x: &[f64], weight: f64) -> Newton {
    let n = prog.dim;
    let mut grad = DVector::from_iterator(n, prog.cost.iter().map(|c| weight * c));
    let mut hess = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(prog.residuals.len());
    for r in &prog.residuals {
        let ev = r.eval(x);
        let slack = -ev.value;
        values.push(ev.value);
        for &(i, gi) in &ev.grad {
            grad[i] += gi / slack;
            for &(j, gj) in &ev.grad {
                hess[(i, j)] += gi * gj / (slack * slack);
            }
        }
        for &(i, j, h) in &ev.hess {
            hess[(i, j)] += h / slack;
        }
    }
    for &(i, lb) in &prog.lower_bounds {
        let slack = x[i] - lb;
        grad[i] -= 1.0 / slack;
        hess[(i, i)] += 1.0 / (slack * slack);
    }
    Newton { grad, hess, values }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&(-grad)));
    }
    let scale = hess
        .diagonal()
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(1.0);
    let mut ridge = 1e-14 * scale;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&(-grad)));
        }
        ridge *= 10.0;
    }
    None
}

/// Change of the barrier function along a step, computed from ratios of
/// slacks to avoid cancelling the large absolute barrier values.
fn barrier_change<R: SmoothResidual>(
    prog: &ConvexProgram<R>,
    x: &[f64],
    trial: &[f64],
    old_values: &[f64],
    weight: f64,
) -> Option<f64> {
    let mut delta: f64 = prog
        .cost
        .iter()
        .zip(trial.iter().zip(x))
        .map(|(c, (a, b))| weight * c * (a - b))
        .sum();
    for &(i, lb) in &prog.lower_bounds {
        if !(trial[i] > lb) {
            return None;
        }
        delta -= ((trial[i] - x[i]) / (x[i] - lb)).ln_1p();
    }
    for (r, &old) in prog.residuals.iter().zip(old_values) {
        let new = r.value(trial);
        if !(new < 0.0) {
            return None;
        }
        delta -= ((new - old) / old).ln_1p();
    }
    Some(delta)
}

/// Minimizes `cost . x` over the strict interior of the constraints, starting
/// from the strictly feasible `start`.
pub fn solve<R: SmoothResidual>(
    prog: &ConvexProgram<R>,
    start: &[f64],
    cfg: &BarrierConfig,
) -> Result<BarrierSolution, SolverError> {
    if let Some((i, lb)) = prog
        .lower_bounds
        .iter()
        .copied()
        .find(|&(i, lb)| !(start[i] > lb))
    {
        return Err(SolverError::InfeasibleStart {
            detail: format!("x[{i}] = {} not above bound {lb}", start[i]),
        });
    }
    if let Some((k, v)) = prog
        .residuals
        .iter()
        .map(|r| r.value(start))
        .enumerate()
        .find(|(_, v)| !(*v < 0.0))
    {
        return Err(SolverError::InfeasibleStart {
            detail: format!("residual {k} = {v}"),
        });
    }

    let terms = prog.num_barrier_terms() as f64;
    let mut x = start.to_vec();
    let mut weight = cfg.t_init;
    let mut total_iters = 0;
    loop {
        let mut iters = 0;
        loop {
            let nw = assemble(prog, &x, weight);
            let dir =
                newton_direction(&nw.hess, &nw.grad).ok_or(SolverError::SingularNewtonSystem {
                    barrier_weight: weight,
                })?;
            let slope = nw.grad.dot(&dir);
            let decrement = -slope;
            if decrement / 2.0 <= cfg.newton_tol {
                break;
            }
            if iters >= cfg.max_newton_iters {
                return Err(SolverError::MaxNewtonIters {
                    barrier_weight: weight,
                    decrement,
                });
            }
            // Inside the quadratic-convergence region the full step is taken
            // as soon as it is feasible; the Armijo test cannot resolve
            // decreases this small against rounding in the slacks.
            let pure_newton = decrement.sqrt() < PURE_NEWTON_DECREMENT;
            let mut step = 1.0;
            let mut trial = vec![0.0; x.len()];
            loop {
                for i in 0..x.len() {
                    trial[i] = x[i] + step * dir[i];
                }
                if let Some(delta) = barrier_change(prog, &x, &trial, &nw.values, weight) {
                    if pure_newton || delta <= cfg.ls_alpha * step * slope {
                        break;
                    }
                }
                step *= cfg.ls_beta;
                if step < 1e-20 {
                    return Err(SolverError::LineSearchStall {
                        barrier_weight: weight,
                        decrement,
                    });
                }
            }
            std::mem::swap(&mut x, &mut trial);
            iters += 1;
        }
        total_iters += iters;
        trace!("barrier weight {weight:e}: centered in {iters} Newton steps");
        if 1.0 / weight <= cfg.gap_target {
            break;
        }
        weight *= cfg.multiplier;
    }

    let nw = assemble(prog, &x, weight);
    let kkt_residual = nw
        .grad
        .iter()
        .fold(0.0f64, |a, g| a.max((g / weight).abs()));
    let duals = nw.values.iter().map(|g| 1.0 / (-weight * g)).collect();
    Ok(BarrierSolution {
        objective: prog.objective(&x),
        x,
        barrier_weight: weight,
        duality_gap: terms / weight,
        newton_iters: total_iters,
        kkt_residual,
        duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ResidualEval;

    /// `a . x - b <= 0`
    struct Affine {
        a: Vec<f64>,
        b: f64,
    }

    impl SmoothResidual for Affine {
        fn value(&self, x: &[f64]) -> f64 {
            self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b
        }
        fn eval(&self, x: &[f64]) -> ResidualEval {
            ResidualEval {
                value: self.value(x),
                grad: self.a.iter().copied().enumerate().collect(),
                hess: vec![],
            }
        }
    }

    /// `|x - c|^2 - r^2 <= 0`
    struct Ball {
        c: Vec<f64>,
        r: f64,
    }

    impl SmoothResidual for Ball {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.c)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                - self.r * self.r
        }
        fn eval(&self, x: &[f64]) -> ResidualEval {
            ResidualEval {
                value: self.value(x),
                grad: x
                    .iter()
                    .zip(&self.c)
                    .map(|(x, c)| 2.0 * (x - c))
                    .enumerate()
                    .collect(),
                hess: (0..x.len()).map(|i| (i, i, 2.0)).collect(),
            }
        }
    }

    #[test]
    fn linear_program_on_a_box() {
        // min -x - 2y on [0,1]^2 plus x + y <= 1.5
        let res = vec![
            Affine {
                a: vec![1.0, 0.0],
                b: 1.0,
            },
            Affine {
                a: vec![0.0, 1.0],
                b: 1.0,
            },
            Affine {
                a: vec![-1.0, 0.0],
                b: 0.0,
            },
            Affine {
                a: vec![0.0, -1.0],
                b: 0.0,
            },
            Affine {
                a: vec![1.0, 1.0],
                b: 1.5,
            },
        ];
        let prog = ConvexProgram {
            dim: 2,
            cost: vec![-1.0, -2.0],
            residuals: res,
            lower_bounds: vec![],
        };
        let sol = solve(&prog, &[0.2, 0.2], &BarrierConfig::default()).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-6);
        assert!((sol.x[1] - 1.0).abs() < 1e-6);
        assert!(sol.objective - (-2.5) <= sol.duality_gap + 1e-12);
        assert!(sol.duality_gap <= 1e-8 * 5.0);
        assert!(prog.is_strictly_feasible(&sol.x));
    }

    #[test]
    fn linear_objective_on_a_ball() {
        let prog = ConvexProgram {
            dim: 2,
            cost: vec![1.0, 1.0],
            residuals: vec![Ball {
                c: vec![1.0, -2.0],
                r: 2.0,
            }],
            lower_bounds: vec![],
        };
        let sol = solve(&prog, &[1.0, -2.0], &BarrierConfig::default()).unwrap();
        let opt = -1.0 - 2.0 * 2f64.sqrt();
        assert!(sol.objective >= opt);
        assert!(sol.objective - opt <= sol.duality_gap + 1e-12);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let prog = ConvexProgram {
            dim: 1,
            cost: vec![1.0],
            residuals: vec![Affine {
                a: vec![1.0],
                b: 1.0,
            }],
            lower_bounds: vec![(0, 0.0)],
        };
        assert!(matches!(
            solve(&prog, &[1.0], &BarrierConfig::default()),
            Err(SolverError::InfeasibleStart { .. })
        ));
        assert!(matches!(
            solve(&prog, &[0.0], &BarrierConfig::default()),
            Err(SolverError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn lower_bound_is_a_barrier_term() {
        let prog = ConvexProgram {
            dim: 1,
            cost: vec![1.0],
            residuals: vec![Affine {
                a: vec![1.0],
                b: 1.0,
            }],
            lower_bounds: vec![(0, 0.25)],
        };
        let sol = solve(&prog, &[0.5], &BarrierConfig::default()).unwrap();
        assert!(sol.x[0] > 0.25 && sol.x[0] - 0.25 < 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(BarrierConfig::default().validate().is_ok());
        let c = BarrierConfig {
            multiplier: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = BarrierConfig {
            ls_beta: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
