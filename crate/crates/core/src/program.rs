//! Smooth convex programs in inequality form:
//! minimize `cost . x` subject to `g_k(x) <= 0` and `x_i >= lb_i`.

/// Value, sparse gradient and sparse Hessian of one residual at a point.
///
/// Hessian entries list both `(i, j)` and `(j, i)` for off-diagonal terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualEval {
    pub value: f64,
    pub grad: Vec<(usize, f64)>,
    pub hess: Vec<(usize, usize, f64)>,
}

impl ResidualEval {
    pub fn dense_grad(&self, dim: usize) -> Vec<f64> {
        let mut g = vec![0.0; dim];
        for &(i, v) in &self.grad {
            g[i] += v;
        }
        g
    }

    pub fn dense_hess(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut h = vec![vec![0.0; dim]; dim];
        for &(i, j, v) in &self.hess {
            h[i][j] += v;
        }
        h
    }
}

/// A convex `g(x) <= 0` constraint with analytic derivatives.
///
/// `value` may return a non-finite number outside the residual's domain;
/// such points count as infeasible.
pub trait SmoothResidual {
    fn value(&self, x: &[f64]) -> f64;
    fn eval(&self, x: &[f64]) -> ResidualEval;
}

#[derive(Debug, Clone)]
pub struct ConvexProgram<R> {
    pub dim: usize,
    /// Linear objective to minimize.
    pub cost: Vec<f64>,
    pub residuals: Vec<R>,
    /// Strict variable lower bounds `(index, bound)`.
    pub lower_bounds: Vec<(usize, f64)>,
}

impl<R: SmoothResidual> ConvexProgram<R> {
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Number of barrier terms (residuals plus bounds).
    pub fn num_barrier_terms(&self) -> usize {
        self.residuals.len() + self.lower_bounds.len()
    }

    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        self.lower_bounds.iter().all(|&(i, lb)| x[i] > lb)
            && self.residuals.iter().all(|r| r.value(x) < 0.0)
    }
}
