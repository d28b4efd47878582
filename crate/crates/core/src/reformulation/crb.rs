use crate::sensing::{fn_value, SensingTables, TargetTables};

/// CRB constraint polynomial evaluated at powers `exp(v)`.
pub fn ftilde(v: &[f64], tables: &SensingTables, eta: f64, p0: f64, n: usize) -> f64 {
    let p: Vec<f64> = v.iter().map(|v| v.exp()).collect();
    fn_value(&p, tables, eta, p0, n)
}

/// Gradient of [`ftilde`] in `v`.
pub fn ftilde_gradient(v: &[f64], tables: &SensingTables, eta: f64, p0: f64, n: usize) -> Vec<f64> {
    let t = &tables.targets[n];
    let m = t.num_users();
    let p: Vec<f64> = v.iter().map(|v| v.exp()).collect();
    (0..m)
        .map(|i| {
            let pair: f64 = (0..m).map(|j| t.beta(i, j) * p[j]).sum();
            p[i] * (t.alpha[i] - eta * pair - eta * p0 * t.phi[i])
        })
        .collect()
}

/// Convex majorant of [`ftilde`] around an anchor `v_r`:
///
/// `sum_m alpha_m e^{v_m} + base + sum_m slope_m (v_m - anchor_m)`
///
/// The concave part (the negated `beta` and `phi` exponentials) is replaced
/// by its tangent plane at the anchor, so the majorant touches `ftilde` at
/// the anchor and lies above it everywhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedCrb {
    pub alpha: Vec<f64>,
    pub base: f64,
    pub slope: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl LinearizedCrb {
    pub fn new(target: &TargetTables, anchor: &[f64], eta: f64, p0: f64) -> Self {
        let m = target.num_users();
        let p: Vec<f64> = anchor.iter().map(|v| v.exp()).collect();
        let mut base = target.mu;
        let mut slope = vec![0.0; m];
        for i in 0..m {
            let mut pair = 0.0;
            for j in 0..m {
                // e^{v_i^r + v_j^r} as a product keeps the anchor value exact.
                let w = target.beta(i, j) * p[i] * p[j];
                base -= 0.5 * eta * w;
                pair += w;
            }
            let cross = target.phi[i] * p[i];
            base -= eta * p0 * cross;
            // Symmetric beta: both (i, j) and (j, i) contribute to v_i.
            slope[i] = -eta * pair - eta * p0 * cross;
        }
        Self {
            alpha: target.alpha.clone(),
            base,
            slope,
            anchor: anchor.to_vec(),
        }
    }

    pub fn value(&self, v: impl Iterator<Item = f64>) -> f64 {
        let mut out = self.base;
        for (i, v) in v.enumerate() {
            out += self.alpha[i] * v.exp() + self.slope[i] * (v - self.anchor[i]);
        }
        out
    }

    pub fn gradient_entry(&self, i: usize, v: f64) -> f64 {
        self.alpha[i] * v.exp() + self.slope[i]
    }

    pub fn hessian_entry(&self, i: usize, v: f64) -> f64 {
        self.alpha[i] * v.exp()
    }
}

/// Majorant of [`ftilde`] expanded at `v_r`, evaluated at `v`.
pub fn ftilde_linearized(
    v: &[f64],
    v_r: &[f64],
    tables: &SensingTables,
    eta: f64,
    p0: f64,
    n: usize,
) -> f64 {
    LinearizedCrb::new(&tables.targets[n], v_r, eta, p0).value(v.iter().copied())
}
