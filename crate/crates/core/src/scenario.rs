//! Problem instances: node geometry, channel gains and physical parameters.
//!
//! A [`Scenario`] is generated from a seed with a portable ChaCha20 stream.
//! Draw order is fixed so that the same `(seed, params)` pair yields the same
//! instance on every platform:
//!
//! 1. user positions `1..=M`, then target positions `1..=N`; each position is
//!    two uniform draws (radius, angle) and is redrawn while it lies closer
//!    than [`MIN_SEPARATION`] to any node placed before it (the BS at the
//!    origin counts as placed);
//! 2. fading for the BS-user gains `h_bs_user[0..M]`;
//! 3. fading for the transmitter-target gains `h_to_target`, row-major with
//!    row 0 the BS.
//!
//! Uniform draws are `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2-D position in meters.
pub type Point = [f64; 2];

/// Closest two generated nodes may be, in meters.
pub const MIN_SEPARATION: f64 = 0.1;

/// Placement attempts per node before generation gives up.
pub const MAX_PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid channel gain {value} at {location}")]
    InvalidChannel { location: String, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("could not place {what} after {MAX_PLACEMENT_RETRIES} attempts")]
    PlacementExhausted { what: String },

    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Physical and algorithmic parameters of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub num_users: usize,
    pub num_targets: usize,
    /// BS transmit power during the power-transfer phase, W.
    pub p0: f64,
    /// Per-user transmit power cap, W.
    pub p_max: f64,
    /// Total time budget, s.
    pub t_max: f64,
    /// Receiver noise power, W.
    pub sigma2: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Bound on the trace of the localization CRB, m^2.
    pub eta: f64,
    /// Energy conversion efficiency of each user.
    pub zeta: Vec<f64>,
    pub kappa: f64,
    pub nu: f64,
    /// Propagation speed, m/s.
    pub c: f64,
    pub deploy_radius: f64,
    /// Relative-improvement threshold of the outer loop.
    pub lambda_th: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            num_users: 10,
            num_targets: 10,
            p0: 10.0,
            p_max: 2.0,
            t_max: 10.0,
            // -70 dBm
            sigma2: 1e-10,
            bandwidth: 1e6,
            eta: 5e-2,
            zeta: vec![0.7; 10],
            kappa: 1e-3,
            nu: 2.5,
            c: 3e8,
            deploy_radius: 10.0,
            lambda_th: 1e-5,
        }
    }
}

impl SystemParams {
    /// Default parameters resized to `num_users` users and `num_targets` targets.
    pub fn with_sizes(num_users: usize, num_targets: usize) -> Self {
        let mut p = Self::default();
        p.resize_users(num_users);
        p.num_targets = num_targets;
        p
    }

    /// Changes the user count, extending `zeta` with its last entry (or 0.7).
    pub fn resize_users(&mut self, num_users: usize) {
        let fill = self.zeta.last().copied().unwrap_or(0.7);
        self.zeta.resize(num_users, fill);
        self.num_users = num_users;
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidParams(msg));
        if self.num_users == 0 || self.num_targets == 0 {
            return bad("need at least one user and one target".into());
        }
        let positive = [
            ("p0", self.p0),
            ("p_max", self.p_max),
            ("t_max", self.t_max),
            ("sigma2", self.sigma2),
            ("bandwidth", self.bandwidth),
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("nu", self.nu),
            ("c", self.c),
            ("deploy_radius", self.deploy_radius),
            ("lambda_th", self.lambda_th),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.zeta.len() != self.num_users {
            return bad(format!(
                "zeta has {} entries for {} users",
                self.zeta.len(),
                self.num_users
            ));
        }
        if let Some(z) = self.zeta.iter().find(|z| !(**z > 0.0 && **z <= 1.0)) {
            return bad(format!("zeta entries must lie in (0, 1], got {z}"));
        }
        Ok(())
    }
}

/// One problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub params: SystemParams,
    pub bs_pos: Point,
    pub user_pos: Vec<Point>,
    pub target_pos: Vec<Point>,
    /// BS-user gains, used for both power transfer and the uplink.
    pub h_bs_user: Vec<f64>,
    /// Transmitter-to-target gains; row 0 is the BS, row `m` user `m`.
    pub h_to_target: Vec<Vec<f64>>,
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Path-loss gain `z * kappa * d^-nu`.
pub fn channel_gain(d: f64, z: f64, kappa: f64, nu: f64) -> Result<f64, ScenarioError> {
    if !(d > 0.0) {
        return Err(ScenarioError::DegenerateGeometry(format!(
            "channel distance must be positive, got {d}"
        )));
    }
    Ok(z * kappa * d.powf(-nu))
}

/// Energy harvested by a user during a power-transfer phase of length `t0`.
pub fn harvested_energy(t0: f64, p0: f64, zeta: f64, h_bs_user: f64) -> f64 {
    zeta * h_bs_user * t0 * p0
}

fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform point on the disc of `radius` centred at the origin.
pub fn sample_disc_point(rng: &mut impl RngCore, radius: f64) -> Point {
    let r = radius * unit_f64(rng).sqrt();
    let theta = 2.0 * PI * unit_f64(rng);
    [r * theta.cos(), r * theta.sin()]
}

/// Unit-mean exponential power gain (squared magnitude of a Rayleigh draw).
fn sample_fading(rng: &mut impl RngCore) -> f64 {
    loop {
        let z = -(-unit_f64(rng)).ln_1p();
        if z > 0.0 {
            return z;
        }
    }
}

fn place(
    rng: &mut impl RngCore,
    radius: f64,
    placed: &[Point],
    what: impl Fn() -> String,
) -> Result<Point, ScenarioError> {
    for _ in 0..MAX_PLACEMENT_RETRIES {
        let p = sample_disc_point(rng, radius);
        if placed.iter().all(|q| distance(p, *q) >= MIN_SEPARATION) {
            return Ok(p);
        }
    }
    Err(ScenarioError::PlacementExhausted { what: what() })
}

impl Scenario {
    /// Draws a random instance; see the module docs for the stream order.
    pub fn generate(seed: u64, params: SystemParams) -> Result<Self, ScenarioError> {
        params.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let m = params.num_users;
        let n = params.num_targets;
        let radius = params.deploy_radius;
        let bs_pos = [0.0, 0.0];

        let mut placed = vec![bs_pos];
        let mut user_pos = Vec::with_capacity(m);
        for i in 0..m {
            let p = place(&mut rng, radius, &placed, || format!("user {}", i + 1))?;
            placed.push(p);
            user_pos.push(p);
        }
        let mut target_pos = Vec::with_capacity(n);
        for j in 0..n {
            let p = place(&mut rng, radius, &placed, || format!("target {}", j + 1))?;
            placed.push(p);
            target_pos.push(p);
        }

        let (kappa, nu) = (params.kappa, params.nu);
        let h_bs_user = user_pos
            .iter()
            .map(|x| channel_gain(distance(*x, bs_pos), sample_fading(&mut rng), kappa, nu))
            .collect::<Result<Vec<_>, _>>()?;
        let mut h_to_target = Vec::with_capacity(m + 1);
        for tx in std::iter::once(&bs_pos).chain(user_pos.iter()) {
            let row = target_pos
                .iter()
                .map(|q| channel_gain(distance(*tx, *q), sample_fading(&mut rng), kappa, nu))
                .collect::<Result<Vec<_>, _>>()?;
            h_to_target.push(row);
        }

        let scenario = Self {
            seed,
            params,
            bs_pos,
            user_pos,
            target_pos,
            h_bs_user,
            h_to_target,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn num_users(&self) -> usize {
        self.params.num_users
    }

    pub fn num_targets(&self) -> usize {
        self.params.num_targets
    }

    /// Energy harvested per second of power transfer by user `m` (0-based).
    pub fn harvest_rate(&self, m: usize) -> f64 {
        harvested_energy(1.0, self.params.p0, self.params.zeta[m], self.h_bs_user[m])
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params.validate()?;
        let m = self.num_users();
        let n = self.num_targets();
        if self.user_pos.len() != m || self.h_bs_user.len() != m {
            return Err(ScenarioError::Shape(format!(
                "expected {m} users, got {} positions and {} BS gains",
                self.user_pos.len(),
                self.h_bs_user.len()
            )));
        }
        if self.target_pos.len() != n {
            return Err(ScenarioError::Shape(format!(
                "expected {n} targets, got {}",
                self.target_pos.len()
            )));
        }
        if self.h_to_target.len() != m + 1 || self.h_to_target.iter().any(|r| r.len() != n) {
            return Err(ScenarioError::Shape(format!(
                "h_to_target must be {}x{n}",
                m + 1
            )));
        }
        for (i, h) in self.h_bs_user.iter().enumerate() {
            check_gain(*h, || format!("h_bs_user[{i}]"))?;
        }
        for (i, row) in self.h_to_target.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                check_gain(*h, || format!("h_to_target[{i}][{j}]"))?;
            }
        }
        for (j, q) in self.target_pos.iter().enumerate() {
            let endpoints = std::iter::once(&self.bs_pos).chain(self.user_pos.iter());
            for (i, x) in endpoints.enumerate() {
                if !(distance(*x, *q) > 0.0) {
                    return Err(ScenarioError::DegenerateGeometry(format!(
                        "target {} coincides with node {i}",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ScenarioError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

fn check_gain(h: f64, location: impl Fn() -> String) -> Result<(), ScenarioError> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::InvalidChannel {
            location: location(),
            value: h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_gain_reference_values() {
        assert!((channel_gain(1.0, 1.0, 1e-3, 2.5).unwrap() - 1e-3).abs() < 1e-18);
        let ratio =
            channel_gain(2.0, 1.0, 1e-3, 2.5).unwrap() / channel_gain(1.0, 1.0, 1e-3, 2.5).unwrap();
        assert!((ratio - 2f64.powf(-2.5)).abs() < 1e-15);
        assert_eq!(channel_gain(5.0, 0.0, 1e-3, 2.5).unwrap(), 0.0);
        assert!(channel_gain(0.0, 1.0, 1e-3, 2.5).is_err());
        assert!(channel_gain(-1.0, 1.0, 1e-3, 2.5).is_err());
    }

    #[test]
    fn zero_fading_is_rejected_by_validation() {
        let mut s = Scenario::generate(1, SystemParams::with_sizes(2, 2)).unwrap();
        s.h_to_target[1][0] = channel_gain(5.0, 0.0, 1e-3, 2.5).unwrap();
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::InvalidChannel { .. })
        ));
    }

    #[test]
    fn harvested_energy_is_linear() {
        assert!((harvested_energy(10.0, 10.0, 0.7, 1e-3) - 0.07).abs() < 1e-15);
        assert_eq!(harvested_energy(0.0, 10.0, 0.7, 1e-3), 0.0);
        let e1 = harvested_energy(1.5, 10.0, 0.7, 1e-3);
        let e2 = harvested_energy(3.0, 10.0, 0.7, 1e-3);
        assert!((e2 - 2.0 * e1).abs() < 1e-18);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SystemParams::default();
        let a = Scenario::generate(7, p.clone()).unwrap();
        let b = Scenario::generate(7, p.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = Scenario::generate(8, p).unwrap();
        assert_ne!(a.user_pos, c.user_pos);
    }

    #[test]
    fn default_shapes() {
        let s = Scenario::generate(7, SystemParams::default()).unwrap();
        assert_eq!(s.user_pos.len(), 10);
        assert_eq!(s.target_pos.len(), 10);
        assert_eq!(s.h_to_target.len(), 11);
        assert!(s.h_to_target.iter().all(|r| r.len() == 10));
        let r = s.params.deploy_radius;
        for p in s.user_pos.iter().chain(s.target_pos.iter()) {
            assert!(distance(*p, [0.0, 0.0]) <= r);
        }
    }

    #[test]
    fn generated_nodes_respect_min_separation() {
        let s = Scenario::generate(3, SystemParams::with_sizes(10, 10)).unwrap();
        let mut all = vec![s.bs_pos];
        all.extend(&s.user_pos);
        all.extend(&s.target_pos);
        for i in 0..all.len() {
            for j in 0..i {
                assert!(distance(all[i], all[j]) >= MIN_SEPARATION);
            }
        }
    }

    #[test]
    fn crowded_disc_exhausts_placement() {
        let mut p = SystemParams::with_sizes(50, 1);
        p.deploy_radius = 0.15;
        assert!(matches!(
            Scenario::generate(0, p),
            Err(ScenarioError::PlacementExhausted { .. })
        ));
    }

    #[test]
    fn uniform_disc_mean_radius() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| distance(sample_disc_point(&mut rng, 10.0), [0.0, 0.0]))
            .sum::<f64>()
            / n as f64;
        assert!((6.6..=6.8).contains(&mean), "mean radius {mean}");
    }

    #[test]
    fn param_validation() {
        assert!(SystemParams::default().validate().is_ok());
        let mut p = SystemParams::default();
        p.zeta[3] = 1.5;
        assert!(p.validate().is_err());
        let p = SystemParams {
            eta: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = SystemParams {
            num_users: 3,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = SystemParams::with_sizes(3, 2);
        assert_eq!(p.zeta, vec![0.7; 3]);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = Scenario::generate(11, SystemParams::with_sizes(3, 2)).unwrap();
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in [
            "seed",
            "params",
            "bs_pos",
            "user_pos",
            "target_pos",
            "h_bs_user",
            "h_to_target",
        ] {
            assert!(keys.iter().any(|x| x == k), "missing {k}");
        }
        assert_eq!(keys.len(), 7);
    }
}
