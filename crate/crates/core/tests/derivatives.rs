use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use wpisac_core::oracle::{finite_diff_check, finite_diff_hessian_check};
use wpisac_core::program::SmoothResidual;
use wpisac_core::reformulation::{
    build_subproblem, ftilde, ftilde_gradient, log_throughput, log_throughput_derivs, LogPoint,
    PowerVars, ResidualKind, TimeVars, VarLayout,
};
use wpisac_core::{build_tables, Scenario, SystemParams};

const STEP: f64 = 1e-6;
/// Differencing a gradient with large constant terms needs a wider step.
const HESS_STEP: f64 = 1e-4;
const TOL: f64 = 1e-6;
const POINTS: usize = 100;

fn random_point(rng: &mut ChaCha20Rng, m: usize, p_max: f64) -> LogPoint {
    LogPoint {
        t0: rng.random_range(0.5..9.5),
        u: (0..m).map(|_| rng.random_range(-10.0..0.0)).collect(),
        v: (0..m).map(|_| rng.random_range(-8.0..p_max.ln())).collect(),
    }
}

fn check_layout(time: TimeVars, power: PowerVars, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    for k in 0..POINTS {
        let m = 1 + k % 4;
        let s = Scenario::generate(seed + k as u64, SystemParams::with_sizes(m, 2)).unwrap();
        let tables = build_tables(&s).unwrap();
        let layout = VarLayout {
            num_users: m,
            time,
            power,
        };
        let anchor = random_point(&mut rng, m, s.params.p_max).v;
        let sub = build_subproblem(&s, &tables, layout, &anchor, 1e-9);
        let x = layout.pack(
            &random_point(&mut rng, m, s.params.p_max),
            rng.random_range(0.0..20.0),
        );
        let dim = layout.dim();
        for r in &sub.program.residuals {
            seen.insert(format!("{:?}", r.kind()));
            let ev = r.eval(&x);
            assert_eq!(ev.value, r.value(&x));
            let g = finite_diff_check(|y| r.value(y), &ev.dense_grad(dim), &x, STEP);
            let h = finite_diff_hessian_check(
                |y| r.eval(y).dense_grad(dim),
                &ev.dense_hess(dim),
                &x,
                HESS_STEP,
            );
            assert!(g <= TOL, "{:?} gradient error {g:e}", r.kind());
            assert!(h <= TOL, "{:?} hessian error {h:e}", r.kind());
        }
    }
    let expected = if matches!(power, PowerVars::Free) {
        5
    } else {
        3
    };
    assert_eq!(seen.len(), expected, "{seen:?}");
}

#[test]
fn proposed_residuals_match_finite_differences() {
    check_layout(TimeVars::PerUser, PowerVars::Free, 11);
}

#[test]
fn shared_time_residuals_match_finite_differences() {
    check_layout(TimeVars::Shared, PowerVars::Free, 23);
}

#[test]
fn fixed_power_residuals_match_finite_differences() {
    check_layout(TimeVars::PerUser, PowerVars::Fixed(2.0), 37);
}

#[test]
fn log_throughput_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..POINTS {
        let h = 10f64.powf(rng.random_range(-9.0..-3.0));
        let x = [rng.random_range(-10.0..2.0), rng.random_range(-10.0..0.7)];
        let f = |y: &[f64]| log_throughput(y[0], y[1], h, 1e-10, 1e6);
        let (g, hs) = log_throughput_derivs(x[0], x[1], h, 1e-10, 1e6);
        assert!(finite_diff_check(f, &g, &x, STEP) <= TOL);
        let grad = |y: &[f64]| log_throughput_derivs(y[0], y[1], h, 1e-10, 1e6).0.to_vec();
        let hs: Vec<Vec<f64>> = hs.iter().map(|r| r.to_vec()).collect();
        assert!(finite_diff_hessian_check(grad, &hs, &x, HESS_STEP) <= TOL);
    }
}

#[test]
fn ftilde_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for k in 0..POINTS {
        let m = 1 + k % 5;
        let s = Scenario::generate(k as u64, SystemParams::with_sizes(m, 1)).unwrap();
        let tables = build_tables(&s).unwrap();
        let (eta, p0) = (s.params.eta, s.params.p0);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-8.0..0.7)).collect();
        let g = ftilde_gradient(&v, &tables, eta, p0, 0);
        let err = finite_diff_check(|y| ftilde(y, &tables, eta, p0, 0), &g, &v, STEP);
        // relative to the gradient magnitude, which can be in the hundreds
        assert!(err <= TOL, "{err:e}");
    }
}

#[test]
fn the_energy_residual_reads_the_log_form() {
    // u + v - ln E  <= 0  exactly when  t p <= E
    let s = Scenario::generate(3, SystemParams::with_sizes(1, 1)).unwrap();
    let tables = build_tables(&s).unwrap();
    let layout = VarLayout::proposed(1);
    let sub = build_subproblem(&s, &tables, layout, &[0.0], 1e-9).without(ResidualKind::Epigraph);
    let energy = sub
        .program
        .residuals
        .iter()
        .find(|r| r.kind() == ResidualKind::Energy)
        .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let t0: f64 = rng.random_range(0.1..9.0);
        let t: f64 = rng.random_range(1e-6..1.0);
        let p: f64 = rng.random_range(1e-4..2.0);
        let e = s.harvest_rate(0) * t0;
        let x = layout.pack(
            &LogPoint {
                t0,
                u: vec![t.ln()],
                v: vec![p.ln()],
            },
            0.0,
        );
        let gap = (t * p - e) / e;
        if gap.abs() > 1e-12 {
            assert_eq!(energy.value(&x) <= 0.0, t * p <= e);
        }
    }
}
