mod common;

use netadapt::continuous::{ContinuousObserverState, ContinuousSourceModel, ContinuousSystem, Weighting};
use netadapt::coupling::{self, build_h};
use netadapt::integrator::Tolerances;
use netadapt::linalg::Matrix;
use netadapt::network::{self, SensorNetwork};
use netadapt::scenario::{run_scenario, Mode, RunOptions, ScenarioConfig, SimulationLog};
use netadapt::signal::SignalSpec;
use proptest::prelude::*;
use rand::Rng;

struct Fixture {
    sys: ContinuousSystem,
    /// `Q = −(𝓗ᵀP + P𝓗)` for the weighting `P`.
    q: Matrix,
}

fn fixture(seed: u64, m: usize) -> Fixture {
    let mut rng = common::rng(seed);
    let net = network::normalize_balanced(&common::reachable_network(&mut rng, m, 0.4)).unwrap();
    let bundle = network::laplacian_bundle(&net).unwrap();
    let blocks: Vec<Matrix> = (0..m).map(|_| common::hurwitz(&mut rng, 2)).collect();
    let (sys, q) = loop {
        let source = ContinuousSourceModel {
            f_star: common::uniform_matrix(&mut rng, 2, 2, -1.0, 1.0),
            g_star: common::uniform_matrix(&mut rng, 2, 1, -1.0, 1.0),
            delta_f: common::uniform_matrix(&mut rng, 2, 2, -0.2, 0.2),
            delta_g: common::uniform_matrix(&mut rng, 2, 1, -0.2, 0.2),
            input: SignalSpec::parse("sin:0.7:0.5:0|cos:1.5:1:pi/6").unwrap(),
            disturbance: SignalSpec::parse("sin:5.5:0.1:0;cos:2.75:0.3:0").unwrap(),
            disturbance_bound: 5.5f64.hypot(2.75),
        };
        let op = build_h(&bundle, &blocks, &source.f0()).unwrap();
        if !op.stable {
            continue;
        }
        let cert = coupling::certificate_continuous(&op, &Matrix::identity(2 * m)).unwrap();
        let h = &op.matrix;
        let q = -&(&(&h.transpose() * &cert.p) + &(&cert.p * h));
        let sys = ContinuousSystem::new(net.clone(), source, blocks.clone(), 10.0, 7.0, Weighting::Dense(cert.p)).unwrap();
        break (sys, q);
    };
    Fixture { sys, q }
}

fn random_state(sys: &ContinuousSystem, seed: u64) -> Vec<f64> {
    let mut rng = common::rng(seed);
    (0..sys.state_len()).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn quad(q: &Matrix, e: &[f64]) -> f64 {
    e.iter().zip(q.matvec(e)).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn adaptation_cancels_cross_terms(m in 1usize..=5, seed in any::<u64>(), t in 0.0..30.0f64) {
        let f = fixture(seed, m);
        let y = random_state(&f.sys, seed.wrapping_add(1));
        let vdot = f.sys.lyapunov_derivative(t, &y, false);
        let expected = -quad(&f.q, &f.sys.error(&y));
        prop_assert!((vdot - expected).abs() <= 1e-8 * expected.abs().max(1.0));
    }

    #[test]
    fn lyapunov_derivative_matches_finite_difference(m in 1usize..=5, seed in any::<u64>(), t in 0.0..30.0f64) {
        let f = fixture(seed, m);
        let y = random_state(&f.sys, seed.wrapping_add(2));
        let mut dy = vec![0.0; y.len()];
        f.sys.rhs(t, &y, &mut dy, &mut f.sys.workspace());
        let h = 1e-6;
        let shift = |s: f64| -> Vec<f64> { y.iter().zip(&dy).map(|(a, b)| a + s * h * b).collect() };
        let fd = (f.sys.lyapunov_sample(&shift(1.0)) - f.sys.lyapunov_sample(&shift(-1.0))) / (2.0 * h);
        let analytic = f.sys.lyapunov_derivative(t, &y, true);
        prop_assert!((fd - analytic).abs() <= 1e-4 * analytic.abs().max(1.0));
    }
}

#[test]
fn zero_error_equilibrium_is_invariant() {
    let f_star = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, -0.5]]);
    let g_star = Matrix::from_rows(&[&[0.0], &[1.0]]);
    for net in [SensorNetwork::star(4), SensorNetwork::cyclic(4), SensorNetwork::path(4)] {
        let source = ContinuousSourceModel {
            f_star: f_star.clone(),
            g_star: g_star.clone(),
            delta_f: Matrix::zeros(2, 2),
            delta_g: Matrix::zeros(2, 1),
            input: SignalSpec::parse("sin:0.7:0.5:0|cos:1.5:1:pi/6").unwrap(),
            disturbance: SignalSpec::zero(2),
            disturbance_bound: 0.0,
        };
        let sys = ContinuousSystem::new(net, source, vec![Matrix::identity(2).scale(-2.0); 4], 10.0, 10.0, Weighting::Identity).unwrap();
        let x0 = vec![1.0, -0.5];
        let state = ContinuousObserverState {
            x0: x0.clone(),
            x: x0.repeat(4),
            f_hat: vec![f_star.clone(); 4],
            g_hat: vec![g_star.clone(); 4],
        };
        let log = sys.integrate(&state, 30.0, &Tolerances::default(), 301).unwrap();
        assert!(log.err_total.iter().all(|&e| e <= 1e-9), "max {:e}", log.err_total.iter().cloned().fold(0.0, f64::max));
    }
}

#[test]
fn disturbance_free_error_decreases_over_horizons() {
    for topology in ["star", "cyclic", "path"] {
        let mut cfg = ScenarioConfig::reference(Mode::Continuous, topology, 4).unwrap();
        cfg.samples = 31;
        let out = run_scenario(&cfg, &RunOptions::default()).unwrap();
        let Some(SimulationLog::Continuous(log)) = out.log else {
            panic!("continuous log expected");
        };
        let at = |t: f64| log.err_total[log.times.iter().position(|&s| (s - t).abs() < 1e-9).unwrap()];
        let (e10, e20, e30) = (at(10.0), at(20.0), at(30.0));
        assert!(e10 > e20 && e20 > e30, "{topology}: {e10:e} {e20:e} {e30:e}");
    }
}
