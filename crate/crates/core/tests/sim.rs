use nalgebra::{DVector, Vector3};

use reachsim::config::tuned_profile;
use reachsim::kinematics::forward_kinematics;
use reachsim::sim::rk4_step;
use reachsim::{
    canonical_7dof, canonical_home, run, ChainModel, Config, Config32, Controller, Disturbance, JointState,
    Termination,
};

fn full_horizon(max_time: f64) -> Config {
    Config {
        max_time,
        stop_position_tol: 1e-9,
        stop_speed_tol: 1e-9,
        ..Config::default()
    }
}

#[test]
fn identical_configs_give_identical_traces() {
    let chain = canonical_7dof::<f64>();
    let config = Config {
        max_time: 1.0,
        observer_on: true,
        disturbances: vec![Disturbance::constant(3, 0.4)],
        ..Config::default()
    };
    let a = run(&chain, &tuned_profile(), &config).unwrap();
    let b = run(&chain, &tuned_profile(), &config).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.q.as_slice(), rb.q.as_slice());
        assert_eq!(ra.u_filtered.as_slice(), rb.u_filtered.as_slice());
        assert_eq!(ra.d_hat.as_slice(), rb.d_hat.as_slice());
    }
}

#[test]
fn halving_dt_moves_final_position_little() {
    let chain = canonical_7dof::<f64>();
    let coarse = Config::default();
    let fine = Config { dt: coarse.dt / 2.0, ..coarse.clone() };
    let a = run(&chain, &tuned_profile(), &coarse).unwrap();
    let b = run(&chain, &tuned_profile(), &fine).unwrap();
    assert_eq!(a.termination, Termination::Converged);
    assert_eq!(b.termination, Termination::Converged);
    let diff = (a.last().x - b.last().x).norm();
    assert!(diff < 1e-4, "final positions differ by {diff}");
}

#[test]
fn canonical_reach_converges_with_finite_records() {
    let chain = canonical_7dof::<f64>();
    let trace = run(&chain, &tuned_profile(), &Config::default()).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    assert!(trace.last().dx_norm < 0.02);
    assert!(trace.records.iter().all(|r| r.is_finite()));
    for w in trace.records.windows(2) {
        assert!((w[1].t - w[0].t - 1e-3).abs() < 1e-12);
    }
    let first = &trace.records[0];
    assert_eq!(first.t, 0.0);
    let start = Vector3::new(0.085, 0.0, -0.5585);
    assert!((first.x - start).norm() < 1e-9);
}

#[test]
fn single_precision_reach_tracks_double() {
    let chain = canonical_7dof::<f32>();
    let params = tuned_profile().cast::<f32>();
    let trace = run(&chain, &params, &Config32::default()).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let reference = run(&canonical_7dof::<f64>(), &tuned_profile(), &Config::default()).unwrap();
    let t32 = trace.last().t as f64;
    assert!((t32 - reference.last().t).abs() < 0.2, "f32 {t32} vs f64 {}", reference.last().t);
}

#[test]
fn start_at_target_converges_at_once() {
    let chain = canonical_7dof::<f64>();
    let home = canonical_home::<f64>();
    let x0 = forward_kinematics(&chain, &JointState::at_rest(home)).unwrap().position;
    let params = Controller { target: x0, ..tuned_profile() };
    let trace = run(&chain, &params, &Config::default()).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    assert!(trace.records.len() <= 3);
    assert!(trace.records.iter().all(|r| r.speed < 1e-6));
}

#[test]
fn zero_input_equilibrium_is_kept() {
    let chain = canonical_7dof::<f64>().with_gravity(Vector3::zeros()).unwrap();
    let q = DVector::from_vec(vec![0.3, -0.2, 0.5, 1.0, -0.4, 0.2, 0.1]);
    let state = JointState::at_rest(q.clone());
    let zero = DVector::zeros(7);
    let next = rk4_step(&chain, &state, &zero, |_| DVector::zeros(7), 0.0, 1e-3, true).unwrap();
    assert_eq!(next.q, q);
    assert_eq!(next.qdot, zero);
}

#[test]
fn pendulum_energy_is_conserved() {
    let link = reachsim::Link {
        mass: 1.2,
        com: Vector3::new(0.0, 0.0, -0.3),
        inertia: reachsim::config::diagonal_inertia(0.02, 0.02, 0.004),
        axis: Vector3::x(),
        offset: Vector3::new(0.0, 0.0, -0.5),
        viscous: 0.0,
        coulomb: 0.0,
        slope: 20.0,
    };
    let chain = ChainModel::new("pendulum", Vector3::new(0.0, 0.0, -9.81), vec![link]).unwrap();
    // Closed form: E = (I + m lc^2)/2 qdot^2 + m g lc (1 - cos q).
    let energy = |s: &JointState<f64>| {
        let (m, lc, i) = (1.2, 0.3, 0.02);
        0.5 * (i + m * lc * lc) * s.qdot[0].powi(2) + m * 9.81 * lc * (1.0 - s.q[0].cos())
    };
    let mut state = JointState::at_rest(DVector::from_element(1, 1.1));
    let e0 = energy(&state);
    let zero = DVector::zeros(1);
    for k in 0..5000 {
        state = rk4_step(&chain, &state, &zero, |_| DVector::zeros(1), k as f64 * 1e-3, 1e-3, false).unwrap();
    }
    let drift = (energy(&state) - e0).abs() / e0;
    assert!(drift < 1e-3, "drift {drift}");
}

#[test]
fn observer_tracks_injected_constant() {
    let chain = canonical_7dof::<f64>();
    let config = Config {
        max_time: 0.3,
        observer_on: true,
        disturbances: vec![Disturbance::constant(2, 1.0)],
        ..Config::default()
    };
    let trace = run(&chain, &tuned_profile(), &config).unwrap();
    let at = |t: f64| trace.records.iter().find(|r| r.t >= t - 1e-9).unwrap();
    assert!((at(0.1).d_hat[1] - 1.0).abs() < 0.02, "{}", at(0.1).d_hat[1]);
    for r in trace.records.iter().filter(|r| r.t >= 0.1) {
        assert!((r.d_hat[1] - 1.0).abs() < 0.02);
        assert!(r.d_hat.iter().enumerate().all(|(j, d)| j == 1 || d.abs() < 0.02));
    }
}

#[test]
fn disabled_observer_reports_zero_estimate() {
    let chain = canonical_7dof::<f64>();
    let config = Config {
        max_time: 0.2,
        disturbances: vec![Disturbance::constant(2, 1.0)],
        ..Config::default()
    };
    let trace = run(&chain, &tuned_profile(), &config).unwrap();
    assert!(trace.records.iter().all(|r| r.d_hat.iter().all(|&d| d == 0.0)));
}

#[test]
fn windowed_disturbance_only_acts_inside_window() {
    let chain = canonical_7dof::<f64>();
    let base = Config { max_time: 0.4, ..Config::default() };
    let windowed = Config {
        disturbances: vec![Disturbance { joint: 4, torque: 2.0, t0: 0.2, t1: Some(0.3) }],
        ..base.clone()
    };
    let a = run(&chain, &tuned_profile(), &base).unwrap();
    let b = run(&chain, &tuned_profile(), &windowed).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        if ra.t <= 0.2 + 1e-9 {
            assert_eq!(ra.q.as_slice(), rb.q.as_slice());
        }
    }
    assert_ne!(a.last().q, b.last().q);
}

#[test]
fn observer_reduces_error_under_mass_mismatch() {
    let chain = canonical_7dof::<f64>();
    let paired = |observer_on: bool| {
        let config = Config {
            observer_on,
            disturbances: vec![Disturbance::constant(2, 1.0)],
            mass_perturbation: 0.2,
            ..full_horizon(60.0)
        };
        run(&chain, &tuned_profile(), &config).unwrap().last().dx_norm
    };
    let (off, on) = std::thread::scope(|s| {
        let off = s.spawn(|| paired(false));
        let on = paired(true);
        (off.join().unwrap(), on)
    });
    assert!(on < off, "observer on {on}, off {off}");
}
