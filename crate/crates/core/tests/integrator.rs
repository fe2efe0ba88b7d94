use pnflow_core::analysis::{run_theorem_experiment_full, ExperimentConfig};
use pnflow_core::flow_systems::{FlowKind, FullFlow, PhaseFlow};
use pnflow_core::gw_space::{ricci_phase, GwSpace, PhasePoint};
use pnflow_core::integrator::{
    integrate, locate_sign_change, Crossing, EventKind, IntegratorConfig, Monitor, Termination,
};
use pnflow_core::{Error, Result};

#[test]
fn reparametrized_phi_is_t_plus_n() {
    let rhs = |_t: f64, _y: &[f64; 1]| -> Result<[f64; 1]> { Ok([1.0]) };
    let traj = integrate(&rhs, 0.0, [10.0], &IntegratorConfig::with_t_max(100.0), &[]).unwrap();
    assert_eq!(traj.termination, Termination::ReachedTmax);
    for s in &traj.samples {
        assert!((s.y[0] - (s.t + 10.0)).abs() < 1e-12);
    }
    assert_eq!(traj.last().unwrap().t, 100.0);
}

#[test]
fn linear_monitor_gives_one_event_at_one() {
    let rhs = |_t: f64, _y: &[f64; 1]| -> Result<[f64; 1]> { Ok([0.0]) };
    let monitors = [Monitor::sign_change("t-1", |t: f64, _y: &[f64; 1]| t - 1.0)];
    let traj = integrate(
        &rhs,
        0.0,
        [0.0],
        &IntegratorConfig::with_t_max(2.0),
        &monitors,
    )
    .unwrap();
    assert_eq!(traj.events.len(), 1);
    let e = &traj.events[0];
    assert_eq!(e.kind, EventKind::SignChange("t-1".into()));
    assert_eq!(e.crossing, Crossing::Rising);
    assert!((e.t - 1.0).abs() <= 1e-10);
}

#[test]
fn einstein_metric_is_stationary() {
    let traj = integrate(
        &FullFlow {
            space: GwSpace::pn(2).unwrap(),
            kind: FlowKind::Normalized,
        },
        0.0,
        [1.0; 3],
        &IntegratorConfig::with_t_max(50.0),
        &[],
    )
    .unwrap();
    for s in &traj.samples {
        for x in s.y {
            assert!((x - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn sample_times_strictly_increase_and_events_are_ordered() {
    let rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -y[0]]) };
    let monitors = [
        Monitor::sign_change("x", |_t: f64, y: &[f64; 2]| y[0]),
        Monitor::sign_change("v", |_t: f64, y: &[f64; 2]| y[1]),
    ];
    let traj = integrate(
        &rhs,
        0.0,
        [1.0, 0.0],
        &IntegratorConfig::with_t_max(20.0),
        &monitors,
    )
    .unwrap();
    assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
    assert!(traj.events.windows(2).all(|w| w[0].t <= w[1].t));
    // zeros of cos at pi/2 + k pi, of -sin at k pi (k >= 1)
    let xs: Vec<f64> = traj
        .events
        .iter()
        .filter(|e| e.kind.name() == "x")
        .map(|e| e.t)
        .collect();
    assert_eq!(xs.len(), 6);
    for (k, t) in xs.iter().enumerate() {
        let exact = core::f64::consts::FRAC_PI_2 + k as f64 * core::f64::consts::PI;
        assert!((t - exact).abs() < 1e-8, "{t} vs {exact}");
    }
}

#[test]
fn halving_rel_tol_moves_the_end_state_little() {
    let run = |rel_tol: f64| {
        let cfg = IntegratorConfig {
            rel_tol,
            ..IntegratorConfig::with_t_max(0.5)
        };
        integrate(&PhaseFlow { n: 2 }, 0.0, [3.0, -0.2], &cfg, &[]).unwrap()
    };
    let a = run(1e-10);
    let b = run(5e-11);
    assert_eq!(a.termination, b.termination);
    let (ya, yb) = (a.last().unwrap().y, b.last().unwrap().y);
    for i in 0..2 {
        assert!((ya[i] - yb[i]).abs() <= 10.0 * 1e-10 * ya[i].abs().max(1.0));
    }
}

#[test]
fn generic_full_flow_collapses_and_is_surfaced() {
    // away from the submersion locus the normalized flow degenerates in finite time
    let traj = integrate(
        &FullFlow {
            space: GwSpace::pn(2).unwrap(),
            kind: FlowKind::Normalized,
        },
        0.0,
        [1.2, 0.8, 1.0],
        &IntegratorConfig::with_t_max(1e3),
        &[],
    )
    .unwrap();
    assert!(traj.termination.is_error(), "{:?}", traj.termination);
}

#[test]
fn r1_event_is_the_first_zero_and_r1_is_negative_just_after() {
    let run = run_theorem_experiment_full(&ExperimentConfig::new(2)).unwrap();
    let event = run.trajectory.first_event("r1", Crossing::Falling).unwrap();
    let tol = ExperimentConfig::new(2).integrator.event_tol;
    let r1_at = |y: [f64; 2]| {
        ricci_phase(&PhasePoint::new(2, y[0], y[1]).unwrap())
            .unwrap()
            .r[0]
    };
    // the reparametrized phi is t + N, so psi is read off the dense samples
    let after = run
        .trajectory
        .samples
        .iter()
        .find(|s| s.t > event.t)
        .unwrap();
    assert!(r1_at(after.y) < 0.0);
    assert!(r1_at(event.state) <= 0.0 || (event.state[0] - (event.t + 4.0)).abs() < 1e-6);
    for s in run
        .trajectory
        .samples
        .iter()
        .filter(|s| s.t < event.t - tol)
    {
        assert!(r1_at(s.y) > 0.0);
    }
}

#[test]
fn bisection_tightening_is_consistent() {
    let f = |t: f64| (t - 0.3).powi(3) + 0.01 * (t - 0.3);
    let loose = locate_sign_change(f, 0.0, 1.0, 1e-6).unwrap();
    let tight = locate_sign_change(f, 0.0, 1.0, 1e-7).unwrap();
    assert!((loose - tight).abs() < 1e-6);
    assert!((tight - 0.3).abs() < 1e-7);
    assert!(matches!(
        locate_sign_change(f, 0.5, 1.0, 1e-6),
        Err(Error::NoBracket { .. })
    ));
}

/// In original time the same start collapses near `t = 1.0742`; the step
/// size underflows there and the time of collapse is stable in `rel_tol`.
#[test]
fn finite_time_collapse_is_reproducible() {
    let end = |rel_tol: f64| {
        let cfg = IntegratorConfig {
            rel_tol,
            ..IntegratorConfig::with_t_max(10.0)
        };
        let traj = integrate(&PhaseFlow { n: 2 }, 0.0, [3.0, -0.2], &cfg, &[]).unwrap();
        assert_eq!(traj.termination, Termination::StepUnderflow);
        traj.last().unwrap().t
    };
    let (a, b) = (end(1e-10), end(5e-11));
    assert!((a - b).abs() < 1e-8 * a, "{a} {b}");
    assert!((a - 1.0742).abs() < 1e-3);
}
