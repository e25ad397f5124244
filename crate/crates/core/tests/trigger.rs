//! Trigger-law oracles: self-triggered crossing times and the auxiliary variable.

use approx::assert_relative_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use rigid_consensus::graph::Topology;
use rigid_consensus::trigger::{
    self_condition_holds, self_measurement_bound, self_threshold, y_step, zeno_lower_bound, TriggerParams,
    TriggerState,
};
use rigid_consensus::Vector6;

fn self_params() -> TriggerParams<f64> {
    TriggerParams {
        gamma: 0.5,
        kappa: 0.5,
        varpi: 0.6,
        theta: 2.0,
        lipschitz_p: 1.0,
        y0: 4.0,
        x_m: 10.0,
        y_m: 1.0,
    }
    .for_self_trigger()
}

fn ring() -> Topology<f64> {
    Topology::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

/// State right after an event at `t_last` with `‖e‖ = e_norm` and `‖û‖ = u_norm`.
fn after_event(t_last: f64, e_norm: f64, u_norm: f64) -> TriggerState<f64> {
    let mut ts = TriggerState::new(0, &ring(), 4.0);
    let e = Vector6::new(e_norm, 0.0, 0.0, 0.0, 0.0, 0.0);
    ts.record_event(0, t_last, &e, &Vector3::new(0.0, u_norm, 0.0));
    ts
}

/// Root of `c(exp(X_M s) − 1) = L exp(−γ(t_last + s)/2)` in `s` by bisection.
fn crossing(t_last: f64, e_norm: f64, theta_acc: f64, p: &TriggerParams<f64>) -> f64 {
    let c = (p.x_m * e_norm + theta_acc) / p.x_m;
    let level = (p.y0 / (p.theta * p.lipschitz_p * p.lipschitz_p)).sqrt();
    let gap = |s: f64| c * ((p.x_m * s).exp() - 1.0) - level * (-0.5 * p.gamma * (t_last + s)).exp();
    let (mut lo, mut hi) = (0.0, 1.0);
    while gap(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn self_trigger_fires_at_bisected_crossing() {
    let p = self_params();
    for &(t_last, e_norm, u_norm) in &[(0.0, 0.2, 0.0), (1.5, 0.05, 0.3), (7.0, 1.0, 2.0), (20.0, 0.01, 0.0)] {
        let ts = after_event(t_last, e_norm, u_norm);
        let theta_acc = ts.theta_accumulator(&p);
        assert_relative_eq!(theta_acc, u_norm, epsilon = 1e-15);
        let root = crossing(t_last, e_norm, theta_acc, &p);

        // Sampled at 1e-5 s, the first violation lands within one sample after the root.
        let h = 1e-5;
        let first = (1..)
            .map(|k| k as f64 * h)
            .find(|&s| !self_condition_holds(&ts, &p, 1.0, t_last + s).unwrap())
            .unwrap();
        assert!(first >= root - 1e-12 && first <= root + h + 1e-12, "first {first} root {root}");

        // Right after an event the inter-event lower bound is exactly this crossing.
        assert_relative_eq!(zeno_lower_bound(&ts, &p, 1.0), root, max_relative = 1e-9);
    }
}

#[test]
fn self_trigger_boundary_values() {
    let p = self_params();
    let ts = after_event(0.0, 0.2, 0.0);
    assert_eq!(self_measurement_bound(&ts, &p, 0.0), 0.0);
    assert_relative_eq!(self_threshold(&p, 1.0, 0.0), 2.0f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(self_threshold(&p, 1.0, 4.0), 2.0f64.sqrt() * (-1.0f64).exp(), epsilon = 1e-15);
}

#[test]
fn self_trigger_condition_requires_self_parameters() {
    let mut p = self_params();
    p.kappa = 0.5;
    assert!(self_condition_holds(&after_event(0.0, 0.1, 0.0), &p, 1.0, 0.1).is_err());
}

#[test]
fn y_decays_exponentially_without_coupling() {
    let p = self_params();
    let mut ts = after_event(0.0, 0.0, 0.0);
    let dt = 0.01;
    for _ in 0..200 {
        ts.y = y_step(&ts, &p, 4.0, 1.0, &Vector6::zeros(), &Vector6::zeros(), dt);
    }
    assert_relative_eq!(ts.y, 4.0 * (-1.0f64).exp(), max_relative = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bound_grows_and_threshold_decays(e_norm in 0.001f64..2.0, u_norm in 0.0f64..3.0, t0 in 0.0f64..30.0, s in 0.0f64..0.5) {
        let p = self_params();
        let ts = after_event(t0, e_norm, u_norm);
        let a = self_measurement_bound(&ts, &p, t0 + s);
        let b = self_measurement_bound(&ts, &p, t0 + s + 0.01);
        prop_assert!(a >= 0.0 && b > a);
        prop_assert!(self_threshold(&p, 1.0, t0 + s + 0.01) < self_threshold(&p, 1.0, t0 + s));
        prop_assert!(zeno_lower_bound(&ts, &p, 1.0) > 0.0);
    }
}
