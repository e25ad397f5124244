//! Dynamic event-triggered condition, its self-triggered sufficient condition,
//! the auxiliary variable `y_i`, and the inter-event (Zeno) diagnostic.
//!
//! Conditions are sampled once per integration step; an event fires on the
//! first sample at which the configured condition is violated.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Topology;
use crate::scalar::Scalar;
use crate::Vector6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriggerError {
    #[error("gamma must be positive, got {0}")]
    Gamma(f64),
    #[error("kappa must lie in [0, 1/2], got {0}")]
    Kappa(f64),
    #[error("varpi must lie in [0, 1], got {0}")]
    Varpi(f64),
    #[error("theta = {theta} violates the stability bound theta >= (1 - kappa)/gamma = {bound}")]
    StabilityBound { theta: f64, bound: f64 },
    #[error("Lipschitz constant P must be positive, got {0}")]
    Lipschitz(f64),
    #[error("y0 must be non-negative, got {0}")]
    InitialY(f64),
    #[error("X_M must be positive, got {0}")]
    DriftBound(f64),
    #[error("Y_M must be positive, got {0}")]
    InputBound(f64),
    #[error("self-triggered condition requires kappa = 0 and varpi = 0 (got kappa = {kappa}, varpi = {varpi})")]
    ModeMismatch { kappa: f64, varpi: f64 },
}

/// How an agent decides when to sample, learn and broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerMode {
    /// Dynamic event-triggered condition; needs continuous neighbor state.
    Dynamic,
    /// Self-triggered sufficient condition from last-event data only.
    #[serde(rename = "self")]
    SelfTriggered,
    /// Time-triggered baseline: an event every step.
    Periodic,
}

impl fmt::Display for TriggerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriggerMode::Dynamic => "dynamic",
            TriggerMode::SelfTriggered => "self",
            TriggerMode::Periodic => "periodic",
        })
    }
}

impl FromStr for TriggerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(TriggerMode::Dynamic),
            "self" => Ok(TriggerMode::SelfTriggered),
            "periodic" => Ok(TriggerMode::Periodic),
            other => Err(format!("unknown trigger mode '{other}' (expected dynamic, self or periodic)")),
        }
    }
}

/// Trigger tuning of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerParams<T: Scalar> {
    /// Decay rate γ of `y` (1/s).
    pub gamma: T,
    /// Coupling κ ∈ [0, ½] of `y` to the error bracket.
    pub kappa: T,
    /// Fraction ϖ ∈ [0, 1] of the state cost granted to the measurement error.
    pub varpi: T,
    /// Weight θ of the bracket in the trigger test.
    pub theta: T,
    /// Lipschitz constant P of the controller.
    pub lipschitz_p: T,
    /// `y(0)`.
    pub y0: T,
    /// Drift bound X_M with `‖X(e)‖ ≤ X_M ‖e‖` (1/s), asserted by the user.
    pub x_m: T,
    /// Bound Y_M on the spectral norm of the augmented input matrix.
    pub y_m: T,
}

impl<T: Scalar> TriggerParams<T> {
    pub fn validate(&self) -> Result<(), TriggerError> {
        let f = |x: T| x.as_f64();
        if !(self.gamma > T::zero()) {
            return Err(TriggerError::Gamma(f(self.gamma)));
        }
        if !(self.kappa >= T::zero() && self.kappa <= T::lit(0.5)) {
            return Err(TriggerError::Kappa(f(self.kappa)));
        }
        if !(self.varpi >= T::zero() && self.varpi <= T::one()) {
            return Err(TriggerError::Varpi(f(self.varpi)));
        }
        let bound = (T::one() - self.kappa) / self.gamma;
        if !(self.theta >= bound) {
            return Err(TriggerError::StabilityBound { theta: f(self.theta), bound: f(bound) });
        }
        if !(self.lipschitz_p > T::zero()) {
            return Err(TriggerError::Lipschitz(f(self.lipschitz_p)));
        }
        if !(self.y0 >= T::zero()) {
            return Err(TriggerError::InitialY(f(self.y0)));
        }
        if !(self.x_m > T::zero()) {
            return Err(TriggerError::DriftBound(f(self.x_m)));
        }
        if !(self.y_m > T::zero()) {
            return Err(TriggerError::InputBound(f(self.y_m)));
        }
        Ok(())
    }

    /// Self-triggered variant: κ = 0 and ϖ = 0, everything else unchanged.
    pub fn for_self_trigger(mut self) -> Self {
        self.kappa = T::zero();
        self.varpi = T::zero();
        self
    }

    fn require_self_mode(&self) -> Result<(), TriggerError> {
        if self.kappa != T::zero() || self.varpi != T::zero() {
            return Err(TriggerError::ModeMismatch { kappa: self.kappa.as_f64(), varpi: self.varpi.as_f64() });
        }
        Ok(())
    }
}

/// What an agent knows about one in-neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborLink<T: Scalar> {
    pub index: usize,
    pub weight: T,
    /// Most recent control received from this neighbor.
    pub control: Vector3<T>,
    /// Largest `‖û_j‖` in effect since this agent's last event.
    pub max_norm: T,
}

/// Per-agent triggering memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState<T: Scalar> {
    pub t_last: T,
    pub last_event_step: Option<usize>,
    pub e_held: Vector6<T>,
    pub y: T,
    /// `‖û_i(t_i^h)‖`.
    pub own_control_norm: T,
    pub neighbors: Vec<NeighborLink<T>>,
    pub event_count: usize,
    /// Smallest observed inter-event time, in steps.
    pub min_interval_steps: Option<usize>,
}

impl<T: Scalar> TriggerState<T> {
    pub fn new(agent: usize, topology: &Topology<T>, y0: T) -> Self {
        let neighbors = topology
            .neighbors(agent)
            .iter()
            .map(|&j| NeighborLink {
                index: j,
                weight: topology.weight(agent, j),
                control: Vector3::zeros(),
                max_norm: T::zero(),
            })
            .collect();
        Self {
            t_last: T::zero(),
            last_event_step: None,
            e_held: Vector6::zeros(),
            y: y0,
            own_control_norm: T::zero(),
            neighbors,
            event_count: 0,
            min_interval_steps: None,
        }
    }

    /// Snapshots an own event at `(step, t)` with sampled error `e` and new control `u`.
    /// The neighbor maxima restart from the controls currently in effect.
    pub fn record_event(&mut self, step: usize, t: T, e: &Vector6<T>, u: &Vector3<T>) {
        if let Some(prev) = self.last_event_step {
            let gap = step - prev;
            self.min_interval_steps = Some(self.min_interval_steps.map_or(gap, |m| m.min(gap)));
        }
        self.last_event_step = Some(step);
        self.t_last = t;
        self.e_held = *e;
        self.own_control_norm = u.norm();
        for link in &mut self.neighbors {
            link.max_norm = link.control.norm();
        }
        self.event_count += 1;
    }

    /// Delivers a control broadcast by in-neighbor `from`. Returns false if `from` is not a neighbor.
    pub fn receive(&mut self, from: usize, u: &Vector3<T>) -> bool {
        match self.neighbors.iter_mut().find(|l| l.index == from) {
            Some(link) => {
                link.control = *u;
                link.max_norm = link.max_norm.max(u.norm());
                true
            }
            None => false,
        }
    }

    /// `Θ_i = Σ_j a_ij Y_M (‖û_i(t_i^h)‖ + max_s ‖û_j(t_j^s)‖)`.
    pub fn theta_accumulator(&self, p: &TriggerParams<T>) -> T {
        self.neighbors
            .iter()
            .fold(T::zero(), |s, l| s + l.weight * p.y_m * (self.own_control_norm + l.max_norm))
    }
}

/// `E_i(t) = e_i(t_i^h) − e_i(t)`.
pub fn measurement_error<T: Scalar>(ts: &TriggerState<T>, e_now: &Vector6<T>) -> Vector6<T> {
    ts.e_held - e_now
}

/// `ϖ λ_min(Q) ‖e‖² − λ_max(R) P² ‖E‖²`.
fn bracket<T: Scalar>(p: &TriggerParams<T>, q_min: T, r_max: T, e_now: &Vector6<T>, big_e: &Vector6<T>) -> T {
    p.varpi * q_min * e_now.norm_squared() - r_max * p.lipschitz_p * p.lipschitz_p * big_e.norm_squared()
}

/// Advances `y` by one step of `ẏ = −γy + κ(ϖλ_min(Q)‖e‖² − λ_max(R)P²‖E‖²)`.
///
/// Explicit Euler; for κ = 0 the exact decay `y·exp(−γ dt)` is used.
pub fn y_step<T: Scalar>(
    ts: &TriggerState<T>,
    p: &TriggerParams<T>,
    q_min: T,
    r_max: T,
    e_now: &Vector6<T>,
    big_e: &Vector6<T>,
    dt: T,
) -> T {
    if p.kappa == T::zero() {
        return ts.y * (-p.gamma * dt).exp();
    }
    ts.y + dt * (-p.gamma * ts.y + p.kappa * bracket(p, q_min, r_max, e_now, big_e))
}

/// True iff `y + θ(ϖλ_min(Q)‖e‖² − λ_max(R)P²‖E‖²) ≥ 0`. An event fires when false.
pub fn dynamic_condition_holds<T: Scalar>(
    ts: &TriggerState<T>,
    p: &TriggerParams<T>,
    q_min: T,
    r_max: T,
    e_now: &Vector6<T>,
) -> bool {
    let big_e = measurement_error(ts, e_now);
    ts.y + p.theta * bracket(p, q_min, r_max, e_now, &big_e) >= T::zero()
}

/// `‖Δ_i(t)‖ = ((X_M‖e_i(t_i^h)‖ + Θ_i)/X_M)(exp(X_M(t − t_i^h)) − 1)`.
///
/// This is the solution of `ḃ = X_M b + X_M‖e_i(t_i^h)‖ + Θ_i`, `b(t_i^h) = 0`,
/// which dominates `‖E_i‖` under `‖Ė_i‖ ≤ X_M‖E_i‖ + X_M‖e_i(t_i^h)‖ + Θ_i`.
/// A `2X_M` denominator would halve this and no longer bound `‖E_i‖`.
pub fn self_measurement_bound<T: Scalar>(ts: &TriggerState<T>, p: &TriggerParams<T>, t_now: T) -> T {
    let growth = (p.x_m * (t_now - ts.t_last)).exp_m1();
    (p.x_m * ts.e_held.norm() + ts.theta_accumulator(p)) / p.x_m * growth
}

/// `sqrt(y(0)/(θ λ_max(R) P²)) exp(−½ γ t)`, the right-hand side of the self-triggered test.
pub fn self_threshold<T: Scalar>(p: &TriggerParams<T>, r_max: T, t_now: T) -> T {
    (p.y0 / (p.theta * r_max * p.lipschitz_p * p.lipschitz_p)).sqrt() * (-T::lit(0.5) * p.gamma * t_now).exp()
}

/// True iff `‖Δ_i(t)‖ ≤ sqrt(y(0)/(θλ_max(R)P²)) exp(−½γt)`; uses only last-event data.
pub fn self_condition_holds<T: Scalar>(
    ts: &TriggerState<T>,
    p: &TriggerParams<T>,
    r_max: T,
    t_now: T,
) -> Result<bool, TriggerError> {
    p.require_self_mode()?;
    Ok(self_measurement_bound(ts, p, t_now) <= self_threshold(p, r_max, t_now))
}

/// Lower bound on the next inter-event time right after an event at `ts.t_last`:
///
/// `(1/X_M) log( X_M sqrt(y0) / ((X_M‖e(t_h)‖ + Θ) sqrt(θλ_max(R)P²)) · exp(−½(γ + κ/θ) t̃) + 1 )`
///
/// The bound is implicit in the next instant `t̃`; it is evaluated at its fixed
/// point, i.e. the time at which the growth bound on `‖E‖` meets the decaying
/// threshold. Returns `+∞` when the growth bound is identically zero.
pub fn zeno_lower_bound<T: Scalar>(ts: &TriggerState<T>, p: &TriggerParams<T>, r_max: T) -> T {
    let two = T::lit(2.0);
    let growth = p.x_m * ts.e_held.norm() + ts.theta_accumulator(p);
    let level = (p.y0 / (p.theta * r_max * p.lipschitz_p * p.lipschitz_p)).sqrt();
    if growth <= T::zero() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let decay = (p.gamma + p.kappa / p.theta) / two;
    let scale = p.x_m * level / growth;
    let fixed_point = |tau: T| (scale * (-decay * (ts.t_last + tau)).exp()).ln_1p() / p.x_m;

    // g(τ) = fixed_point(τ) − τ is strictly decreasing with g(0) ≥ 0.
    let mut lo = T::zero();
    let mut hi = fixed_point(T::zero());
    if hi <= T::zero() {
        return T::zero();
    }
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if fixed_point(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::default_epsilon() * hi {
            break;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring() -> Topology<f64> {
        Topology::from_rows(&[vec![0., 1.], vec![1., 0.]]).unwrap()
    }

    pub(crate) fn default_params() -> TriggerParams<f64> {
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
    }

    #[test]
    fn parameter_validation() {
        let p = default_params();
        assert!(p.validate().is_ok());
        assert!(p.for_self_trigger().validate().is_ok());
        let bad = TriggerParams { theta: 0.5, ..p };
        assert_eq!(bad.validate(), Err(TriggerError::StabilityBound { theta: 0.5, bound: 1.0 }));
        assert!(matches!(TriggerParams { kappa: 0.7, ..p }.validate(), Err(TriggerError::Kappa(_))));
        assert!(matches!(TriggerParams { gamma: 0.0, ..p }.validate(), Err(TriggerError::Gamma(_))));
        assert!(matches!(TriggerParams { varpi: 1.5, ..p }.validate(), Err(TriggerError::Varpi(_))));
    }

    #[test]
    fn measurement_error_after_event_is_zero() {
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        let e = Vector6::from_row_slice(&[1., 2., 3., 4., 5., 6.]);
        ts.record_event(0, 0.0, &e, &Vector3::zeros());
        assert_eq!(measurement_error(&ts, &e), Vector6::zeros());
        assert_eq!(measurement_error(&ts, &Vector6::zeros()), e);
    }

    #[test]
    fn y_decay_closed_form() {
        let p = default_params().for_self_trigger();
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        let z = Vector6::zeros();
        for _ in 0..200 {
            ts.y = y_step(&ts, &p, 4.0, 1.0, &z, &z, 0.01);
        }
        assert_relative_eq!(ts.y, 4.0 * (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(ts.y, 1.4715, epsilon = 1e-4);
    }

    #[test]
    fn y_euler_step() {
        let p = default_params();
        let mut ts = TriggerState::new(0, &ring(), 1.0);
        let z = Vector6::zeros();
        assert_eq!(y_step(&ts, &p, 4.0, 1.0, &z, &z, 0.1), 1.0 - 0.1 * 0.5);

        // bracket = 0.6·4·‖e‖² − 1·1·‖E‖² = 2.4·1 − 4 = −1.6
        let e = Vector6::from_row_slice(&[1., 0., 0., 0., 0., 0.]);
        let big_e = Vector6::from_row_slice(&[0., 2., 0., 0., 0., 0.]);
        ts.y = 1.0;
        let expected = 1.0 + 0.1 * (-0.5 * 1.0 + 0.5 * (-1.6));
        assert_relative_eq!(y_step(&ts, &p, 4.0, 1.0, &e, &big_e, 0.1), expected, epsilon = 1e-15);
    }

    #[test]
    fn dynamic_condition_cases() {
        let p = default_params();
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        let e = Vector6::from_row_slice(&[0.5, -0.2, 0.1, 0., 0.3, 0.]);
        ts.record_event(0, 0.0, &e, &Vector3::zeros());
        assert!(dynamic_condition_holds(&ts, &p, 4.0, 1.0, &e));

        let p0 = TriggerParams { varpi: 0.0, ..p };
        ts.y = 0.0;
        assert!(!dynamic_condition_holds(&ts, &p0, 4.0, 1.0, &Vector6::zeros()));

        // y = 4, θ = 2: 4 + 2(2.4‖e‖² − ‖E‖²). e = [1,0,..], e_held = [1,2,0,..] → E = [0,2,0,..]:
        // 4 + 2(2.4 − 4) = 0.8 ≥ 0. With e_held = [1,2.2,0,..]: 4 + 2(2.4 − 4.84) = −0.88 < 0.
        ts.y = 4.0;
        let e = Vector6::from_row_slice(&[1., 0., 0., 0., 0., 0.]);
        ts.e_held = Vector6::from_row_slice(&[1., 2., 0., 0., 0., 0.]);
        assert!(dynamic_condition_holds(&ts, &p, 4.0, 1.0, &e));
        ts.e_held = Vector6::from_row_slice(&[1., 2.2, 0., 0., 0., 0.]);
        assert!(!dynamic_condition_holds(&ts, &p, 4.0, 1.0, &e));
    }

    #[test]
    fn self_bound_values() {
        let p = TriggerParams { x_m: 1.0, ..default_params().for_self_trigger() };
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        let e = Vector6::from_row_slice(&[2., 0., 0., 0., 0., 0.]);
        ts.record_event(0, 1.0, &e, &Vector3::zeros());
        assert_eq!(self_measurement_bound(&ts, &p, 1.0), 0.0);
        assert_relative_eq!(self_measurement_bound(&ts, &p, 1.0 + 2f64.ln()), 2.0, epsilon = 1e-14);
        assert_relative_eq!(self_measurement_bound(&ts, &p, 1.0 + 1.5f64.ln()), 1.0, epsilon = 1e-14);

        let mut quiet = TriggerState::new(0, &ring(), 4.0);
        quiet.record_event(0, 0.0, &Vector6::zeros(), &Vector3::zeros());
        for t in [0.0, 1.0, 50.0] {
            assert_eq!(self_measurement_bound(&quiet, &p, t), 0.0);
            assert!(self_condition_holds(&quiet, &p, 1.0, t).unwrap());
        }
    }

    #[test]
    fn theta_accumulator_tracks_neighbor_maximum() {
        let p = default_params();
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        ts.record_event(0, 0.0, &Vector6::zeros(), &Vector3::new(3., 0., 4.));
        assert_eq!(ts.theta_accumulator(&p), 5.0);
        assert!(ts.receive(1, &Vector3::new(0., 2., 0.)));
        assert!(ts.receive(1, &Vector3::new(0., 1., 0.)));
        assert_eq!(ts.theta_accumulator(&p), 7.0);
        assert!(!ts.receive(0, &Vector3::zeros()));
        // Own event: maxima restart at the control currently held by the neighbor.
        ts.record_event(3, 0.03, &Vector6::zeros(), &Vector3::zeros());
        assert_eq!(ts.theta_accumulator(&p), 1.0);
        assert_eq!(ts.min_interval_steps, Some(3));
    }

    #[test]
    fn self_condition_rejects_dynamic_params() {
        let ts = TriggerState::new(0, &ring(), 4.0);
        assert!(matches!(
            self_condition_holds(&ts, &default_params(), 1.0, 0.0),
            Err(TriggerError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn zeno_bound_properties() {
        let p = default_params();
        let mut ts = TriggerState::new(0, &ring(), 4.0);
        let e = Vector6::from_row_slice(&[0.3, 0.1, 0., 0., 0., 0.]);
        ts.record_event(0, 0.5, &e, &Vector3::new(0.1, 0., 0.));
        let b = zeno_lower_bound(&ts, &p, 1.0);
        assert!(b > 0.0 && b.is_finite());

        // The returned value satisfies the displayed closed form at t̃ = t_h + b.
        let growth = p.x_m * e.norm() + ts.theta_accumulator(&p);
        let arg = p.x_m * p.y0.sqrt() / (growth * (p.theta * 1.0 * 1.0f64).sqrt())
            * (-0.5 * (p.gamma + p.kappa / p.theta) * (0.5 + b)).exp();
        assert_relative_eq!(b, (arg + 1.0).ln() / p.x_m, max_relative = 1e-10);

        // Growing Θ drives the bound toward zero.
        let mut prev = b;
        for scale in [1e2, 1e4, 1e8] {
            ts.own_control_norm = scale;
            let next = zeno_lower_bound(&ts, &p, 1.0);
            assert!(next > 0.0 && next < prev);
            prev = next;
        }
        assert!(prev < 1e-6);
    }
}
