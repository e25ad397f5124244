//! The closed-loop stepping engine.
//!
//! Each step, in order: (1) derive `δ_i`, `e_i` from the physical states;
//! (2) for agents in ascending index, evaluate the trigger and, on an event,
//! estimate `ė` by a backward difference, run one policy-iteration step and
//! broadcast the new control to out-neighbors; (3) record; (4) advance `y_i`
//! and the running cost; (5) integrate `(σ, ω, τ)` under the held controls.
//!
//! A control broadcast at step `k` is visible to every receiver from step `k`
//! onward (for trigger bookkeeping, to lower-index receivers from step `k + 1`).

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, Integrator, SimConfig};
use super::metrics::{metrics, MetricsReport};
use super::trace::{AgentSample, EventRecord, Trace, TraceMeta, TraceRecord};
use crate::critic::{self, max_eigenvalue, min_eigenvalue, CriticState};
use crate::dynamics::{augmented_errors, network_derivative, RigidBodyState, StateDerivative};
use crate::scalar::Scalar;
use crate::trigger::{self, TriggerMode, TriggerParams, TriggerState};
use crate::{Matrix6, Vector6};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("non-finite state for agent {agent} at step {step} (t = {t} s)")]
    NonFinite { step: usize, t: f64, agent: usize },
}

/// `prev + (eᵀQe + uᵀRu)·dt` (left-endpoint quadrature of the running cost).
pub fn accumulate_cost<T: Scalar>(
    prev: T,
    e: &Vector6<T>,
    u: &Vector3<T>,
    q: &Matrix6<T>,
    r: &nalgebra::Matrix3<T>,
    dt: T,
) -> T {
    prev + ((e.transpose() * q * e)[0] + (u.transpose() * r * u)[0]) * dt
}

struct Agent<T: Scalar> {
    critic: CriticState<T>,
    trigger: TriggerState<T>,
    params: TriggerParams<T>,
    q_min: T,
    r_max: T,
    cost: T,
    msgs: u64,
    reads: u64,
}

fn step_states<T: Scalar>(
    cfg: &SimConfig<T>,
    inertia: &[crate::dynamics::InertiaMatrix<T>],
    states: &[RigidBodyState<T>],
    held: &[Option<Vector3<T>>],
) -> Vec<RigidBodyState<T>> {
    let dt = cfg.dt;
    let f = |s: &[RigidBodyState<T>]| -> Vec<StateDerivative<T>> {
        network_derivative(s, inertia, held, &cfg.topology).expect("every agent holds a control")
    };
    let advance = |s: &[RigidBodyState<T>], d: &[StateDerivative<T>], h: T| -> Vec<RigidBodyState<T>> {
        s.iter().zip(d).map(|(x, dx)| x.add_scaled(dx, h)).collect()
    };
    match cfg.integrator {
        Integrator::Euler => advance(states, &f(states), dt),
        Integrator::Rk4 => {
            let half = dt * T::lit(0.5);
            let k1 = f(states);
            let k2 = f(&advance(states, &k1, half));
            let k3 = f(&advance(states, &k2, half));
            let k4 = f(&advance(states, &k3, dt));
            let sixth = dt / T::lit(6.0);
            let two = T::lit(2.0);
            states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let combine = |a: Vector3<T>, b: Vector3<T>, c: Vector3<T>, d: Vector3<T>| {
                        (a + (b + c) * two + d) * sixth
                    };
                    let d = StateDerivative {
                        sigma_dot: combine(k1[i].sigma_dot, k2[i].sigma_dot, k3[i].sigma_dot, k4[i].sigma_dot),
                        omega_dot: combine(k1[i].omega_dot, k2[i].omega_dot, k3[i].omega_dot, k4[i].omega_dot),
                        tau_dot: combine(k1[i].tau_dot, k2[i].tau_dot, k3[i].tau_dot, k4[i].tau_dot),
                    };
                    s.add_scaled(&d, T::one())
                })
                .collect()
        }
    }
}

/// Runs one closed-loop simulation. Deterministic for a fixed configuration.
pub fn run<T: Scalar>(cfg: &SimConfig<T>) -> Result<Trace<T>, SimError> {
    cfg.validate()?;
    let n = cfg.n_agents();
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();
    let mode = cfg.trigger_mode;
    let topology = &cfg.topology;
    let inertia: Vec<_> = cfg.agents.iter().map(|a| a.inertia.clone()).collect();
    let alpha: Vec<T> = cfg.agents.iter().map(|a| a.alpha).collect();

    let mut agents: Vec<Agent<T>> = cfg
        .initial_weights()
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let a = &cfg.agents[i];
            let params = cfg.effective_trigger(i);
            Agent {
                critic: CriticState::new(w, a.learning_rate, a.q, a.r, topology.l_ii(i))
                    .expect("validated critic parameters"),
                trigger: TriggerState::new(i, topology, params.y0),
                params,
                q_min: min_eigenvalue(&a.q),
                r_max: max_eigenvalue(&a.r),
                cost: T::zero(),
                msgs: 0,
                reads: 0,
            }
        })
        .collect();

    let mut states: Vec<RigidBodyState<T>> = cfg.agents.iter().map(|a| a.initial).collect();
    let mut held: Vec<Option<Vector3<T>>> = vec![Some(Vector3::zeros()); n];
    let mut prev_errors: Option<Vec<Vector6<T>>> = None;
    let mut records = Vec::with_capacity(n_steps + 1);
    let mut events: Vec<Vec<EventRecord<T>>> = vec![Vec::new(); n];
    let mut warnings = Vec::new();
    let mut warned_mrp = vec![false; n];

    for step in 0..=n_steps {
        let t = dt * T::from_count(step);
        let last = step == n_steps;
        let errors: Vec<Vector6<T>> = augmented_errors(&states, topology, &alpha).iter().map(|a| *a.e()).collect();

        let mut pre = Vec::with_capacity(n);
        let mut fired = vec![false; n];
        for i in 0..n {
            let e = &errors[i];
            let meas_err = trigger::measurement_error(&agents[i].trigger, e).norm();
            let self_bound = trigger::self_measurement_bound(&agents[i].trigger, &agents[i].params, t);
            let threshold = trigger::self_threshold(&agents[i].params, agents[i].r_max, t);
            let y_now = agents[i].trigger.y;
            pre.push((meas_err, self_bound, threshold, y_now));

            let fire = if last {
                false
            } else if step == 0 {
                true
            } else {
                let ag = &agents[i];
                match mode {
                    TriggerMode::Dynamic => !trigger::dynamic_condition_holds(&ag.trigger, &ag.params, ag.q_min, ag.r_max, e),
                    TriggerMode::SelfTriggered => !trigger::self_condition_holds(&ag.trigger, &ag.params, ag.r_max, t)
                        .expect("self mode forces kappa = varpi = 0"),
                    TriggerMode::Periodic => true,
                }
            };
            if !last && mode != TriggerMode::SelfTriggered {
                agents[i].reads += topology.neighbors(i).len() as u64;
            }
            if !fire {
                continue;
            }
            fired[i] = true;

            let e_dot = match &prev_errors {
                Some(prev) => (e - prev[i]) / dt,
                None => Vector6::zeros(),
            };
            let ag = &mut agents[i];
            let value_before = critic::value(&ag.critic, e);
            let residual = critic::hamiltonian_residual(&ag.critic, e, &e_dot, &ag.critic.held_control);
            let mut next = ag.critic.clone();
            for _ in 1..cfg.updates_per_event {
                next = critic::critic_update(&next, e, &e_dot, &ag.critic.held_control);
            }
            let (next, u) = critic::policy_iteration_step(&next, e, &e_dot);
            ag.critic = next;
            held[i] = Some(u);
            ag.trigger.record_event(step, t, e, &u);
            let zeno_bound = trigger::zeno_lower_bound(&ag.trigger, &ag.params, ag.r_max);
            events[i].push(EventRecord {
                step,
                t,
                value_before,
                value: critic::value(&ag.critic, e),
                residual,
                w_norm: ag.critic.weights.norm(),
                control: u,
                zeno_bound,
            });
            for &k in topology.out_neighbors(i) {
                agents[k].trigger.receive(i, &u);
                agents[i].msgs += 1;
            }
        }

        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let (meas_err, self_bound, self_threshold, y) = pre[i];
            let ag = &agents[i];
            let e = &errors[i];
            let delta: Vector3<T> = e.fixed_rows::<3>(0).into_owned();
            samples.push(AgentSample {
                sigma: states[i].sigma,
                omega: states[i].omega,
                tau: states[i].tau,
                delta,
                delta_norm: delta.norm(),
                u: ag.critic.held_control,
                y,
                event: fired[i],
                w_norm: ag.critic.weights.norm(),
                cost: ag.cost,
                msgs: ag.msgs,
                meas_err,
                self_bound,
                self_threshold,
            });
        }
        records.push(TraceRecord { step, t, agents: samples });
        if last {
            break;
        }

        for i in 0..n {
            let e = &errors[i];
            let ag = &mut agents[i];
            let big_e = trigger::measurement_error(&ag.trigger, e);
            ag.trigger.y = trigger::y_step(&ag.trigger, &ag.params, ag.q_min, ag.r_max, e, &big_e, dt);
            ag.cost = accumulate_cost(ag.cost, e, &ag.critic.held_control, ag.critic.q(), ag.critic.r(), dt);
        }

        prev_errors = Some(errors);
        states = step_states(cfg, &inertia, &states, &held);
        for (i, s) in states.iter().enumerate() {
            if !s.is_finite() {
                return Err(SimError::NonFinite { step: step + 1, t: (t + dt).as_f64(), agent: i });
            }
            if !warned_mrp[i] && s.sigma.norm() >= T::one() {
                warned_mrp[i] = true;
                warnings.push(format!(
                    "agent {}: |sigma| >= 1 at t = {:.4} s (no shadow-set switching is applied)",
                    i + 1,
                    (t + dt).as_f64()
                ));
            }
        }
    }

    Ok(Trace {
        meta: TraceMeta {
            n_agents: n,
            dt: dt.as_f64(),
            t_final: (dt * T::from_count(n_steps)).as_f64(),
            mode,
            integrator: cfg.integrator,
            seed: cfg.seed,
        },
        records,
        events,
        state_reads: agents.iter().map(|a| a.reads).collect(),
        warnings,
    })
}

/// Runs independent configurations in parallel; results keep the input order.
pub fn sweep<T: Scalar + Send + Sync>(cfgs: &[SimConfig<T>]) -> Vec<Result<MetricsReport, SimError>> {
    cfgs.par_iter()
        .map(|cfg| run(cfg).map(|trace| metrics(&trace).expect("a completed run has records")))
        .collect()
}
