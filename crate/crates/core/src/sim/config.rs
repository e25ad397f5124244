use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::critic::{CriticError, CriticState, Weights, BASIS_DIM};
use crate::dynamics::{InertiaMatrix, RigidBodyState};
use crate::graph::{is_strongly_connected, Topology};
use crate::scalar::Scalar;
use crate::trigger::{TriggerError, TriggerMode, TriggerParams};
use crate::Matrix6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("time step dt must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("horizon t_final = {t_final} must be at least one step dt = {dt}")]
    Horizon { t_final: f64, dt: f64 },
    #[error("communication graph is not strongly connected")]
    NotStronglyConnected,
    #[error("expected {expected} agent entries, found {found}")]
    AgentCount { expected: usize, found: usize },
    #[error("agent {agent}: alpha must be positive, got {value}")]
    Alpha { agent: usize, value: f64 },
    #[error("agent {agent}: {source}")]
    Critic { agent: usize, source: CriticError },
    #[error("agent {agent}: {source}")]
    Trigger { agent: usize, source: TriggerError },
    #[error("agent {agent}: initial state has non-finite entries")]
    InitialState { agent: usize },
    #[error("uniform weight initialization needs a non-negative half-width, got {0}")]
    WeightRange(f64),
    #[error("updates_per_event must be at least 1")]
    UpdatesPerEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrator {
    Euler,
    Rk4,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(format!("unknown integrator '{other}' (expected euler or rk4)")),
        }
    }
}

/// Initial critic weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightInit<T: Scalar> {
    Zeros,
    /// Independent draws from `U[−half_width, half_width]`, seeded by the run seed.
    Uniform { half_width: T },
    /// The same weight vector for every agent.
    Explicit(Weights<T>),
}

/// Per-agent physical and controller configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig<T: Scalar> {
    pub inertia: InertiaMatrix<T>,
    pub alpha: T,
    pub q: Matrix6<T>,
    pub r: Matrix3<T>,
    pub learning_rate: T,
    /// Trigger parameters as configured; self-triggered runs force κ = ϖ = 0.
    pub trigger: TriggerParams<T>,
    pub initial: RigidBodyState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Scalar> {
    pub topology: Topology<T>,
    pub agents: Vec<AgentConfig<T>>,
    pub trigger_mode: TriggerMode,
    pub dt: T,
    pub t_final: T,
    pub integrator: Integrator,
    pub seed: u64,
    pub weight_init: WeightInit<T>,
    /// Gradient steps of policy evaluation per trigger instant.
    pub updates_per_event: usize,
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(ConfigError::TimeStep(self.dt.as_f64()));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(ConfigError::Horizon { t_final: self.t_final.as_f64(), dt: self.dt.as_f64() });
        }
        let n = self.topology.n();
        if self.agents.len() != n {
            return Err(ConfigError::AgentCount { expected: n, found: self.agents.len() });
        }
        if !is_strongly_connected(&self.topology) {
            return Err(ConfigError::NotStronglyConnected);
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if !(agent.alpha > T::zero()) {
                return Err(ConfigError::Alpha { agent: i, value: agent.alpha.as_f64() });
            }
            CriticState::new(Weights::zeros(), agent.learning_rate, agent.q, agent.r, self.topology.l_ii(i))
                .map_err(|source| ConfigError::Critic { agent: i, source })?;
            self.effective_trigger(i)
                .validate()
                .map_err(|source| ConfigError::Trigger { agent: i, source })?;
            if !agent.initial.is_finite() {
                return Err(ConfigError::InitialState { agent: i });
            }
        }
        if let WeightInit::Uniform { half_width } = self.weight_init {
            if !(half_width >= T::zero()) {
                return Err(ConfigError::WeightRange(half_width.as_f64()));
            }
        }
        if self.updates_per_event == 0 {
            return Err(ConfigError::UpdatesPerEvent);
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Number of integration steps, `round(t_final / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().as_f64() as usize
    }

    /// Trigger parameters actually used by agent `i` under the configured mode.
    pub fn effective_trigger(&self, i: usize) -> TriggerParams<T> {
        let p = self.agents[i].trigger;
        match self.trigger_mode {
            TriggerMode::SelfTriggered => p.for_self_trigger(),
            TriggerMode::Dynamic | TriggerMode::Periodic => p,
        }
    }

    pub fn with_mode(mut self, mode: TriggerMode) -> Self {
        self.trigger_mode = mode;
        self
    }

    /// Initial weights of every agent, in index order.
    pub fn initial_weights(&self) -> Vec<Weights<T>> {
        let n = self.n_agents();
        match &self.weight_init {
            WeightInit::Zeros => vec![Weights::zeros(); n],
            WeightInit::Explicit(w) => vec![*w; n],
            WeightInit::Uniform { half_width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let h = half_width.as_f64();
                (0..n)
                    .map(|_| {
                        let draws: Vec<f64> = (0..BASIS_DIM).map(|_| rng.gen_range(-1.0..=1.0) * h).collect();
                        Weights::from_iterator(draws.into_iter().map(T::lit))
                    })
                    .collect()
            }
        }
    }

    /// The same configuration on another scalar type.
    pub fn cast<U: Scalar>(&self) -> SimConfig<U> {
        let c = |x: T| U::lit(x.as_f64());
        let v3 = |v: &nalgebra::Vector3<T>| v.map(c);
        let agents = self
            .agents
            .iter()
            .map(|a| {
                let p = a.trigger;
                AgentConfig {
                    inertia: InertiaMatrix::new(a.inertia.matrix().map(c)).expect("cast of a valid inertia"),
                    alpha: c(a.alpha),
                    q: a.q.map(c),
                    r: a.r.map(c),
                    learning_rate: c(a.learning_rate),
                    trigger: TriggerParams {
                        gamma: c(p.gamma),
                        kappa: c(p.kappa),
                        varpi: c(p.varpi),
                        theta: c(p.theta),
                        lipschitz_p: c(p.lipschitz_p),
                        y0: c(p.y0),
                        x_m: c(p.x_m),
                        y_m: c(p.y_m),
                    },
                    initial: RigidBodyState::new(v3(&a.initial.sigma), v3(&a.initial.omega), v3(&a.initial.tau)),
                }
            })
            .collect();
        SimConfig {
            topology: self.topology.cast(),
            agents,
            trigger_mode: self.trigger_mode,
            dt: c(self.dt),
            t_final: c(self.t_final),
            integrator: self.integrator,
            seed: self.seed,
            weight_init: match &self.weight_init {
                WeightInit::Zeros => WeightInit::Zeros,
                WeightInit::Uniform { half_width } => WeightInit::Uniform { half_width: c(*half_width) },
                WeightInit::Explicit(w) => WeightInit::Explicit(w.map(c)),
            },
            updates_per_event: self.updates_per_event,
        }
    }
}
