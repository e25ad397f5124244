//! Optimal attitude consensus for networks of rigid bodies with a model-free
//! critic controller that learns and communicates only at event-triggered or
//! self-triggered instants.
//!
//! - [`graph`]: directed weighted topology and strong connectivity
//! - [`dynamics`]: MRP attitude dynamics, torque compensator, consensus error
//! - [`critic`]: quadratic critic, controller reconstruction, weight update
//! - [`trigger`]: dynamic / self-triggered conditions and the `y` variable
//! - [`sim`]: closed-loop runs, traces, metrics and sweeps
//! - [`scenario`]: scenario files and the shipped default scenario
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod cli;
pub mod critic;
pub mod dynamics;
pub mod graph;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod trigger;

pub use scalar::Scalar;

pub type Vector6<T> = nalgebra::SVector<T, 6>;
pub type Matrix6<T> = nalgebra::SMatrix<T, 6, 6>;

pub type Topology64 = graph::Topology<f64>;
pub type RigidBodyState64 = dynamics::RigidBodyState<f64>;
pub type InertiaMatrix64 = dynamics::InertiaMatrix<f64>;
pub type CriticState64 = critic::CriticState<f64>;
pub type TriggerParams64 = trigger::TriggerParams<f64>;
pub type TriggerState64 = trigger::TriggerState<f64>;
pub type SimConfig64 = sim::SimConfig<f64>;
pub type Trace64 = sim::Trace<f64>;

pub type Topology32 = graph::Topology<f32>;
pub type SimConfig32 = sim::SimConfig<f32>;
pub type Trace32 = sim::Trace<f32>;
