//! Goal-conditioned deep Q-learning on two episodic tasks: gridworld
//! navigation with a new goal every episode, and 2D target block stacking
//! with optional overlap-ratio or distance-transform reward shaping.
//!
//! The numeric core ([`nn`], [`rl`], [`shaping`]) is generic over
//! [`Scalar`]; the aliases below fix it to 64-bit floats, which is what the
//! experiment harness uses.

pub mod checkpoint;
pub mod env;
pub mod harness;
pub mod nn;
pub mod raster;
pub mod rl;
pub mod scalar;
pub mod shaping;

pub use scalar::Scalar;

pub type QNet = nn::DenseNet<f64>;
pub type Gradients = nn::GradientSet<f64>;
pub type Optimizer = nn::OptimizerState<f64>;
pub type QAgent = rl::Agent<f64>;
pub type Replay = rl::ReplayBuffer<f64>;
pub type Transition = rl::Transition<f64>;
pub type DistanceMap = shaping::DistanceMap<f64>;

pub type QNet32 = nn::DenseNet<f32>;
pub type QAgent32 = rl::Agent<f32>;
