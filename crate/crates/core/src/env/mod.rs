//! Episodic environments driven by the agent loop.

pub mod grid;
pub mod stack;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::SparseVec;
use crate::raster::RasterError;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid scene state: {0}")]
    InvalidState(String),
    #[error("step called on a terminated episode")]
    Terminated,
    #[error("action {action} out of range for {count} actions")]
    BadAction { action: usize, count: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCause {
    /// Gridworld agent reached its goal.
    GoalReached,
    /// Active block moved into the boundary or the structure.
    Collision,
    /// A placement made the structure unstable.
    Collapse,
    /// Every block was placed and the structure is stable.
    Finished,
    /// Evaluation step cap reached.
    StepCap,
    /// The epoch step budget ran out mid-episode.
    Truncated,
}

impl TerminalCause {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalCause::GoalReached => "goal_reached",
            TerminalCause::Collision => "collision",
            TerminalCause::Collapse => "collapse",
            TerminalCause::Finished => "finished",
            TerminalCause::StepCap => "step_cap",
            TerminalCause::Truncated => "truncated",
        }
    }

    /// True for causes that come from the environment dynamics rather than a step budget.
    pub fn is_natural(self) -> bool {
        !matches!(self, TerminalCause::StepCap | TerminalCause::Truncated)
    }
}

impl fmt::Display for TerminalCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TerminalCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "goal_reached" => TerminalCause::GoalReached,
            "collision" => TerminalCause::Collision,
            "collapse" => TerminalCause::Collapse,
            "finished" => TerminalCause::Finished,
            "step_cap" => TerminalCause::StepCap,
            "truncated" => TerminalCause::Truncated,
            other => return Err(format!("unknown terminal cause {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    /// Reward used for learning: task reward plus any shaping term.
    pub reward: f64,
    /// Task reward alone (+1 on success, else 0).
    pub task_reward: f64,
    /// Set when the episode ended through the environment dynamics.
    pub terminal: Option<TerminalCause>,
}

/// Episode-level facts the harness needs for metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFacts {
    pub goal_id: usize,
    /// Shortest number of steps from the reset state to the goal (gridworld).
    pub optimal_steps: Option<usize>,
    /// Overlap ratio of the placed structure with the target (stacking).
    pub overlap: Option<f64>,
    /// Placed structure equals the target exactly (stacking).
    pub matched: Option<bool>,
}

/// Episodic, seeded environment with a discrete action set and a sparse
/// observation/goal encoding.
pub trait Environment {
    fn num_actions(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn goal_dim(&self) -> usize;

    /// Starts a new episode using the environment's own generator.
    fn reset(&mut self) -> Result<(), EnvError>;

    /// Current `(observation, goal)` encoding.
    fn observe<T: Scalar>(&self) -> (SparseVec<T>, SparseVec<T>);

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;

    /// Maximum episode length during evaluation.
    fn eval_step_cap(&self) -> usize;

    /// Facts about the current episode, valid at any point of it.
    fn episode_facts(&self) -> EpisodeFacts;
}
