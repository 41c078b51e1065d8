//! Gridworld navigation with a goal cell that changes every episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvError, Environment, EpisodeFacts, StepResult, TerminalCause};
use crate::nn::SparseVec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Left,
    Right,
    Up,
    Down,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Left, GridAction::Right, GridAction::Up, GridAction::Down];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    pub agent: (usize, usize),
    pub goal: (usize, usize),
}

impl GridState {
    pub fn cell_index(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    pub fn in_bounds(&self) -> bool {
        let ok = |(x, y): (usize, usize)| x < self.width && y < self.height;
        ok(self.agent) && ok(self.goal)
    }
}

/// Agent and goal drawn uniformly over the cells, redrawn together until distinct.
pub fn grid_reset<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> Result<GridState, EnvError> {
    if width < 2 || height < 2 {
        return Err(EnvError::InvalidConfig(format!("grid must be at least 2x2, got {width}x{height}")));
    }
    loop {
        let agent = (rng.gen_range(0..width), rng.gen_range(0..height));
        let goal = (rng.gen_range(0..width), rng.gen_range(0..height));
        if agent != goal {
            return Ok(GridState { width, height, agent, goal });
        }
    }
}

/// Moves one cell; moves off the grid leave the agent in place. Returns `(state, reward, done)`.
pub fn grid_step(state: &GridState, action: GridAction) -> (GridState, f64, bool) {
    let (x, y) = state.agent;
    let agent = match action {
        GridAction::Left => (x.saturating_sub(1), y),
        GridAction::Right => ((x + 1).min(state.width - 1), y),
        GridAction::Up => (x, y.saturating_sub(1)),
        GridAction::Down => (x, (y + 1).min(state.height - 1)),
    };
    let next = GridState { agent, ..*state };
    if agent == state.goal {
        (next, 1.0, true)
    } else {
        (next, 0.0, false)
    }
}

/// One-hot agent cell and one-hot goal cell, each of length `width * height`.
pub fn grid_encode<T: Scalar>(state: &GridState) -> (Vec<T>, Vec<T>) {
    let n = state.width * state.height;
    let mut obs = vec![T::zero(); n];
    let mut goal = vec![T::zero(); n];
    obs[state.cell_index(state.agent)] = T::one();
    goal[state.cell_index(state.goal)] = T::one();
    (obs, goal)
}

/// Manhattan distance from agent to goal.
pub fn shortest_distance(state: &GridState) -> usize {
    state.agent.0.abs_diff(state.goal.0) + state.agent.1.abs_diff(state.goal.1)
}

/// [`Environment`] wrapper owning its generator.
#[derive(Debug, Clone)]
pub struct GridEnv {
    width: usize,
    height: usize,
    state: GridState,
    start: GridState,
    done: bool,
    rng: ChaCha8Rng,
}

impl GridEnv {
    pub fn new(width: usize, height: usize, seed: u64) -> Result<Self, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = grid_reset(width, height, &mut rng)?;
        Ok(Self { width, height, state, start: state, done: false, rng })
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    /// State at the most recent reset.
    pub fn start(&self) -> &GridState {
        &self.start
    }

    /// Starts an episode with the goal at cell `goal_index` (row-major) and
    /// the agent uniformly on one of the other cells.
    pub fn reset_to(&mut self, goal_index: usize) -> Result<(), EnvError> {
        let cells = self.width * self.height;
        if goal_index >= cells {
            return Err(EnvError::InvalidConfig(format!("goal cell {goal_index} outside a {cells}-cell grid")));
        }
        let mut agent_index = self.rng.gen_range(0..cells - 1);
        if agent_index >= goal_index {
            agent_index += 1;
        }
        let at = |i: usize| (i % self.width, i / self.width);
        self.state = GridState { width: self.width, height: self.height, agent: at(agent_index), goal: at(goal_index) };
        self.start = self.state;
        self.done = false;
        Ok(())
    }
}

/// Text frame: `A` agent, `G` goal, `.` empty.
pub fn render_grid(state: &GridState) -> Vec<String> {
    (0..state.height)
        .map(|y| {
            (0..state.width)
                .map(|x| match (x, y) {
                    p if p == state.agent => 'A',
                    p if p == state.goal => 'G',
                    _ => '.',
                })
                .collect()
        })
        .collect()
}

impl Environment for GridEnv {
    fn num_actions(&self) -> usize {
        GridAction::ALL.len()
    }

    fn obs_dim(&self) -> usize {
        self.width * self.height
    }

    fn goal_dim(&self) -> usize {
        self.width * self.height
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.state = grid_reset(self.width, self.height, &mut self.rng)?;
        self.start = self.state;
        self.done = false;
        Ok(())
    }

    fn observe<T: Scalar>(&self) -> (SparseVec<T>, SparseVec<T>) {
        let (obs, goal) = grid_encode::<T>(&self.state);
        (SparseVec::from_dense(&obs), SparseVec::from_dense(&goal))
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::Terminated);
        }
        let a = GridAction::from_index(action).ok_or(EnvError::BadAction { action, count: 4 })?;
        let (next, reward, done) = grid_step(&self.state, a);
        self.state = next;
        self.done = done;
        Ok(StepResult { reward, task_reward: reward, terminal: done.then_some(TerminalCause::GoalReached) })
    }

    fn eval_step_cap(&self) -> usize {
        4 * self.width * self.height
    }

    fn episode_facts(&self) -> EpisodeFacts {
        EpisodeFacts {
            goal_id: self.start.cell_index(self.start.goal),
            optimal_steps: Some(shortest_distance(&self.start)),
            overlap: None,
            matched: None,
        }
    }
}

/// Greedy shortest-path action: close the horizontal gap first, then the vertical one.
pub fn shortest_path_action(state: &GridState) -> GridAction {
    let (ax, ay) = state.agent;
    let (gx, gy) = state.goal;
    if ax < gx {
        GridAction::Right
    } else if ax > gx {
        GridAction::Left
    } else if ay < gy {
        GridAction::Down
    } else {
        GridAction::Up
    }
}
