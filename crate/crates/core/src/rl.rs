//! Q-learning agent: replay memory, exploration schedule, bootstrapped targets
//! and the train/test epoch loop. The same machinery runs plain DQN (goal
//! omitted from the network input) and the goal-conditioned variant (goal
//! concatenated after the observation).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, EpisodeFacts, TerminalCause};
use crate::nn::{self, Concat, DenseNet, GradientSet, NetInput, NnError, OptimizerConfig, OptimizerState, SparseVec, TdLoss, Workspace};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, RlError>;

/// One environment step as stored in replay memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub s: SparseVec<T>,
    /// Goal encoding; zero-width for plain DQN.
    pub g: Arc<SparseVec<T>>,
    pub a: usize,
    pub r: T,
    pub s_next: SparseVec<T>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    storage: Vec<Transition<T>>,
    cursor: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(RlError::InvalidConfig("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, storage: Vec::new(), cursor: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition<T>) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition<T>> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `k` uniform draws with replacement, returned as storage indices.
    pub fn sample_indices<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        Ok((0..k).map(|_| rng.gen_range(0..self.storage.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&Transition<T>>> {
        Ok(self.sample_indices(k, rng)?.into_iter().map(|i| &self.storage[i]).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition<T>> {
        self.storage.get(index)
    }
}

/// Linear annealing from `start` to `end` over `anneal_steps`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(anneal_steps: u64) -> Self {
        Self { start: 1.0, end: 0.1, anneal_steps: anneal_steps.max(1) }
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub target_sync_period: u64,
    pub train_epoch_steps: usize,
    pub test_epoch_steps: usize,
    pub epochs: usize,
    pub anneal_steps: u64,
    pub buffer_capacity: usize,
    pub goal_conditioned: bool,
    pub test_epsilon: f64,
    pub optimizer: OptimizerConfig,
    pub td_loss: TdLoss,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            batch_size: 32,
            target_sync_period: 1000,
            train_epoch_steps: 1000,
            test_epoch_steps: 100,
            epochs: 100,
            anneal_steps: 20_000,
            buffer_capacity: 20_000,
            goal_conditioned: true,
            test_epsilon: 0.05,
            optimizer: OptimizerConfig::default(),
            td_loss: TdLoss::Squared,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(RlError::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.test_epsilon) {
            return Err(RlError::InvalidConfig(format!("test epsilon {} outside [0, 1]", self.test_epsilon)));
        }
        let counts = [
            ("batch_size", self.batch_size as u64),
            ("target_sync_period", self.target_sync_period),
            ("train_epoch_steps", self.train_epoch_steps as u64),
            ("test_epoch_steps", self.test_epoch_steps as u64),
            ("epochs", self.epochs as u64),
            ("anneal_steps", self.anneal_steps),
            ("buffer_capacity", self.buffer_capacity as u64),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(RlError::InvalidConfig(format!("{name} must be at least 1")));
        }
        Ok(())
    }
}

/// Seeds for the independent random streams of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSeeds {
    pub init: u64,
    pub explore: u64,
    pub replay: u64,
}

/// Network input for an `(observation, goal)` pair. A zero-width goal gives the plain DQN input.
pub fn encode<'a, T: Scalar>(s: &'a SparseVec<T>, g: &'a SparseVec<T>) -> Concat<'a, SparseVec<T>, SparseVec<T>> {
    Concat(s, g)
}

/// Epsilon-greedy choice over the Q-values of `input`; greedy ties go to the lowest action.
pub fn select_action<T: Scalar, I: NetInput<T> + ?Sized, R: Rng + ?Sized>(
    net: &DenseNet<T>,
    input: &I,
    eps: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(RlError::InvalidConfig(format!("epsilon {eps} outside [0, 1]")));
    }
    if input.dim() != net.input_dim() {
        return Err(NnError::Shape { expected: net.input_dim(), got: input.dim() }.into());
    }
    if eps > 0.0 && rng.gen::<f64>() < eps {
        return Ok(rng.gen_range(0..net.output_dim()));
    }
    Ok(nn::argmax(&net.forward(input)?))
}

/// Bootstrapped targets `r + gamma * max_a' Q(s', g, a'; target)`, or `r` for terminal steps.
pub fn td_targets<T: Scalar>(batch: &[&Transition<T>], target: &DenseNet<T>, gamma: T) -> Result<Vec<T>> {
    let mut ws = Workspace::default();
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                return Ok(t.r);
            }
            let q = target.forward_with(&encode(&t.s_next, &t.g), &mut ws)?;
            let best = q.iter().copied().fold(T::neg_infinity(), T::max);
            Ok(t.r + gamma * best)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Test,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub steps: usize,
    pub cause: TerminalCause,
    /// Task reward collected (excluding shaping).
    pub reward: f64,
    /// Reward used for learning, including shaping.
    pub shaped_return: f64,
    pub facts: EpisodeFacts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub mode: Mode,
    pub steps: usize,
    pub action_selections: usize,
    pub updates: usize,
    pub mean_loss: Option<f64>,
    pub episodes: Vec<EpisodeRecord>,
}

impl EpochLog {
    /// Episodes that ended through the environment or the evaluation cap (not the epoch budget).
    pub fn completed(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter().filter(|e| e.cause != TerminalCause::Truncated)
    }
}

/// Online and target networks plus everything needed to train them.
#[derive(Debug, Clone)]
pub struct Agent<T> {
    config: AgentConfig,
    schedule: EpsilonSchedule,
    online: DenseNet<T>,
    target: DenseNet<T>,
    optimizer: OptimizerState<T>,
    replay: ReplayBuffer<T>,
    train_steps: u64,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    ws: Workspace<T>,
    grads: GradientSet<T>,
    empty_goal: Arc<SparseVec<T>>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(config: AgentConfig, obs_dim: usize, goal_dim: usize, actions: usize, seeds: AgentSeeds) -> Result<Self> {
        config.validate()?;
        let inputs = obs_dim + if config.goal_conditioned { goal_dim } else { 0 };
        let online = DenseNet::init(&nn::default_dims(inputs, actions), &mut ChaCha8Rng::seed_from_u64(seeds.init))?;
        Self::with_network(config, online, seeds)
    }

    /// Wraps an existing online network (e.g. a loaded checkpoint).
    pub fn with_network(config: AgentConfig, online: DenseNet<T>, seeds: AgentSeeds) -> Result<Self> {
        config.validate()?;
        let optimizer = OptimizerState::new(config.optimizer, &online)?;
        Ok(Self {
            schedule: EpsilonSchedule::new(config.anneal_steps),
            target: nn::sync_target(&online),
            grads: GradientSet::zeros_for(&online),
            optimizer,
            online,
            replay: ReplayBuffer::new(config.buffer_capacity)?,
            train_steps: 0,
            explore_rng: ChaCha8Rng::seed_from_u64(seeds.explore),
            replay_rng: ChaCha8Rng::seed_from_u64(seeds.replay),
            ws: Workspace::default(),
            empty_goal: Arc::new(SparseVec::empty()),
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &DenseNet<T> {
        &self.online
    }

    pub fn target(&self) -> &DenseNet<T> {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer<T> {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    fn goal_slot(&self, goal: SparseVec<T>) -> Arc<SparseVec<T>> {
        if self.config.goal_conditioned {
            Arc::new(goal)
        } else {
            self.empty_goal.clone()
        }
    }

    /// Greedy action for an `(observation, goal)` pair.
    pub fn greedy_action(&self, obs: &SparseVec<T>, goal: &SparseVec<T>) -> Result<usize> {
        let g = if self.config.goal_conditioned { goal } else { &self.empty_goal };
        select_action(&self.online, &encode(obs, g), 0.0, &mut ChaCha8Rng::seed_from_u64(0))
    }

    /// One gradient step on a uniformly sampled minibatch. Returns the loss.
    fn learn(&mut self) -> Result<f64> {
        let idx = self.replay.sample_indices(self.config.batch_size, &mut self.replay_rng)?;
        let batch: Vec<&Transition<T>> = idx.iter().map(|&i| self.replay.get(i).expect("sampled index in range")).collect();
        let targets = td_targets(&batch, &self.target, T::lit(self.config.gamma))?;
        let inputs: Vec<_> = batch.iter().map(|t| encode(&t.s, &t.g)).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.a).collect();
        let loss = self.online.q_loss_and_grad_into(&inputs, &actions, &targets, self.config.td_loss, &mut self.grads, &mut self.ws)?;
        nn::apply_update(&mut self.online, &self.grads, &mut self.optimizer)?;
        Ok(loss.as_f64())
    }
}

/// Runs one epoch of exactly `train_epoch_steps` or `test_epoch_steps` environment steps.
///
/// Episodes reset on termination and continue within the epoch; the episode
/// running when the budget is exhausted is logged as truncated. Training
/// pushes every transition, takes one gradient step per environment step once
/// the buffer holds a full batch, and copies the online network into the
/// target network every `target_sync_period` steps. Testing uses the fixed
/// test epsilon, caps episodes at the environment's evaluation limit and never
/// learns.
pub fn run_epoch<T: Scalar, E: Environment>(env: &mut E, agent: &mut Agent<T>, mode: Mode) -> Result<EpochLog> {
    let budget = match mode {
        Mode::Train => agent.config.train_epoch_steps,
        Mode::Test => agent.config.test_epoch_steps,
    };
    let cap = env.eval_step_cap();
    let mut log = EpochLog { mode, steps: 0, action_selections: 0, updates: 0, mean_loss: None, episodes: Vec::new() };
    let mut loss_sum = 0.0;

    env.reset()?;
    let (mut s, goal) = env.observe::<T>();
    let mut g = agent.goal_slot(goal);
    let (mut ep_steps, mut ep_reward, mut ep_return) = (0usize, 0.0f64, 0.0f64);

    for _ in 0..budget {
        let eps = match mode {
            Mode::Train => agent.schedule.epsilon_at(agent.train_steps),
            Mode::Test => agent.config.test_epsilon,
        };
        let action = select_action(&agent.online, &encode(&s, &g), eps, &mut agent.explore_rng)?;
        log.action_selections += 1;
        let res = env.step(action)?;
        log.steps += 1;
        ep_steps += 1;
        ep_reward += res.task_reward;
        ep_return += res.reward;
        let (s_next, _) = env.observe::<T>();

        if mode == Mode::Train {
            agent.replay.push(Transition {
                s: s.clone(),
                g: g.clone(),
                a: action,
                r: T::lit(res.reward),
                s_next: s_next.clone(),
                terminal: res.terminal.is_some(),
            });
            agent.train_steps += 1;
            if agent.replay.len() >= agent.config.batch_size {
                loss_sum += agent.learn()?;
                log.updates += 1;
            }
            if agent.train_steps.is_multiple_of(agent.config.target_sync_period) {
                agent.target = nn::sync_target(&agent.online);
            }
        }

        let cause = match res.terminal {
            Some(c) => Some(c),
            None if mode == Mode::Test && ep_steps >= cap => Some(TerminalCause::StepCap),
            None => None,
        };
        match cause {
            Some(cause) => {
                log.episodes.push(EpisodeRecord {
                    index: log.episodes.len(),
                    steps: ep_steps,
                    cause,
                    reward: ep_reward,
                    shaped_return: ep_return,
                    facts: env.episode_facts(),
                });
                env.reset()?;
                let (s0, goal) = env.observe::<T>();
                s = s0;
                g = agent.goal_slot(goal);
                (ep_steps, ep_reward, ep_return) = (0, 0.0, 0.0);
            }
            None => s = s_next,
        }
    }
    if ep_steps > 0 {
        log.episodes.push(EpisodeRecord {
            index: log.episodes.len(),
            steps: ep_steps,
            cause: TerminalCause::Truncated,
            reward: ep_reward,
            shaped_return: ep_return,
            facts: env.episode_facts(),
        });
    }
    if log.updates > 0 {
        log.mean_loss = Some(loss_sum / log.updates as f64);
    }
    Ok(log)
}
