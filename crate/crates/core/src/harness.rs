//! Experiment runner: builds an environment and agent from an
//! [`ExperimentConfig`], alternates train and test epochs, aggregates metrics
//! and persists the episode log, the best checkpoint and a JSON report.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{self, CheckpointError};
use crate::env::grid::GridEnv;
use crate::env::stack::{self, SceneDims, StackEnv, TargetSetFile, TargetSpec};
use crate::env::{EnvError, Environment, TerminalCause};
use crate::nn::{self, DenseNet, OptimizerConfig, TdLoss};
use crate::rl::{self, Agent, AgentConfig, AgentSeeds, EpisodeRecord, EpochLog, Mode, RlError};
use crate::scalar::Scalar;
use crate::shaping::{Metric, Shaping};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint does not match configuration: {0}")]
    Validation(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Grid,
    Stack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Gdqn,
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub grid_size: usize,
    pub n_blocks: usize,
    pub scene: SceneDims,
    pub agent: AgentKind,
    pub shaping: Shaping,
    pub metric: Metric,
    pub epochs: usize,
    pub train_epoch_steps: usize,
    pub test_epoch_steps: usize,
    pub anneal_epochs: usize,
    pub buffer_capacity: usize,
    pub seed: u64,
    /// Seed of the target group; shared across agents so they face the same targets.
    pub targets_seed: u64,
    pub gamma: f64,
    pub batch_size: usize,
    pub target_sync_period: u64,
    pub test_epsilon: f64,
    pub optimizer: OptimizerConfig,
    pub td_loss: TdLoss,
    pub out_dir: Option<PathBuf>,
}

/// Training epoch length for an `n x n` gridworld: 1000 steps up to 5x5, 3000 above.
pub fn grid_train_steps(n: usize) -> usize {
    if n <= 5 {
        1000
    } else {
        3000
    }
}

impl ExperimentConfig {
    fn base(env: EnvKind, agent: AgentKind, seed: u64) -> Self {
        let agent_defaults = AgentConfig::default();
        Self {
            env,
            grid_size: 5,
            n_blocks: 2,
            scene: SceneDims::default(),
            agent,
            shaping: Shaping::None,
            metric: Metric::Manhattan,
            epochs: 100,
            train_epoch_steps: 1000,
            test_epoch_steps: 100,
            anneal_epochs: 20,
            buffer_capacity: 20_000,
            seed,
            targets_seed: 0,
            gamma: agent_defaults.gamma,
            batch_size: agent_defaults.batch_size,
            target_sync_period: agent_defaults.target_sync_period,
            test_epsilon: agent_defaults.test_epsilon,
            optimizer: agent_defaults.optimizer,
            td_loss: agent_defaults.td_loss,
            out_dir: None,
        }
    }

    /// Gridworld protocol: 100 epochs, 1000/3000 training steps, 100 test steps,
    /// annealing over 20 epochs and a buffer as long as the annealing.
    pub fn grid(size: usize, agent: AgentKind, seed: u64) -> Self {
        let mut cfg = Self::base(EnvKind::Grid, agent, seed);
        cfg.grid_size = size;
        cfg.train_epoch_steps = grid_train_steps(size);
        cfg.buffer_capacity = cfg.anneal_epochs * cfg.train_epoch_steps;
        cfg
    }

    /// Stacking protocol: 100 epochs of 10000 training and 1000 test steps, 200K buffer.
    pub fn stack(n_blocks: usize, agent: AgentKind, shaping: Shaping, seed: u64) -> Self {
        let mut cfg = Self::base(EnvKind::Stack, agent, seed);
        cfg.n_blocks = n_blocks;
        cfg.shaping = shaping;
        cfg.train_epoch_steps = 10_000;
        cfg.test_epoch_steps = 1000;
        cfg.buffer_capacity = cfg.anneal_epochs * cfg.train_epoch_steps;
        cfg
    }

    /// Rescales the epoch budget, keeping the buffer equal to the annealing length.
    pub fn with_budget(mut self, epochs: usize, train_epoch_steps: usize, test_epoch_steps: usize) -> Self {
        self.epochs = epochs;
        self.train_epoch_steps = train_epoch_steps;
        self.test_epoch_steps = test_epoch_steps;
        self.buffer_capacity = self.anneal_epochs * train_epoch_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.env == EnvKind::Grid && self.shaping != Shaping::None {
            return Err(HarnessError::Config("reward shaping applies to the stacking environment only".into()));
        }
        if self.env == EnvKind::Grid && self.grid_size < 2 {
            return Err(HarnessError::Config(format!("grid size {} below 2", self.grid_size)));
        }
        if self.env == EnvKind::Stack && self.n_blocks == 0 {
            return Err(HarnessError::Config("stacking needs at least one block".into()));
        }
        if self.anneal_epochs == 0 {
            return Err(HarnessError::Config("anneal_epochs must be at least 1".into()));
        }
        self.agent_config().validate()?;
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            batch_size: self.batch_size,
            target_sync_period: self.target_sync_period,
            train_epoch_steps: self.train_epoch_steps,
            test_epoch_steps: self.test_epoch_steps,
            epochs: self.epochs,
            anneal_steps: (self.anneal_epochs * self.train_epoch_steps) as u64,
            buffer_capacity: self.buffer_capacity,
            goal_conditioned: self.agent == AgentKind::Gdqn,
            test_epsilon: self.test_epsilon,
            optimizer: self.optimizer,
            td_loss: self.td_loss,
        }
    }

    /// `(observation width, goal width, actions)` of the configured environment.
    pub fn env_shape(&self) -> (usize, usize, usize) {
        match self.env {
            EnvKind::Grid => {
                let n = self.grid_size * self.grid_size;
                (n, n, 4)
            }
            EnvKind::Stack => {
                let n = self.scene.width * self.scene.height;
                (n, n, 3)
            }
        }
    }

    /// Layer widths of the Q-network this configuration trains.
    pub fn network_dims(&self) -> Vec<usize> {
        let (obs, goal, actions) = self.env_shape();
        let inputs = obs + if self.agent == AgentKind::Gdqn { goal } else { 0 };
        nn::default_dims(inputs, actions)
    }

    pub fn seeds(&self) -> ComponentSeeds {
        ComponentSeeds::derive(self.seed)
    }
}

/// Per-component seeds derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSeeds {
    pub init: u64,
    pub env: u64,
    pub explore: u64,
    pub replay: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ComponentSeeds {
    /// Each component hashes the master seed with its own tag, so changing how
    /// one component consumes randomness leaves the others untouched.
    pub fn derive(master: u64) -> Self {
        let tag = |t: u64| splitmix64(master ^ splitmix64(t));
        Self { init: tag(1), env: tag(2), explore: tag(3), replay: tag(4) }
    }

    pub fn agent(&self) -> AgentSeeds {
        AgentSeeds { init: self.init, explore: self.explore, replay: self.replay }
    }
}

/// Target group for a stacking configuration.
pub fn targets_for(cfg: &ExperimentConfig) -> Result<Vec<TargetSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.targets_seed);
    Ok(stack::generate_targets(cfg.n_blocks, stack::default_group_size(cfg.n_blocks), cfg.scene, &mut rng)?)
}

/// Fraction of decided test episodes that reached the goal in the shortest possible number of steps.
///
/// An episode is decided once it ends, or once it has used up the
/// shortest-path step count without reaching the goal (it can then no longer
/// be a success, even if the epoch budget cut it short). Episodes truncated
/// before that point are excluded.
pub fn success_ratio<'a, I: IntoIterator<Item = &'a EpisodeRecord>>(episodes: I) -> Result<f64> {
    let (mut decided, mut optimal) = (0usize, 0usize);
    for e in episodes {
        let shortest = e.facts.optimal_steps.ok_or_else(|| HarnessError::UndefinedMetric("episode without a shortest distance".into()))?;
        if e.cause == TerminalCause::Truncated && e.steps < shortest {
            continue;
        }
        decided += 1;
        if e.cause == TerminalCause::GoalReached && e.steps == shortest {
            optimal += 1;
        }
    }
    if decided == 0 {
        return Err(HarnessError::UndefinedMetric("no decided episodes".into()));
    }
    Ok(optimal as f64 / decided as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackMetrics {
    /// Mean end-of-episode overlap ratio over every completed episode.
    pub overlap: f64,
    /// Mean overlap over episodes that placed every block without collapse.
    pub overlap_finished: Option<f64>,
    /// Fraction of completed episodes that finished with an exact match.
    pub success: f64,
}

pub fn stacking_metrics<'a, I: IntoIterator<Item = &'a EpisodeRecord>>(episodes: I) -> Result<StackMetrics> {
    let (mut n, mut or_sum, mut wins) = (0usize, 0.0, 0usize);
    let (mut n_fin, mut or_fin) = (0usize, 0.0);
    for e in episodes.into_iter().filter(|e| e.cause != TerminalCause::Truncated) {
        let overlap = e.facts.overlap.ok_or_else(|| HarnessError::UndefinedMetric("episode without overlap".into()))?;
        n += 1;
        or_sum += overlap;
        if e.cause == TerminalCause::Finished {
            n_fin += 1;
            or_fin += overlap;
            if e.facts.matched == Some(true) {
                wins += 1;
            }
        }
    }
    if n == 0 {
        return Err(HarnessError::UndefinedMetric("no completed episodes".into()));
    }
    Ok(StackMetrics {
        overlap: or_sum / n as f64,
        overlap_finished: (n_fin > 0).then(|| or_fin / n_fin as f64),
        success: wins as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_episodes: usize,
    pub train_mean_loss: Option<f64>,
    pub test_episodes: usize,
    pub success_ratio: Option<f64>,
    pub stack: Option<StackMetrics>,
}

impl EpochMetrics {
    /// Ranking key for best-epoch selection: success ratio (grid) or (SR, OR) (stacking).
    fn score(&self) -> (f64, f64) {
        match (&self.success_ratio, &self.stack) {
            (_, Some(m)) => (m.success, m.overlap),
            (Some(s), None) => (*s, 0.0),
            (None, None) => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub epochs: Vec<EpochMetrics>,
    /// Test epoch with the highest score.
    pub best: Option<EpochMetrics>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn best_success_ratio(&self) -> f64 {
        self.best.as_ref().and_then(|b| b.success_ratio).unwrap_or(0.0)
    }

    pub fn best_stack(&self) -> StackMetrics {
        self.best
            .as_ref()
            .and_then(|b| b.stack)
            .unwrap_or(StackMetrics { overlap: 0.0, overlap_finished: None, success: 0.0 })
    }
}

/// Version of the CSV log layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One CSV row: either an episode (`kind = episode`) or an epoch aggregate (`kind = epoch`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub schema: u32,
    pub kind: String,
    pub epoch: usize,
    pub mode: String,
    pub episode: usize,
    pub steps: usize,
    pub terminal_cause: String,
    pub reward: f64,
    pub shaped_return: f64,
    pub goal_id: Option<usize>,
    pub optimal_steps: Option<usize>,
    pub overlap: Option<f64>,
    pub matched: Option<bool>,
    pub success_ratio: Option<f64>,
    pub or_all: Option<f64>,
    pub or_finished: Option<f64>,
    pub sr: Option<f64>,
    pub mean_loss: Option<f64>,
}

fn log_rows(epoch: usize, log: &EpochLog, metrics: Option<&EpochMetrics>) -> Vec<LogRow> {
    let mode = log.mode.as_str().to_string();
    let mut rows: Vec<LogRow> = log
        .episodes
        .iter()
        .map(|e| LogRow {
            schema: CSV_SCHEMA_VERSION,
            kind: "episode".into(),
            epoch,
            mode: mode.clone(),
            episode: e.index,
            steps: e.steps,
            terminal_cause: e.cause.as_str().into(),
            reward: e.reward,
            shaped_return: e.shaped_return,
            goal_id: Some(e.facts.goal_id),
            optimal_steps: e.facts.optimal_steps,
            overlap: e.facts.overlap,
            matched: e.facts.matched,
            success_ratio: None,
            or_all: None,
            or_finished: None,
            sr: None,
            mean_loss: None,
        })
        .collect();
    rows.push(LogRow {
        schema: CSV_SCHEMA_VERSION,
        kind: "epoch".into(),
        epoch,
        mode,
        episode: log.episodes.len(),
        steps: log.steps,
        terminal_cause: String::new(),
        reward: log.episodes.iter().map(|e| e.reward).sum(),
        shaped_return: log.episodes.iter().map(|e| e.shaped_return).sum(),
        goal_id: None,
        optimal_steps: None,
        overlap: None,
        matched: None,
        success_ratio: metrics.and_then(|m| m.success_ratio),
        or_all: metrics.and_then(|m| m.stack.map(|s| s.overlap)),
        or_finished: metrics.and_then(|m| m.stack.and_then(|s| s.overlap_finished)),
        sr: metrics.and_then(|m| m.stack.map(|s| s.success)),
        mean_loss: log.mean_loss,
    });
    rows
}

/// Environment chosen by an [`ExperimentConfig`].
pub enum AnyEnv {
    Grid(GridEnv),
    Stack(StackEnv),
}

impl AnyEnv {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        Ok(match cfg.env {
            EnvKind::Grid => AnyEnv::Grid(GridEnv::new(cfg.grid_size, cfg.grid_size, seed)?),
            EnvKind::Stack => AnyEnv::Stack(StackEnv::new(cfg.scene, targets_for(cfg)?, cfg.shaping, cfg.metric, seed)?),
        })
    }
}

fn test_metrics(env: EnvKind, episodes: &[EpisodeRecord]) -> (Option<f64>, Option<StackMetrics>) {
    match env {
        EnvKind::Grid => (success_ratio(episodes).ok(), None),
        EnvKind::Stack => (None, stacking_metrics(episodes).ok()),
    }
}

/// Runs `cfg.epochs` rounds of one training and one test epoch.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    match AnyEnv::build(cfg, cfg.seeds().env)? {
        AnyEnv::Grid(env) => run_with_env::<f64, _>(cfg, env),
        AnyEnv::Stack(env) => run_with_env::<f64, _>(cfg, env),
    }
}

fn run_with_env<T: Scalar, E: Environment>(cfg: &ExperimentConfig, mut env: E) -> Result<RunReport> {
    let started = Instant::now();
    let (obs, goal, actions) = cfg.env_shape();
    let mut agent = Agent::<T>::new(cfg.agent_config(), obs, goal, actions, cfg.seeds().agent())?;

    let mut csv = match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("log.csv");
            let file = File::create(&path).map_err(io_err(&path))?;
            if cfg.env == EnvKind::Stack {
                write_targets(&dir.join("targets.json"), &targets_for(cfg)?, cfg)?;
            }
            Some(csv::Writer::from_writer(BufWriter::new(file)))
        }
        None => None,
    };

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<EpochMetrics> = None;
    for epoch in 0..cfg.epochs {
        let train = rl::run_epoch(&mut env, &mut agent, Mode::Train)?;
        let test = rl::run_epoch(&mut env, &mut agent, Mode::Test)?;
        let (success_ratio, stack) = test_metrics(cfg.env, &test.episodes);
        let metrics = EpochMetrics {
            epoch,
            train_episodes: train.episodes.len(),
            train_mean_loss: train.mean_loss,
            test_episodes: test.completed().count(),
            success_ratio,
            stack,
        };
        if let Some(w) = csv.as_mut() {
            for row in log_rows(epoch, &train, None).into_iter().chain(log_rows(epoch, &test, Some(&metrics))) {
                w.serialize(row)?;
            }
        }
        if best.as_ref().is_none_or(|b| metrics.score() > b.score()) {
            best = Some(metrics.clone());
            if let Some(dir) = &cfg.out_dir {
                save_checkpoint(&dir.join("best.ckpt"), agent.online(), cfg)?;
            }
        }
        epochs.push(metrics);
    }
    if let Some(mut w) = csv {
        w.flush().map_err(|e| HarnessError::Io { path: cfg.out_dir.clone().unwrap_or_default(), source: e })?;
    }
    let report = RunReport { config: cfg.clone(), epochs, best, wall_clock_secs: started.elapsed().as_secs_f64() };
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_vec_pretty(&report)?).map_err(io_err(&path))?;
    }
    Ok(report)
}

pub fn write_targets(path: &Path, targets: &[TargetSpec], cfg: &ExperimentConfig) -> Result<()> {
    let file = TargetSetFile::from_targets(targets, cfg.n_blocks, cfg.scene, cfg.targets_seed);
    fs::write(path, serde_json::to_vec_pretty(&file)?).map_err(io_err(path))
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetSpec>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let file: TargetSetFile = serde_json::from_slice(&bytes)?;
    Ok(file.to_targets()?)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the network to `path` and the configuration to `path` + `.json`.
pub fn save_checkpoint<T: Scalar>(path: &Path, net: &DenseNet<T>, cfg: &ExperimentConfig) -> Result<()> {
    if net.dims() != cfg.network_dims() {
        return Err(HarnessError::Validation(format!("network {:?} vs configuration {:?}", net.dims(), cfg.network_dims())));
    }
    fs::write(path, checkpoint::encode_network(net)).map_err(io_err(path))?;
    let side = sidecar(path);
    fs::write(&side, serde_json::to_vec_pretty(cfg)?).map_err(io_err(&side))
}

/// Loads a checkpoint and its configuration, checking that the layer widths agree.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(DenseNet<T>, ExperimentConfig)> {
    let side = sidecar(path);
    let cfg: ExperimentConfig = serde_json::from_slice(&fs::read(&side).map_err(io_err(&side))?)?;
    let net = load_checkpoint_for::<T>(path, &cfg)?;
    Ok((net, cfg))
}

/// Loads only the binary, validating it against `cfg`.
pub fn load_checkpoint_for<T: Scalar>(path: &Path, cfg: &ExperimentConfig) -> Result<DenseNet<T>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let net = checkpoint::decode_network::<T>(&bytes)?;
    if net.dims() != cfg.network_dims() {
        return Err(HarnessError::Validation(format!("checkpoint layers {:?}, configuration expects {:?}", net.dims(), cfg.network_dims())));
    }
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeRecord>,
    pub success_ratio: Option<f64>,
    pub stack: Option<StackMetrics>,
}

/// Runs `episodes` evaluation episodes (test epsilon, evaluation step cap) with a trained network.
pub fn evaluate<T: Scalar>(net: &DenseNet<T>, cfg: &ExperimentConfig, episodes: usize, seed: u64) -> Result<EvalSummary> {
    cfg.validate()?;
    if episodes == 0 {
        return Err(HarnessError::Config("need at least one evaluation episode".into()));
    }
    let seeds = ComponentSeeds::derive(seed);
    let agent = Agent::with_network(cfg.agent_config(), net.clone(), seeds.agent())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.explore);
    let records = match AnyEnv::build(cfg, seeds.env)? {
        AnyEnv::Grid(mut env) => eval_episodes(&mut env, &agent, cfg.test_epsilon, episodes, &mut rng)?,
        AnyEnv::Stack(mut env) => eval_episodes(&mut env, &agent, cfg.test_epsilon, episodes, &mut rng)?,
    };
    let (success_ratio, stack) = test_metrics(cfg.env, &records);
    Ok(EvalSummary { episodes: records, success_ratio, stack })
}

fn eval_episodes<T: Scalar, E: Environment>(
    env: &mut E,
    agent: &Agent<T>,
    eps: f64,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::with_capacity(episodes);
    let empty = nn::SparseVec::empty();
    for index in 0..episodes {
        env.reset()?;
        let (mut steps, mut reward, mut shaped) = (0, 0.0, 0.0);
        let cause = loop {
            let (s, g) = env.observe::<T>();
            let g = if agent.config().goal_conditioned { &g } else { &empty };
            let a = rl::select_action(agent.online(), &rl::encode(&s, g), eps, rng)?;
            let res = env.step(a)?;
            steps += 1;
            reward += res.task_reward;
            shaped += res.reward;
            if let Some(c) = res.terminal {
                break c;
            }
            if steps >= env.eval_step_cap() {
                break TerminalCause::StepCap;
            }
        };
        out.push(EpisodeRecord { index, steps, cause, reward, shaped_return: shaped, facts: env.episode_facts() });
    }
    Ok(out)
}

/// One step of a replayed episode: the action taken (none for the initial frame) and the scene afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFrame {
    pub step: usize,
    pub action: Option<usize>,
    pub reward: f64,
    pub frame: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub frames: Vec<TraceFrame>,
    pub cause: TerminalCause,
    pub facts: crate::env::EpisodeFacts,
}

/// Plays one greedy episode on target `target_id` (goal cell for the gridworld,
/// target index for stacking) and records a text frame after every step.
pub fn replay_episode<T: Scalar>(net: &DenseNet<T>, cfg: &ExperimentConfig, target_id: usize, seed: u64) -> Result<Trace> {
    cfg.validate()?;
    let seeds = ComponentSeeds::derive(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.explore);
    let goal_conditioned = cfg.agent == AgentKind::Gdqn;
    match AnyEnv::build(cfg, seeds.env)? {
        AnyEnv::Grid(mut env) => {
            env.reset_to(target_id)?;
            trace(&mut env, net, goal_conditioned, &mut rng, |e| crate::env::grid::render_grid(e.state()))
        }
        AnyEnv::Stack(mut env) => {
            env.reset_to(target_id)?;
            trace(&mut env, net, goal_conditioned, &mut rng, |e| stack::render_frame(e.scene()))
        }
    }
}

fn trace<T: Scalar, E: Environment>(
    env: &mut E,
    net: &DenseNet<T>,
    goal_conditioned: bool,
    rng: &mut ChaCha8Rng,
    draw: impl Fn(&E) -> Vec<String>,
) -> Result<Trace> {
    let empty = nn::SparseVec::empty();
    let mut frames = vec![TraceFrame { step: 0, action: None, reward: 0.0, frame: draw(env) }];
    let cause = loop {
        let (s, g) = env.observe::<T>();
        let g = if goal_conditioned { &g } else { &empty };
        let a = rl::select_action(net, &rl::encode(&s, g), 0.0, rng)?;
        let res = env.step(a)?;
        frames.push(TraceFrame { step: frames.len(), action: Some(a), reward: res.reward, frame: draw(env) });
        if let Some(c) = res.terminal {
            break c;
        }
        if frames.len() > env.eval_step_cap() {
            break TerminalCause::StepCap;
        }
    };
    Ok(Trace { frames, cause, facts: env.episode_facts() })
}
