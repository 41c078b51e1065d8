//! The exact property checks, each returning a one-line summary on success
//! and a description of the first violation on failure.

use std::sync::Arc;

use gdqn::env::grid::{GridAction, GridEnv};
use gdqn::env::stack::{self, Outcome, SceneDims, StackAction, TargetSpec};
use gdqn::env::{EnvError, Environment};
use gdqn::harness::{self, AgentKind, ExperimentConfig};
use gdqn::nn::SparseVec;
use gdqn::rl::{EpsilonSchedule, ReplayBuffer, Transition};
use gdqn::shaping::{self, Metric, Shaping};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub type Check = Result<String, String>;

pub fn gradient(seed: u64) -> Check {
    let r = gradient_check(seed, 30, 4, 150, 1e-5);
    let detail = format!("{} params compared (max rel err {:.2e}), {} zero, {} skipped at ReLU kinks", r.checked, r.max_rel_err, r.zero, r.skipped);
    if r.checked >= 100 && r.max_rel_err <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn distance_transform(seed: u64, masks: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in 0..masks {
        let mask = random_mask(&mut rng, 9, 9);
        for metric in [Metric::Manhattan, Metric::Euclidean] {
            let got = shaping::distance_transform::<f64>(&mask, metric).map_err(|e| e.to_string())?;
            let want = brute_distance(&mask, metric);
            if let Some(i) = (0..want.len()).find(|&i| got.values()[i] != want[i]) {
                return Err(format!("mask {m} ({metric:?}): cell {i} got {} want {}", got.values()[i], want[i]));
            }
        }
    }
    Ok(format!("{masks} random 9x9 masks, Manhattan and Euclidean, exact"))
}

pub fn stability_oracle() -> Check {
    let dims = SceneDims { width: 12, height: 12 };
    let (mut compared, mut unstable) = (0, 0);
    for offset in -6..=6 {
        if let Some(pair) = offset_pair(offset, dims) {
            let (got, want) = (stack::stability(&pair, dims).map_err(|e| e.to_string())?, torque_stable(&pair, dims));
            if got != want {
                return Err(format!("offset {offset}: stability {got}, torque oracle {want}"));
            }
            compared += 1;
            unstable += usize::from(!want);
        }
    }
    for n in [2, 3] {
        for cfg in drop_configurations(n, dims) {
            let (got, want) = (stack::stability(&cfg, dims).map_err(|e| e.to_string())?, torque_stable(&cfg, dims));
            if got != want {
                return Err(format!("{cfg:?}: stability {got}, torque oracle {want}"));
            }
            compared += 1;
            unstable += usize::from(!want);
        }
    }
    Ok(format!("{compared} configurations on 12x12 agree ({unstable} unstable)"))
}

fn random_targets(n: usize, seed: u64) -> Vec<TargetSpec> {
    stack::generate_targets(n, stack::default_group_size(n), SceneDims::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Every episode ends with exactly one outcome consistent with the scene, and
/// stepping a finished episode is refused.
pub fn terminal_exclusivity(episodes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = [0usize; 3];
    for n in [2, 3, 4] {
        let targets = random_targets(n, n as u64);
        for _ in 0..episodes {
            let target = Arc::new(targets[rng.gen_range(0..targets.len())].clone());
            let mut scene = stack::stack_reset(SceneDims::default(), target, &mut rng).map_err(|e| e.to_string())?;
            loop {
                // Bias towards `down` so that episodes reach placements.
                let action = StackAction::ALL[if rng.gen_bool(0.5) { 2 } else { rng.gen_range(0..2) }];
                let report = scene.step(action, &mut rng).map_err(|e| e.to_string())?;
                let stable = stack::stability(scene.placed(), scene.dims()).map_err(|e| e.to_string())?;
                let ok = match report.outcome {
                    Outcome::Continuing => stable && scene.active().is_some(),
                    Outcome::Collision => stable && scene.active().is_some(),
                    Outcome::Collapse => !stable,
                    Outcome::Finished => stable && scene.placed().len() == n && scene.blocks_spawned() == n,
                };
                if !ok {
                    return Err(format!("outcome {:?} inconsistent with scene {:?}", report.outcome, scene.placed()));
                }
                if report.outcome.is_terminal() {
                    counts[match report.outcome {
                        Outcome::Collision => 0,
                        Outcome::Collapse => 1,
                        _ => 2,
                    }] += 1;
                    if !matches!(scene.step(StackAction::Down, &mut rng), Err(EnvError::Terminated)) {
                        return Err("stepping a terminated episode was accepted".into());
                    }
                    break;
                }
            }
        }
    }
    let mut grid = GridEnv::new(5, 5, 3).unwrap();
    for _ in 0..episodes {
        grid.reset().unwrap();
        loop {
            let res = grid.step(rng.gen_range(0..4)).map_err(|e| e.to_string())?;
            let at_goal = grid.state().agent == grid.state().goal;
            if res.terminal.is_some() != at_goal || (res.reward == 1.0) != at_goal {
                return Err("gridworld terminal flag disagrees with the goal test".into());
            }
            if at_goal {
                if !matches!(grid.step(0), Err(EnvError::Terminated)) {
                    return Err("stepping a finished gridworld episode was accepted".into());
                }
                break;
            }
        }
    }
    Ok(format!("collision/collapse/finished = {}/{}/{}", counts[0], counts[1], counts[2]))
}

/// No action moves the agent or the active block outside the scene or into placed cells.
pub fn boundary_closure(steps: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for size in [2, 5, 7] {
        let mut env = GridEnv::new(size, size, size as u64).unwrap();
        for _ in 0..steps {
            let res = env.step(rng.gen_range(0..4)).map_err(|e| e.to_string())?;
            if !env.state().in_bounds() {
                return Err(format!("agent left the {size}x{size} grid: {:?}", env.state()));
            }
            if res.terminal.is_some() {
                env.reset().unwrap();
            }
        }
        // A single move changes the position by at most one cell and never leaves the grid.
        let mut corner = GridEnv::new(size, size, 1).unwrap();
        for a in GridAction::ALL {
            let before = corner.state().agent;
            let (next, _, _) = gdqn::env::grid::grid_step(corner.state(), a);
            let d = (next.agent.0 as i64 - before.0 as i64).abs() + (next.agent.1 as i64 - before.1 as i64).abs();
            if d > 1 || !next.in_bounds() {
                return Err(format!("action {a:?} jumped from {before:?} to {:?}", next.agent));
            }
            corner.reset().unwrap();
        }
    }
    let dims = SceneDims::default();
    let targets = random_targets(4, 4);
    let mut scene = stack::stack_reset(dims, Arc::new(targets[0].clone()), &mut rng).unwrap();
    for _ in 0..steps {
        if scene.is_terminal() {
            let t = Arc::new(targets[rng.gen_range(0..targets.len())].clone());
            scene = stack::stack_reset(dims, t, &mut rng).unwrap();
        }
        scene.step(StackAction::ALL[rng.gen_range(0..3)], &mut rng).map_err(|e| e.to_string())?;
        if let Some(b) = scene.active() {
            let overlaps = b.cells().any(|c| scene.placed().iter().any(|p| p.cells().any(|q| q == c)));
            if !b.fits(dims) || overlaps {
                return Err(format!("active block {b:?} escaped or overlaps the structure"));
            }
        }
        if scene.placed().iter().any(|p| !p.fits(dims)) {
            return Err("a placed block lies outside the scene".into());
        }
    }
    Ok(format!("{} random steps per environment stay inside", steps))
}

fn tagged(tag: f64) -> Transition<f64> {
    Transition { s: SparseVec::from_dense(&[tag]), g: Arc::new(SparseVec::empty()), a: 0, r: tag, s_next: SparseVec::empty(), terminal: false }
}

pub fn replay_fifo() -> Check {
    for (capacity, pushes) in [(1usize, 5usize), (2, 3), (7, 30), (64, 64), (64, 1000)] {
        let mut buf = ReplayBuffer::new(capacity).map_err(|e| e.to_string())?;
        for i in 0..pushes {
            buf.push(tagged(i as f64));
        }
        let got: Vec<f64> = buf.iter_ordered().map(|t| t.r).collect();
        let want: Vec<f64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as f64).collect();
        if got != want {
            return Err(format!("capacity {capacity} after {pushes} pushes holds {got:?}"));
        }
    }
    Ok("ring holds exactly the newest `capacity` transitions in order".into())
}

pub fn epsilon_endpoints() -> Check {
    for anneal in [1u64, 1000, 20_000, 200_000] {
        let s = EpsilonSchedule::new(anneal);
        let (start, end, after) = (s.epsilon_at(0), s.epsilon_at(anneal), s.epsilon_at(anneal * 10));
        if start != 1.0 || end != 0.1 || after != 0.1 {
            return Err(format!("anneal {anneal}: eps(0)={start} eps(T)={end} eps(10T)={after}"));
        }
        if anneal >= 2 && (s.epsilon_at(anneal / 2) - 0.55).abs() > 1e-12 {
            return Err(format!("anneal {anneal}: midpoint {}", s.epsilon_at(anneal / 2)));
        }
    }
    Ok("eps(0) = 1.0, eps(T) = eps(>T) = 0.1".into())
}

fn run_bytes(cfg: &ExperimentConfig) -> Result<Vec<Vec<u8>>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = cfg.clone();
    cfg.out_dir = Some(dir.path().to_path_buf());
    let report = harness::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut out = vec![serde_json::to_vec(&report.epochs).unwrap()];
    for f in ["log.csv", "best.ckpt"] {
        out.push(std::fs::read(dir.path().join(f)).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Two complete runs with the same seed produce byte-identical logs, metrics and checkpoints.
pub fn determinism() -> Check {
    let grid = ExperimentConfig::grid(5, AgentKind::Gdqn, 42).with_budget(3, 500, 100);
    let stack_cfg = ExperimentConfig::stack(2, AgentKind::Gdqn, Shaping::Distance, 42).with_budget(2, 600, 200);
    for cfg in [grid, stack_cfg] {
        let (a, b) = (run_bytes(&cfg)?, run_bytes(&cfg)?);
        if a != b {
            return Err(format!("{:?} runs differ", cfg.env));
        }
    }
    let other = ExperimentConfig::grid(5, AgentKind::Gdqn, 43).with_budget(3, 500, 100);
    if run_bytes(&other)? == run_bytes(&ExperimentConfig::grid(5, AgentKind::Gdqn, 42).with_budget(3, 500, 100))? {
        return Err("different seeds produced identical runs".into());
    }
    Ok("grid and stack runs bit-identical under a fixed seed".into())
}

pub fn environment_invariants() -> Check {
    let parts = [
        ("terminal exclusivity", terminal_exclusivity(300)),
        ("boundary closure", boundary_closure(5000)),
        ("replay FIFO", replay_fifo()),
        ("epsilon schedule", epsilon_endpoints()),
        ("determinism", determinism()),
    ];
    let mut ok = Vec::new();
    for (name, r) in parts {
        match r {
            Ok(_) => ok.push(name),
            Err(e) => return Err(format!("{name}: {e}")),
        }
    }
    Ok(ok.join(", "))
}
