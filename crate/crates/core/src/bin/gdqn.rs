use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gdqn::env::stack::{self, SceneDims};
use gdqn::harness::{self, AgentKind, EnvKind, ExperimentConfig, HarnessError};
use gdqn::shaping::Shaping;

#[derive(Parser)]
#[command(name = "gdqn", version, about = "Goal-conditioned DQN on gridworld and target block stacking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Grid,
    Stack,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Dqn,
    Gdqn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapingArg {
    None,
    /// Overlap-ratio shaping.
    Or,
    /// Distance-transform shaping.
    Dt,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, writing log.csv, best.ckpt and report.json to --out.
    Train {
        #[arg(long, value_enum)]
        env: EnvArg,
        #[arg(long, value_enum, default_value = "gdqn")]
        agent: AgentArg,
        #[arg(long, value_enum, default_value = "none")]
        shaping: ShapingArg,
        #[arg(long, default_value_t = 5)]
        grid_size: usize,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
        blocks: u8,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the stacking target group (shared across agents by default).
        #[arg(long, default_value_t = 0)]
        targets_seed: u64,
        /// Override the training epoch length in steps.
        #[arg(long)]
        train_steps: Option<usize>,
        /// Override the test epoch length in steps.
        #[arg(long)]
        test_steps: Option<usize>,
        /// Override the discount factor.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint for K episodes and print a JSON summary.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a stacking target group as JSON.
    Targets {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        blocks: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a greedy episode step by step as text frames.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Goal cell index (gridworld) or target index (stacking).
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn train(cmd: Command) -> Result<(), HarnessError> {
    let Command::Train { env, agent, shaping, grid_size, blocks, epochs, seed, targets_seed, train_steps, test_steps, gamma, out } = cmd else {
        unreachable!()
    };
    let agent = match agent {
        AgentArg::Dqn => AgentKind::Dqn,
        AgentArg::Gdqn => AgentKind::Gdqn,
    };
    let shaping = match shaping {
        ShapingArg::None => Shaping::None,
        ShapingArg::Or => Shaping::Overlap,
        ShapingArg::Dt => Shaping::Distance,
    };
    let mut cfg = match env {
        EnvArg::Grid => {
            let mut c = ExperimentConfig::grid(grid_size, agent, seed);
            c.shaping = shaping;
            c
        }
        EnvArg::Stack => ExperimentConfig::stack(blocks as usize, agent, shaping, seed),
    };
    cfg.targets_seed = targets_seed;
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    let train_steps = train_steps.unwrap_or(cfg.train_epoch_steps);
    let test_steps = test_steps.unwrap_or(cfg.test_epoch_steps);
    cfg = cfg.with_budget(epochs, train_steps, test_steps);
    cfg.out_dir = Some(out.clone());
    let report = harness::run_experiment(&cfg)?;
    match (cfg.env, &report.best) {
        (_, None) => println!("no test epoch produced a defined metric"),
        (EnvKind::Grid, Some(b)) => println!("best epoch {}: success ratio {:.3}", b.epoch, report.best_success_ratio()),
        (EnvKind::Stack, Some(b)) => {
            let m = report.best_stack();
            println!("best epoch {}: SR {:.3}  OR {:.3}", b.epoch, m.success, m.overlap);
        }
    }
    println!("wrote {} ({:.1}s)", out.display(), report.wall_clock_secs);
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        cmd @ Command::Train { .. } => train(cmd),
        Command::Eval { checkpoint, episodes, seed } => {
            let (net, cfg) = harness::load_checkpoint::<f64>(&checkpoint)?;
            let summary = harness::evaluate(&net, &cfg, episodes, seed)?;
            let json = serde_json::json!({
                "episodes": summary.episodes.len(),
                "success_ratio": summary.success_ratio,
                "stack": summary.stack,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(())
        }
        Command::Targets { blocks, seed, out } => {
            let n = blocks as usize;
            let dims = SceneDims::default();
            let targets = stack::generate_targets(n, stack::default_group_size(n), dims, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let mut cfg = ExperimentConfig::stack(n, AgentKind::Gdqn, Shaping::None, 0);
            cfg.targets_seed = seed;
            harness::write_targets(&out, &targets, &cfg)?;
            println!("wrote {} targets to {}", targets.len(), out.display());
            Ok(())
        }
        Command::Replay { checkpoint, target, seed } => {
            let (net, cfg) = harness::load_checkpoint::<f64>(&checkpoint)?;
            let trace = harness::replay_episode(&net, &cfg, target, seed)?;
            for f in &trace.frames {
                match f.action {
                    None => println!("step 0 (start)"),
                    Some(a) => println!("step {} action {} reward {}", f.step, a, f.reward),
                }
                for row in &f.frame {
                    println!("{row}");
                }
                println!();
            }
            println!("terminal: {}", trace.cause);
            if let Some(o) = trace.facts.overlap {
                println!("overlap ratio: {o:.3}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
