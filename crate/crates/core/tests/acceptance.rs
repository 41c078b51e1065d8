//! Acceptance suite: every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.
//!
//! Criteria 1-4 are exact property checks. Criteria 5-9 train agents under the
//! full experiment protocol (100 epochs, best test epoch, best of 3 seeds) and
//! take hours on one core. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --release --test acceptance -- 1 2 3 4`.

mod common;

use std::time::Instant;

use common::properties::{self as props, Check};
use gdqn::harness::{self, AgentKind, ExperimentConfig, RunReport, StackMetrics};
use gdqn::shaping::Shaping;

const SEEDS: [u64; 3] = [0, 1, 2];

fn best_grid(size: usize, agent: AgentKind) -> Result<(f64, Vec<f64>), String> {
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let t = Instant::now();
        let report = harness::run_experiment(&ExperimentConfig::grid(size, agent, seed)).map_err(|e| e.to_string())?;
        eprintln!("    grid {size}x{size} {agent:?} seed {seed}: best SR {:.3} ({:.0}s)", report.best_success_ratio(), t.elapsed().as_secs_f64());
        per_seed.push(report.best_success_ratio());
    }
    Ok((per_seed.iter().copied().fold(0.0, f64::max), per_seed))
}

fn grid_criterion(size: usize, floor: f64) -> Check {
    let (gdqn, g_all) = best_grid(size, AgentKind::Gdqn)?;
    let (dqn, d_all) = best_grid(size, AgentKind::Dqn)?;
    let detail = format!("GDQN {gdqn:.3} (need >= {floor}) seeds {g_all:.3?}; DQN {dqn:.3} seeds {d_all:.3?}; gap {:.3} (need >= 0.15)", gdqn - dqn);
    if gdqn >= floor && gdqn - dqn >= 0.15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn key(m: &StackMetrics) -> (f64, f64) {
    (m.success, m.overlap)
}

/// Best-of-seeds stacking result, ranked like epochs: success ratio, then overlap.
fn best_stack(n_blocks: usize, agent: AgentKind, shaping: Shaping) -> Result<StackMetrics, String> {
    let mut best: Option<StackMetrics> = None;
    for seed in SEEDS {
        let t = Instant::now();
        let report: RunReport = harness::run_experiment(&ExperimentConfig::stack(n_blocks, agent, shaping, seed)).map_err(|e| e.to_string())?;
        let m = report.best_stack();
        eprintln!(
            "    stack {n_blocks} blocks {agent:?} {shaping:?} seed {seed}: SR {:.3} OR {:.3} ({:.0}s)",
            m.success,
            m.overlap,
            t.elapsed().as_secs_f64()
        );
        if best.is_none_or(|b| key(&m) > key(&b)) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one seed"))
}

struct FourBlock {
    dqn: StackMetrics,
    gdqn: StackMetrics,
    gdqn_or: StackMetrics,
    gdqn_dt: StackMetrics,
}

fn fmt(m: &StackMetrics) -> String {
    format!("SR {:.3} OR {:.3}", m.success, m.overlap)
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |c: u32| wanted.is_empty() || wanted.contains(&c);
    let mut results: Vec<(u32, &str, Check)> = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Check| {
        if !run(n) {
            return;
        }
        let t = Instant::now();
        let r = f();
        let (tag, detail) = match &r {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {n} [{tag}] {name}: {detail} ({:.1}s)", t.elapsed().as_secs_f64());
        results.push((n, name, r));
    };

    record(1, "gradient check", &mut || props::gradient(0));
    record(2, "distance transform vs brute force", &mut || props::distance_transform(2024, 200));
    record(3, "stability vs torque oracle", &mut props::stability_oracle);
    record(4, "environment invariants", &mut props::environment_invariants);
    record(5, "gridworld 5x5", &mut || grid_criterion(5, 0.90));
    record(6, "gridworld 7x7", &mut || grid_criterion(7, 0.85));
    record(7, "2-block stacking", &mut || {
        let gdqn = best_stack(2, AgentKind::Gdqn, Shaping::None)?;
        let dqn = best_stack(2, AgentKind::Dqn, Shaping::None)?;
        let detail = format!("GDQN {} (need SR >= 0.55); DQN {} (need GDQN SR > DQN SR)", fmt(&gdqn), fmt(&dqn));
        if gdqn.success >= 0.55 && gdqn.success > dqn.success {
            Ok(detail)
        } else {
            Err(detail)
        }
    });

    let four_block = || -> Result<FourBlock, String> {
        Ok(FourBlock {
            dqn: best_stack(4, AgentKind::Dqn, Shaping::None)?,
            gdqn: best_stack(4, AgentKind::Gdqn, Shaping::None)?,
            gdqn_or: best_stack(4, AgentKind::Gdqn, Shaping::Overlap)?,
            gdqn_dt: best_stack(4, AgentKind::Gdqn, Shaping::Distance)?,
        })
    };
    let four = (run(8) || run(9)).then(four_block);
    record(8, "4-block stacking", &mut || {
        let f = four.as_ref().unwrap().as_ref().map_err(|e| e.clone())?;
        let detail = format!("DQN {} (need SR <= 0.10); GDQN {} (need SR >= 0.10); GDQN+DT {} (need OR and SR >= GDQN)", fmt(&f.dqn), fmt(&f.gdqn), fmt(&f.gdqn_dt));
        if f.dqn.success <= 0.10 && f.gdqn.success >= 0.10 && f.gdqn_dt.overlap >= f.gdqn.overlap && f.gdqn_dt.success >= f.gdqn.success {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
    record(9, "shaping ordering on 4 blocks", &mut || {
        let f = four.as_ref().unwrap().as_ref().map_err(|e| e.clone())?;
        let detail = format!("OR: GDQN+OR {:.3}, GDQN+DT {:.3} (both need > GDQN {:.3})", f.gdqn_or.overlap, f.gdqn_dt.overlap, f.gdqn.overlap);
        if f.gdqn_or.overlap > f.gdqn.overlap && f.gdqn_dt.overlap > f.gdqn.overlap {
            Ok(detail)
        } else {
            Err(detail)
        }
    });

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
