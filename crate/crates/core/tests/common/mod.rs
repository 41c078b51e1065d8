//! Independent oracles shared by the integration tests and the acceptance suite.
//!
//! Nothing here calls into the code it checks: the reference forward pass,
//! brute-force distance maps and the torque-balance stability test are written
//! from scratch so that agreement means something.

#![allow(dead_code)]

pub mod properties;

use gdqn::env::stack::{Block, Orientation, SceneDims};
use gdqn::nn::DenseNet;
use gdqn::raster::Raster;
use gdqn::shaping::Metric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

/// Plain dense forward pass returning every layer's pre-activations.
pub fn reference_preacts(net: &DenseNet<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let layers = net.layers();
    let mut h = x.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let z: Vec<f64> = (0..layer.rows)
            .map(|i| layer.biases[i] + (0..layer.cols).map(|j| layer.weights[i * layer.cols + j] * h[j]).sum::<f64>())
            .collect();
        h = if l + 1 < layers.len() { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
        out.push(z);
    }
    out
}

/// Mean squared TD error of the chosen actions, computed with the reference forward pass.
pub fn reference_loss(net: &DenseNet<f64>, xs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> f64 {
    let n = xs.len() as f64;
    xs.iter()
        .zip(actions)
        .zip(targets)
        .map(|((x, &a), &y)| {
            let q = reference_preacts(net, x).last().unwrap()[a];
            (y - q) * (y - q)
        })
        .sum::<f64>()
        / n
}

fn relu_pattern(net: &DenseNet<f64>, xs: &[Vec<f64>]) -> Vec<bool> {
    xs.iter()
        .flat_map(|x| {
            let z = reference_preacts(net, x);
            let hidden = z.len() - 1;
            z.into_iter().take(hidden).flatten().map(|v| v > 0.0).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Parameters compared (non-zero analytic gradient, no ReLU kink crossed).
    pub checked: usize,
    /// Parameters whose analytic and numerical gradients were both exactly zero.
    pub zero: usize,
    /// Parameters skipped because the probe crossed a ReLU kink.
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// Central differences with step `h` on randomly chosen parameters of an
/// `[inputs, 64, 64, actions]` network, until `want` non-trivial parameters
/// have been compared. A probe is skipped when perturbing the parameter by
/// `±h` changes any hidden unit's ReLU state: the loss is not differentiable
/// across the kink, so the difference quotient would not estimate the gradient.
pub fn gradient_check(seed: u64, inputs: usize, actions: usize, want: usize, h: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [inputs, 64, 64, actions];
    let net = DenseNet::<f64>::init(&dims, &mut rng).unwrap();
    let batch = 4;
    let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let actions_v: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..actions)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();

    let (_, grads) = net.q_loss_and_grad(&xs, &actions_v, &targets).unwrap();
    let base_pattern = relu_pattern(&net, &xs);

    let mut report = GradCheck { checked: 0, zero: 0, skipped: 0, max_rel_err: 0.0 };
    let mut attempts = 0;
    while report.checked < want && attempts < 50 * want {
        attempts += 1;
        let l = rng.gen_range(0..net.layers().len());
        let layer = &net.layers()[l];
        let is_bias = rng.gen_bool(0.2);
        let idx = if is_bias { rng.gen_range(0..layer.rows) } else { rng.gen_range(0..layer.rows * layer.cols) };
        let analytic = if is_bias { grads.layers()[l].biases[idx] } else { grads.layers()[l].weights[idx] };

        let probe = |delta: f64| {
            let mut p = net.clone();
            let lp = &mut p.layers_mut()[l];
            if is_bias {
                lp.biases[idx] += delta;
            } else {
                lp.weights[idx] += delta;
            }
            p
        };
        let (plus, minus) = (probe(h), probe(-h));
        if relu_pattern(&plus, &xs) != base_pattern || relu_pattern(&minus, &xs) != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (reference_loss(&plus, &xs, &actions_v, &targets) - reference_loss(&minus, &xs, &actions_v, &targets)) / (2.0 * h);
        if analytic == 0.0 && numeric.abs() < 1e-12 {
            report.zero += 1;
            continue;
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        report.max_rel_err = report.max_rel_err.max(rel);
        report.checked += 1;
    }
    report
}

// ---------------------------------------------------------------------------
// Distance transform
// ---------------------------------------------------------------------------

/// Minimum distance from every cell to the nearest foreground cell, by exhaustive search.
pub fn brute_distance(mask: &Raster, metric: Metric) -> Vec<f64> {
    let fg: Vec<(i64, i64)> = mask.foreground().map(|(x, y)| (x as i64, y as i64)).collect();
    let mut out = Vec::with_capacity(mask.width() * mask.height());
    for y in 0..mask.height() as i64 {
        for x in 0..mask.width() as i64 {
            let d = fg
                .iter()
                .map(|&(fx, fy)| match metric {
                    Metric::Manhattan => ((fx - x).abs() + (fy - y).abs()) as f64,
                    Metric::Euclidean => (((fx - x).pow(2) + (fy - y).pow(2)) as f64).sqrt(),
                })
                .fold(f64::INFINITY, f64::min);
            out.push(d);
        }
    }
    out
}

/// Random mask with at least one foreground cell.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Raster {
    let density = rng.gen_range(0.02..0.5);
    let mut r = Raster::new(w, h);
    for y in 0..h {
        for x in 0..w {
            r.set(x, y, rng.gen_bool(density));
        }
    }
    if r.count() == 0 {
        r.set(rng.gen_range(0..w), rng.gen_range(0..h), true);
    }
    r
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

fn footprint(b: &Block) -> Vec<(i64, i64)> {
    let (w, h) = b.orientation.extent();
    let mut cells = Vec::new();
    for dy in 0..h {
        for dx in 0..w {
            cells.push(((b.x + dx) as i64, (b.y + dy) as i64));
        }
    }
    cells
}

/// Torque-balance verdict computed cell by cell.
///
/// Every cell is a unit mass at its centre. For each block, the load is the
/// block itself plus every block reachable by repeatedly stepping to a block
/// with a cell directly above a cell of the current one. The block's contact
/// cells are those with the floor or another block directly beneath; the load
/// is balanced iff its net torque about the leftmost contact edge is strictly
/// positive and about the rightmost contact edge strictly negative (the
/// resultant passes strictly between the edges).
pub fn torque_stable(blocks: &[Block], dims: SceneDims) -> bool {
    let cells: Vec<Vec<(i64, i64)>> = blocks.iter().map(footprint).collect();
    let owner = |x: i64, y: i64| cells.iter().position(|c| c.contains(&(x, y)));
    let floor = dims.height as i64;
    for (i, own) in cells.iter().enumerate() {
        let contacts: Vec<i64> =
            own.iter().filter(|&&(x, y)| y + 1 == floor || owner(x, y + 1).is_some_and(|o| o != i)).map(|&(x, _)| x).collect();
        if contacts.is_empty() {
            return false;
        }
        let left = *contacts.iter().min().unwrap() as f64;
        let right = (*contacts.iter().max().unwrap() + 1) as f64;

        let mut load = vec![i];
        let mut k = 0;
        while k < load.len() {
            let cur = load[k];
            for &(x, y) in &cells[cur] {
                if let Some(o) = owner(x, y - 1) {
                    if o != cur && !load.contains(&o) {
                        load.push(o);
                    }
                }
            }
            k += 1;
        }
        let torque = |pivot: f64| load.iter().flat_map(|&j| cells[j].iter()).map(|&(x, _)| x as f64 + 0.5 - pivot).sum::<f64>();
        if !(torque(left) > 0.0 && torque(right) < 0.0) {
            return false;
        }
    }
    true
}

/// Drops a block of `orientation` at column `x` onto `placed`; `None` if it does not fit.
pub fn drop_block(placed: &[Block], dims: SceneDims, x: usize, orientation: Orientation) -> Option<Block> {
    let (w, h) = orientation.extent();
    if x + w > dims.width || h > dims.height {
        return None;
    }
    let taken: Vec<(i64, i64)> = placed.iter().flat_map(footprint).collect();
    let blocked = |b: &Block| footprint(b).iter().any(|c| taken.contains(c));
    let mut b = Block::new(x, 0, orientation);
    if blocked(&b) {
        return None;
    }
    loop {
        if b.y + h == dims.height {
            return Some(b);
        }
        let next = Block::new(x, b.y + 1, orientation);
        if blocked(&next) {
            return Some(b);
        }
        b = next;
    }
}

/// Every sequence of `n` dropped blocks (each orientation, each column) on a `dims` scene.
pub fn drop_configurations(n: usize, dims: SceneDims) -> Vec<Vec<Block>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for cfg in &out {
            for orientation in [Orientation::Horizontal, Orientation::Vertical] {
                for x in 0..dims.width {
                    if let Some(b) = drop_block(cfg, dims, x, orientation) {
                        let mut c = cfg.clone();
                        c.push(b);
                        next.push(c);
                    }
                }
            }
        }
        out = next;
    }
    out
}

/// Two-block configurations with the upper horizontal block shifted by `offset`
/// cells relative to a horizontal base block centred on the floor.
pub fn offset_pair(offset: i64, dims: SceneDims) -> Option<Vec<Block>> {
    let base_x = (dims.width as i64 - 5) / 2;
    let x = base_x + offset;
    if x < 0 || x + 5 > dims.width as i64 {
        return None;
    }
    let base = Block::new(base_x as usize, dims.height - 1, Orientation::Horizontal);
    let top = Block::new(x as usize, dims.height - 2, Orientation::Horizontal);
    Some(vec![base, top])
}
