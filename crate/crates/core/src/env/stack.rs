//! Two-dimensional target stacking.
//!
//! Blocks are 5x1 (horizontal) or 1x5 (vertical) cell rectangles. The active
//! block spawns on the top row and is steered with `{left, right, down}`. A
//! sideways move into the boundary or the structure is a collision; a down
//! move that is blocked by the floor or the structure places the block, after
//! which the structure is checked for quasi-static stability.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, EpisodeFacts, StepResult, TerminalCause};
use crate::nn::SparseVec;
use crate::raster::Raster;
use crate::scalar::Scalar;
use crate::shaping::{self, DistanceMap, Metric, Shaping};

pub const BLOCK_LEN: usize = 5;

/// Default scene size in cells.
pub const DEFAULT_WIDTH: usize = 20;
pub const DEFAULT_HEIGHT: usize = 20;

/// Evaluation episodes longer than this count as failures.
pub const EVAL_STEP_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    /// `(width, height)` in cells.
    pub fn extent(self) -> (usize, usize) {
        match self {
            Orientation::Horizontal => (BLOCK_LEN, 1),
            Orientation::Vertical => (1, BLOCK_LEN),
        }
    }
}

/// A block anchored at its top-left cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub x: usize,
    pub y: usize,
    pub orientation: Orientation,
}

impl Block {
    pub fn new(x: usize, y: usize, orientation: Orientation) -> Self {
        Self { x, y, orientation }
    }

    pub fn width(&self) -> usize {
        self.orientation.extent().0
    }

    pub fn height(&self) -> usize {
        self.orientation.extent().1
    }

    /// One past the last column.
    pub fn right(&self) -> usize {
        self.x + self.width()
    }

    /// One past the last row.
    pub fn bottom(&self) -> usize {
        self.y + self.height()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> {
        let (x0, y0, w, h) = (self.x, self.y, self.width(), self.height());
        (y0..y0 + h).flat_map(move |y| (x0..x0 + w).map(move |x| (x, y)))
    }

    pub fn fits(&self, dims: SceneDims) -> bool {
        self.right() <= dims.width && self.bottom() <= dims.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneDims {
    pub width: usize,
    pub height: usize,
}

impl Default for SceneDims {
    fn default() -> Self {
        Self { width: DEFAULT_WIDTH, height: DEFAULT_HEIGHT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackAction {
    Left,
    Right,
    Down,
}

impl StackAction {
    pub const ALL: [StackAction; 3] = [StackAction::Left, StackAction::Right, StackAction::Down];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Result of one scene step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Continuing,
    Collision,
    Collapse,
    Finished,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Continuing
    }
}

/// Cell-to-block index map of a set of blocks; fails on overlap or out-of-bounds blocks.
fn occupancy(blocks: &[Block], dims: SceneDims) -> Result<Vec<Option<usize>>, EnvError> {
    let mut occ = vec![None; dims.width * dims.height];
    for (i, b) in blocks.iter().enumerate() {
        if !b.fits(dims) {
            return Err(EnvError::InvalidState(format!("block {i} at ({}, {}) out of bounds", b.x, b.y)));
        }
        for (x, y) in b.cells() {
            let cell = &mut occ[y * dims.width + x];
            if let Some(j) = *cell {
                return Err(EnvError::InvalidState(format!("blocks {j} and {i} overlap at ({x}, {y})")));
            }
            *cell = Some(i);
        }
    }
    Ok(occ)
}

/// Quasi-static stability of a set of placed blocks on the floor of a `dims` scene.
///
/// For every block, the combined centre of mass of the block and everything
/// resting on it (transitively) must lie strictly inside the horizontal hull of
/// the block's contact cells with whatever supports it. Block density is
/// uniform, so every block weighs the same.
pub fn stability(placed: &[Block], dims: SceneDims) -> Result<bool, EnvError> {
    let occ = occupancy(placed, dims)?;
    let n = placed.len();
    // carriers[b] = blocks resting directly on b
    let mut carriers: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut contact: Vec<Option<(usize, usize)>> = vec![None; n];
    for (i, b) in placed.iter().enumerate() {
        if b.bottom() == dims.height {
            contact[i] = Some((b.x, b.right() - 1));
            continue;
        }
        let row = b.bottom();
        for x in b.x..b.right() {
            if let Some(s) = occ[row * dims.width + x] {
                contact[i] = Some(match contact[i] {
                    None => (x, x),
                    Some((lo, _)) => (lo, x),
                });
                if !carriers[s].contains(&i) {
                    carriers[s].push(i);
                }
            }
        }
    }

    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for i in 0..n {
        let Some((lo, hi)) = contact[i] else {
            return Ok(false);
        };
        seen.iter_mut().for_each(|s| *s = false);
        stack.clear();
        stack.push(i);
        seen[i] = true;
        let (mut count, mut doubled_centres) = (0i64, 0i64);
        while let Some(j) = stack.pop() {
            let bj = &placed[j];
            count += 1;
            doubled_centres += (2 * bj.x + bj.width()) as i64;
            for &k in &carriers[j] {
                if !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        // strict containment of the doubled centre of mass in (2 lo, 2 (hi + 1))
        let left = 2 * lo as i64 * count;
        let right = 2 * (hi as i64 + 1) * count;
        if !(left < doubled_centres && doubled_centres < right) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Row at which a block released at the top of column `x` comes to rest, or
/// `None` if it overlaps the structure already at the top row.
pub fn drop_row(occupied: &Raster, x: usize, orientation: Orientation) -> Option<usize> {
    let dims = SceneDims { width: occupied.width(), height: occupied.height() };
    let mut block = Block::new(x, 0, orientation);
    if !block.fits(dims) || overlaps_raster(&block, occupied) {
        return None;
    }
    while !resting(&block, occupied) {
        block.y += 1;
    }
    Some(block.y)
}

fn overlaps_raster(block: &Block, occupied: &Raster) -> bool {
    block.cells().any(|(x, y)| occupied.get(x, y))
}

/// The block cannot move down: it touches the floor or a set cell directly below.
fn resting(block: &Block, occupied: &Raster) -> bool {
    let below = block.bottom();
    below == occupied.height() || (block.x..block.right()).any(|x| occupied.get(x, below))
}

fn paint(raster: &mut Raster, block: &Block) {
    for (x, y) in block.cells() {
        raster.set(x, y, true);
    }
}

/// A target structure: the blocks in build order and their union raster.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub id: usize,
    pub dims: SceneDims,
    pub blocks: Vec<Block>,
    pub orientation_seq: Vec<Orientation>,
    pub raster: Raster,
}

impl TargetSpec {
    /// Validates the block list and derives the raster and orientation sequence.
    pub fn from_blocks(id: usize, dims: SceneDims, blocks: Vec<Block>) -> Result<Self, EnvError> {
        if blocks.is_empty() {
            return Err(EnvError::InvalidConfig("target needs at least one block".into()));
        }
        occupancy(&blocks, dims)?;
        let mut raster = Raster::new(dims.width, dims.height);
        for b in &blocks {
            paint(&mut raster, b);
        }
        let orientation_seq = blocks.iter().map(|b| b.orientation).collect();
        Ok(Self { id, dims, blocks, orientation_seq, raster })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// Number of targets generated for a block count: 4, 6 and 8 for 2, 3 and 4 blocks.
pub fn default_group_size(n_blocks: usize) -> usize {
    2 * n_blocks
}

/// Rows kept free at the top of the scene so every spawn position is reachable.
pub fn spawn_clearance() -> usize {
    BLOCK_LEN + 1
}

/// Generates `count` distinct targets of `n_blocks` blocks each.
///
/// Each candidate is grown block by block: a random orientation, a random
/// column overlapping the structure built so far, and a straight drop from the
/// top row. Every block after the first must rest on an earlier block, every
/// prefix must be stable, and the structure must leave the spawn rows free.
/// Accepted targets are replayed with the scripted builder before being kept.
pub fn generate_targets<R: Rng + ?Sized>(
    n_blocks: usize,
    count: usize,
    dims: SceneDims,
    rng: &mut R,
) -> Result<Vec<TargetSpec>, EnvError> {
    if n_blocks == 0 {
        return Err(EnvError::InvalidConfig("targets need at least one block".into()));
    }
    if dims.width < BLOCK_LEN || dims.height < spawn_clearance() + 1 {
        return Err(EnvError::InvalidConfig(format!("scene {}x{} too small for targets", dims.width, dims.height)));
    }
    const MAX_ATTEMPTS: usize = 200_000;
    let mut out: Vec<TargetSpec> = Vec::with_capacity(count);
    let mut replay_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    for _ in 0..MAX_ATTEMPTS {
        if out.len() == count {
            break;
        }
        let Some(blocks) = grow_candidate(n_blocks, dims, rng)? else {
            continue;
        };
        let target = TargetSpec::from_blocks(out.len(), dims, blocks)?;
        if out.iter().any(|t| t.raster == target.raster) {
            continue;
        }
        if scripted_build(&target, &mut replay_rng)? {
            out.push(target);
        }
    }
    if out.len() < count {
        return Err(EnvError::InvalidConfig(format!("could only generate {} of {count} targets", out.len())));
    }
    Ok(out)
}

fn grow_candidate<R: Rng + ?Sized>(n_blocks: usize, dims: SceneDims, rng: &mut R) -> Result<Option<Vec<Block>>, EnvError> {
    let mut blocks: Vec<Block> = Vec::with_capacity(n_blocks);
    let mut occupied = Raster::new(dims.width, dims.height);
    for k in 0..n_blocks {
        let orientation = if rng.gen_bool(0.5) { Orientation::Horizontal } else { Orientation::Vertical };
        let (w, _) = orientation.extent();
        let max_x = dims.width - w;
        let (lo, hi) = if k == 0 {
            (0, max_x)
        } else {
            let left = blocks.iter().map(|b| b.x).min().unwrap();
            let right = blocks.iter().map(|b| b.right()).max().unwrap();
            ((left + 1).saturating_sub(w), (right - 1).min(max_x))
        };
        if lo > hi {
            return Ok(None);
        }
        let x = rng.gen_range(lo..=hi);
        let Some(y) = drop_row(&occupied, x, orientation) else {
            return Ok(None);
        };
        let block = Block::new(x, y, orientation);
        if k > 0 && block.bottom() == dims.height {
            return Ok(None);
        }
        if y < spawn_clearance() {
            return Ok(None);
        }
        paint(&mut occupied, &block);
        blocks.push(block);
        if !stability(&blocks, dims)? {
            return Ok(None);
        }
    }
    Ok(Some(blocks))
}

/// Scripted builder: steer each active block to its target column, then drop it.
pub fn scripted_action(scene: &StackScene) -> Option<StackAction> {
    let active = scene.active?;
    let goal = scene.target.blocks.get(scene.placed.len())?;
    Some(if active.x < goal.x {
        StackAction::Right
    } else if active.x > goal.x {
        StackAction::Left
    } else {
        StackAction::Down
    })
}

/// Runs the scripted builder on `target`; true iff it finishes with an exact match.
pub fn scripted_build<R: Rng + ?Sized>(target: &TargetSpec, rng: &mut R) -> Result<bool, EnvError> {
    let mut scene = stack_reset(target.dims, Arc::new(target.clone()), rng)?;
    let limit = target.n_blocks() * (target.dims.width + target.dims.height + 2);
    for _ in 0..limit {
        let Some(action) = scripted_action(&scene) else {
            return Ok(false);
        };
        match scene.step(action, rng)?.outcome {
            Outcome::Continuing => {}
            Outcome::Finished => return match_target(&scene.placed_raster(), target),
            Outcome::Collision | Outcome::Collapse => return Ok(false),
        }
    }
    Ok(false)
}

/// Exact raster equality.
pub fn match_target(placed: &Raster, target: &TargetSpec) -> Result<bool, EnvError> {
    placed.same_dims(&target.raster)?;
    Ok(*placed == target.raster)
}

/// Scene rasters right after an action resolved, before any next block spawns.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outcome: Outcome,
    /// Placed and active cells.
    pub settled_full: Raster,
    /// Placed cells only.
    pub settled_placed: Raster,
}

#[derive(Debug, Clone)]
pub struct StackScene {
    dims: SceneDims,
    placed: Vec<Block>,
    occupied: Raster,
    active: Option<Block>,
    target: Arc<TargetSpec>,
    blocks_spawned: usize,
    outcome: Outcome,
}

/// New episode: empty scene, first block spawned on the top row.
pub fn stack_reset<R: Rng + ?Sized>(dims: SceneDims, target: Arc<TargetSpec>, rng: &mut R) -> Result<StackScene, EnvError> {
    if target.dims.width > dims.width || target.dims.height > dims.height {
        return Err(EnvError::InvalidConfig(format!(
            "target {}x{} larger than scene {}x{}",
            target.dims.width, target.dims.height, dims.width, dims.height
        )));
    }
    if target.dims != dims {
        return Err(EnvError::InvalidConfig("target raster must match the scene size".into()));
    }
    if target.orientation_seq.iter().any(|o| o.extent().0 > dims.width || o.extent().1 > dims.height) {
        return Err(EnvError::InvalidConfig("block does not fit in the scene".into()));
    }
    let mut scene = StackScene {
        dims,
        placed: Vec::with_capacity(target.n_blocks()),
        occupied: Raster::new(dims.width, dims.height),
        active: None,
        target,
        blocks_spawned: 0,
        outcome: Outcome::Continuing,
    };
    if !scene.spawn(rng) {
        return Err(EnvError::InvalidConfig("no spawn column available".into()));
    }
    Ok(scene)
}

impl StackScene {
    pub fn dims(&self) -> SceneDims {
        self.dims
    }

    pub fn placed(&self) -> &[Block] {
        &self.placed
    }

    pub fn active(&self) -> Option<&Block> {
        self.active.as_ref()
    }

    pub fn target(&self) -> &Arc<TargetSpec> {
        &self.target
    }

    pub fn blocks_spawned(&self) -> usize {
        self.blocks_spawned
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome.is_terminal()
    }

    /// Columns where the next block can spawn without overlapping the structure.
    pub fn spawn_columns(&self, orientation: Orientation) -> Vec<usize> {
        let (w, _) = orientation.extent();
        (0..=self.dims.width - w).filter(|&x| !overlaps_raster(&Block::new(x, 0, orientation), &self.occupied)).collect()
    }

    fn spawn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let orientation = self.target.orientation_seq[self.blocks_spawned];
        let columns = self.spawn_columns(orientation);
        let Some(&x) = columns.choose(rng) else {
            return false;
        };
        self.active = Some(Block::new(x, 0, orientation));
        self.blocks_spawned += 1;
        true
    }

    /// Applies one action. The generator is used only to spawn the next block.
    pub fn step<R: Rng + ?Sized>(&mut self, action: StackAction, rng: &mut R) -> Result<StepReport, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminated);
        }
        let mut block = self.active.ok_or_else(|| EnvError::InvalidState("no active block".into()))?;
        let mut spawn_next = false;
        let outcome = match action {
            StackAction::Left | StackAction::Right => {
                let moved = match action {
                    StackAction::Left if block.x > 0 => Some(Block { x: block.x - 1, ..block }),
                    StackAction::Right if block.right() < self.dims.width => Some(Block { x: block.x + 1, ..block }),
                    _ => None,
                };
                match moved {
                    Some(m) if !overlaps_raster(&m, &self.occupied) => {
                        self.active = Some(m);
                        Outcome::Continuing
                    }
                    _ => Outcome::Collision,
                }
            }
            StackAction::Down => {
                if resting(&block, &self.occupied) {
                    paint(&mut self.occupied, &block);
                    self.placed.push(block);
                    self.active = None;
                    if !stability(&self.placed, self.dims)? {
                        Outcome::Collapse
                    } else if self.blocks_spawned == self.target.n_blocks() {
                        Outcome::Finished
                    } else {
                        spawn_next = true;
                        Outcome::Continuing
                    }
                } else {
                    block.y += 1;
                    self.active = Some(block);
                    Outcome::Continuing
                }
            }
        };
        let settled_placed = self.occupied.clone();
        let mut settled_full = settled_placed.clone();
        if let Some(a) = &self.active {
            paint(&mut settled_full, a);
        }
        let outcome = if spawn_next && !self.spawn(rng) {
            // the structure blocks every spawn column
            Outcome::Collision
        } else {
            outcome
        };
        self.outcome = outcome;
        Ok(StepReport { outcome, settled_full, settled_placed })
    }

    pub fn placed_raster(&self) -> Raster {
        self.occupied.clone()
    }
}

/// Occupancy of placed and active blocks.
pub fn render(scene: &StackScene) -> Raster {
    let mut r = scene.occupied.clone();
    if let Some(a) = &scene.active {
        paint(&mut r, a);
    }
    r
}

/// Text frame: `#` placed, `@` active block, `+` target cell not yet covered, `.` empty.
pub fn render_frame(scene: &StackScene) -> Vec<String> {
    let dims = scene.dims;
    let active: Vec<(usize, usize)> = scene.active.iter().flat_map(|b| b.cells()).collect();
    (0..dims.height)
        .map(|y| {
            (0..dims.width)
                .map(|x| {
                    if active.contains(&(x, y)) {
                        '@'
                    } else if scene.occupied.get(x, y) {
                        '#'
                    } else if scene.target.raster.get(x, y) {
                        '+'
                    } else {
                        '.'
                    }
                })
                .collect()
        })
        .collect()
}

const PLACED_LEVEL: f64 = 0.5;
const ACTIVE_LEVEL: f64 = 1.0;

/// Flattened scene (placed 0.5, active 1.0) and flattened target raster (0/1).
pub fn stack_encode<T: Scalar>(scene: &StackScene, target: &TargetSpec) -> (Vec<T>, Vec<T>) {
    let mut obs: Vec<T> = scene.occupied.cells().iter().map(|&c| if c { T::lit(PLACED_LEVEL) } else { T::zero() }).collect();
    if let Some(a) = &scene.active {
        for (x, y) in a.cells() {
            obs[y * scene.dims.width + x] = T::lit(ACTIVE_LEVEL);
        }
    }
    let goal = target.raster.cells().iter().map(|&c| if c { T::one() } else { T::zero() }).collect();
    (obs, goal)
}

/// [`Environment`] over a fixed group of targets; each episode picks one uniformly.
#[derive(Debug, Clone)]
pub struct StackEnv {
    dims: SceneDims,
    targets: Vec<Arc<TargetSpec>>,
    distance_maps: Vec<DistanceMap<f64>>,
    shaping: Shaping,
    scene: StackScene,
    rng: ChaCha8Rng,
}

impl StackEnv {
    pub fn new(dims: SceneDims, targets: Vec<TargetSpec>, shaping: Shaping, metric: Metric, seed: u64) -> Result<Self, EnvError> {
        if targets.is_empty() {
            return Err(EnvError::InvalidConfig("empty target group".into()));
        }
        let distance_maps = targets
            .iter()
            .map(|t| shaping::distance_transform(&t.raster, metric))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        let targets: Vec<_> = targets.into_iter().map(Arc::new).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = targets[rng.gen_range(0..targets.len())].clone();
        let scene = stack_reset(dims, first, &mut rng)?;
        Ok(Self { dims, targets, distance_maps, shaping, scene, rng })
    }

    pub fn scene(&self) -> &StackScene {
        &self.scene
    }

    pub fn targets(&self) -> &[Arc<TargetSpec>] {
        &self.targets
    }

    /// Starts an episode on a specific target of the group.
    pub fn reset_to(&mut self, index: usize) -> Result<(), EnvError> {
        let target = self
            .targets
            .get(index)
            .cloned()
            .ok_or_else(|| EnvError::InvalidConfig(format!("no target with index {index}")))?;
        self.scene = stack_reset(self.dims, target, &mut self.rng)?;
        Ok(())
    }

    fn target_index(&self) -> usize {
        self.targets.iter().position(|t| Arc::ptr_eq(t, &self.scene.target)).unwrap_or(0)
    }
}

impl Environment for StackEnv {
    fn num_actions(&self) -> usize {
        StackAction::ALL.len()
    }

    fn obs_dim(&self) -> usize {
        self.dims.width * self.dims.height
    }

    fn goal_dim(&self) -> usize {
        self.dims.width * self.dims.height
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        let index = self.rng.gen_range(0..self.targets.len());
        self.reset_to(index)
    }

    fn observe<T: Scalar>(&self) -> (SparseVec<T>, SparseVec<T>) {
        let (obs, goal) = stack_encode::<T>(&self.scene, &self.scene.target);
        (SparseVec::from_dense(&obs), SparseVec::from_dense(&goal))
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let a = StackAction::from_index(action).ok_or(EnvError::BadAction { action, count: 3 })?;
        let prev_full = render(&self.scene);
        let prev_placed = self.scene.occupied.clone();
        let report = self.scene.step(a, &mut self.rng)?;
        let target = &self.scene.target;
        let shaped = match self.shaping {
            Shaping::None => 0,
            Shaping::Overlap => shaping::overlap_reward(&prev_placed, &report.settled_placed, &target.raster)
                .map_err(|e| EnvError::InvalidState(e.to_string()))?,
            Shaping::Distance => {
                let map = &self.distance_maps[self.target_index()];
                shaping::distance_reward(&prev_full, &report.settled_full, map).map_err(|e| EnvError::InvalidState(e.to_string()))?
            }
        };
        let (task_reward, terminal) = match report.outcome {
            Outcome::Continuing => (0.0, None),
            Outcome::Collision => (0.0, Some(TerminalCause::Collision)),
            Outcome::Collapse => (0.0, Some(TerminalCause::Collapse)),
            Outcome::Finished => {
                let matched = match_target(&report.settled_placed, target)?;
                (if matched { 1.0 } else { 0.0 }, Some(TerminalCause::Finished))
            }
        };
        Ok(StepResult { reward: task_reward + f64::from(shaped), task_reward, terminal })
    }

    fn eval_step_cap(&self) -> usize {
        EVAL_STEP_CAP
    }

    fn episode_facts(&self) -> EpisodeFacts {
        let target = &self.scene.target;
        let placed = self.scene.placed_raster();
        EpisodeFacts {
            goal_id: target.id,
            optimal_steps: None,
            overlap: shaping::overlap_ratio(&placed, &target.raster).ok(),
            matched: Some(placed == target.raster),
        }
    }
}

/// On-disk form of a target group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSetFile {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub n_blocks: usize,
    pub seed: u64,
    pub targets: Vec<TargetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub id: usize,
    pub blocks: Vec<Block>,
    pub orientation_seq: Vec<Orientation>,
    pub raster: Vec<String>,
}

pub const TARGET_FILE_VERSION: u32 = 1;

impl TargetSetFile {
    pub fn from_targets(targets: &[TargetSpec], n_blocks: usize, dims: SceneDims, seed: u64) -> Self {
        Self {
            format_version: TARGET_FILE_VERSION,
            width: dims.width,
            height: dims.height,
            n_blocks,
            seed,
            targets: targets
                .iter()
                .map(|t| TargetRecord { id: t.id, blocks: t.blocks.clone(), orientation_seq: t.orientation_seq.clone(), raster: t.raster.to_rows() })
                .collect(),
        }
    }

    /// Rebuilds the targets, checking that the stored raster and orientations agree with the blocks.
    pub fn to_targets(&self) -> Result<Vec<TargetSpec>, EnvError> {
        if self.format_version != TARGET_FILE_VERSION {
            return Err(EnvError::InvalidConfig(format!("unsupported target file version {}", self.format_version)));
        }
        let dims = SceneDims { width: self.width, height: self.height };
        self.targets
            .iter()
            .map(|r| {
                let t = TargetSpec::from_blocks(r.id, dims, r.blocks.clone())?;
                if t.raster != Raster::from_rows(&r.raster)? || t.orientation_seq != r.orientation_seq || t.n_blocks() != self.n_blocks {
                    return Err(EnvError::InvalidConfig(format!("target {} is inconsistent", r.id)));
                }
                Ok(t)
            })
            .collect()
    }
}
