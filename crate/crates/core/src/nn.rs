//! Dense feed-forward Q-network with analytic gradients and a first-order optimizer.
//!
//! Hidden layers use a rectifier, the output layer is affine. The input layer
//! only touches the non-zero entries of its input, which keeps one-hot and
//! raster encodings cheap even when the input width is in the hundreds.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("action index {index} out of range for {len} outputs")]
    Index { index: usize, len: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Anything that can be fed to the input layer.
pub trait NetInput<T: Scalar> {
    fn dim(&self) -> usize;

    /// Calls `f(index, value)` for every entry that may be non-zero, in increasing index order.
    fn for_each_nonzero<F: FnMut(usize, T)>(&self, f: F);

    fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.for_each_nonzero(|i, v| out[i] = v);
        out
    }
}

impl<T: Scalar> NetInput<T> for [T] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero<F: FnMut(usize, T)>(&self, mut f: F) {
        for (i, &v) in self.iter().enumerate() {
            if v != T::zero() {
                f(i, v);
            }
        }
    }
}

impl<T: Scalar> NetInput<T> for Vec<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero<F: FnMut(usize, T)>(&self, f: F) {
        self.as_slice().for_each_nonzero(f)
    }
}

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec<T> {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVec<T> {
    pub fn from_dense(dense: &[T]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != T::zero() {
                indices.push(i as u32);
                values.push(v);
            }
        }
        Self { dim: dense.len(), indices, values }
    }

    /// An empty vector of dimension zero (the goal slot of a plain DQN).
    pub fn empty() -> Self {
        Self { dim: 0, indices: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl<T: Scalar> NetInput<T> for SparseVec<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn for_each_nonzero<F: FnMut(usize, T)>(&self, mut f: F) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            f(i as usize, v);
        }
    }
}

/// Concatenation of two inputs without copying; the second one is offset by the first's width.
pub struct Concat<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<T: Scalar, A: NetInput<T> + ?Sized, B: NetInput<T> + ?Sized> NetInput<T> for Concat<'_, A, B> {
    fn dim(&self) -> usize {
        self.0.dim() + self.1.dim()
    }

    fn for_each_nonzero<F: FnMut(usize, T)>(&self, mut f: F) {
        let offset = self.0.dim();
        self.0.for_each_nonzero(&mut f);
        self.1.for_each_nonzero(|i, v| f(i + offset, v));
    }
}

/// Weights (row-major, `out × in`) and biases of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weights: vec![T::zero(); rows * cols], biases: vec![T::zero(); rows] }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.cols + col]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }
}

fn zeros_like<T: Scalar>(dims: &[usize]) -> Vec<LayerParams<T>> {
    dims.windows(2).map(|w| LayerParams::zeros(w[1], w[0])).collect()
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(NnError::InvalidConfig(format!("need at least input and output widths, got {dims:?}")));
    }
    if dims.contains(&0) {
        return Err(NnError::InvalidConfig(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

/// Default hidden architecture: two rectified layers of 64 units.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Layer widths `[inputs, 64, 64, actions]`.
pub fn default_dims(inputs: usize, actions: usize) -> Vec<usize> {
    let mut dims = vec![inputs];
    dims.extend_from_slice(&DEFAULT_HIDDEN);
    dims.push(actions);
    dims
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T> {
    dims: Vec<usize>,
    layers: Vec<LayerParams<T>>,
}

/// Scratch buffers for forward/backward passes. Reuse one per training loop.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    // pre-activations and activations per layer (index 0 is the first hidden layer)
    pre: Vec<Vec<T>>,
    act: Vec<Vec<T>>,
    delta: Vec<Vec<T>>,
}

impl<T: Scalar> Workspace<T> {
    fn fit(&mut self, dims: &[usize]) {
        let n = dims.len() - 1;
        if self.pre.len() != n || self.pre.iter().zip(&dims[1..]).any(|(v, &d)| v.len() != d) {
            self.pre = dims[1..].iter().map(|&d| vec![T::zero(); d]).collect();
            self.act = self.pre.clone();
            self.delta = self.pre.clone();
        }
    }
}

/// Loss applied to the temporal-difference error of the selected action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdLoss {
    /// `(y - q)^2`.
    #[default]
    Squared,
    /// Squared inside `[-1, 1]`, linear outside, so the error term entering the
    /// gradient is clipped to `[-1, 1]`.
    Clipped,
}

impl<T: Scalar> DenseNet<T> {
    /// Fan-in scaled uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let mut layers = zeros_like::<T>(dims);
        for layer in &mut layers {
            let bound = (6.0 / layer.cols as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::lit(rng.gen_range(-bound..bound));
            }
        }
        Ok(Self { dims: dims.to_vec(), layers })
    }

    /// A network with every parameter set to zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), layers: zeros_like(dims) })
    }

    /// Builds a network from explicit layer parameters, checking that the shapes chain.
    pub fn from_layers(layers: Vec<LayerParams<T>>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| NnError::InvalidConfig("no layers".into()))?;
        let mut dims = vec![first.cols];
        for layer in &layers {
            if layer.cols != *dims.last().unwrap() {
                return Err(NnError::Shape { expected: *dims.last().unwrap(), got: layer.cols });
            }
            if layer.weights.len() != layer.rows * layer.cols {
                return Err(NnError::Shape { expected: layer.rows * layer.cols, got: layer.weights.len() });
            }
            if layer.biases.len() != layer.rows {
                return Err(NnError::Shape { expected: layer.rows, got: layer.biases.len() });
            }
            dims.push(layer.rows);
        }
        validate_dims(&dims)?;
        Ok(Self { dims, layers })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerParams::all_finite)
    }

    /// Q-values for one input.
    pub fn forward<I: NetInput<T> + ?Sized>(&self, x: &I) -> Result<Vec<T>> {
        let mut ws = Workspace::default();
        self.forward_with(x, &mut ws)?;
        Ok(ws.act.last().unwrap().clone())
    }

    /// Forward pass into `ws`, returning the output slice.
    pub fn forward_with<'w, I: NetInput<T> + ?Sized>(&self, x: &I, ws: &'w mut Workspace<T>) -> Result<&'w [T]> {
        if x.dim() != self.dims[0] {
            return Err(NnError::Shape { expected: self.dims[0], got: x.dim() });
        }
        ws.fit(&self.dims);
        let last = self.layers.len() - 1;

        let first = &self.layers[0];
        let z = &mut ws.pre[0];
        z.copy_from_slice(&first.biases);
        x.for_each_nonzero(|j, xj| {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi += first.weights[i * first.cols + j] * xj;
            }
        });
        activate(&ws.pre[0], &mut ws.act[0], last == 0);

        for l in 1..=last {
            let layer = &self.layers[l];
            let (prev, cur) = ws.act.split_at_mut(l);
            let input = &prev[l - 1];
            let z = &mut ws.pre[l];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                *zi = layer.biases[i] + dot(row, input);
            }
            activate(&ws.pre[l], &mut cur[0], l == last);
        }
        Ok(&ws.act[last])
    }

    /// Mean squared TD error on the selected actions and its gradient.
    pub fn q_loss_and_grad<I: NetInput<T>>(
        &self,
        inputs: &[I],
        actions: &[usize],
        td_targets: &[T],
    ) -> Result<(T, GradientSet<T>)> {
        let mut grads = GradientSet::zeros_for(self);
        let mut ws = Workspace::default();
        let loss = self.q_loss_and_grad_into(inputs, actions, td_targets, TdLoss::Squared, &mut grads, &mut ws)?;
        Ok((loss, grads))
    }

    /// As [`DenseNet::q_loss_and_grad`], writing into caller-owned buffers.
    /// `grads` is overwritten, not accumulated into.
    pub fn q_loss_and_grad_into<I: NetInput<T>>(
        &self,
        inputs: &[I],
        actions: &[usize],
        td_targets: &[T],
        loss_kind: TdLoss,
        grads: &mut GradientSet<T>,
        ws: &mut Workspace<T>,
    ) -> Result<T> {
        let n = inputs.len();
        if n == 0 {
            return Err(NnError::InvalidConfig("empty batch".into()));
        }
        if actions.len() != n {
            return Err(NnError::Shape { expected: n, got: actions.len() });
        }
        if td_targets.len() != n {
            return Err(NnError::Shape { expected: n, got: td_targets.len() });
        }
        let outputs = self.output_dim();
        if let Some(&bad) = actions.iter().find(|&&a| a >= outputs) {
            return Err(NnError::Index { index: bad, len: outputs });
        }
        if !grads.congruent_with(self) {
            *grads = GradientSet::zeros_for(self);
        } else {
            grads.fill_zero();
        }

        let inv_n = T::one() / T::lit(n as f64);
        let two = T::lit(2.0);
        let mut loss = T::zero();
        for ((x, &a), &y) in inputs.iter().zip(actions).zip(td_targets) {
            let q = self.forward_with(x, ws)?[a];
            let err = y - q;
            let (l, g) = match loss_kind {
                TdLoss::Squared => (err * err, err),
                TdLoss::Clipped => {
                    if err.abs() <= T::one() {
                        (err * err, err)
                    } else {
                        (two * err.abs() - T::one(), err.signum())
                    }
                }
            };
            loss += l * inv_n;
            // dL/dq = -2 g / n
            self.backward(x, a, -two * g * inv_n, grads, ws);
        }
        Ok(loss)
    }

    fn backward<I: NetInput<T> + ?Sized>(&self, x: &I, action: usize, coef: T, grads: &mut GradientSet<T>, ws: &mut Workspace<T>) {
        let last = self.layers.len() - 1;
        for d in ws.delta[last].iter_mut() {
            *d = T::zero();
        }
        ws.delta[last][action] = coef;

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let (lower, upper) = ws.delta.split_at_mut(l);
            let delta = &upper[0];
            for (gb, &d) in g.biases.iter_mut().zip(delta) {
                *gb += d;
            }
            if l == 0 {
                x.for_each_nonzero(|j, xj| {
                    for (i, &d) in delta.iter().enumerate() {
                        g.weights[i * layer.cols + j] += d * xj;
                    }
                });
                break;
            }
            let input = &ws.act[l - 1];
            let below = &mut lower[l - 1];
            for v in below.iter_mut() {
                *v = T::zero();
            }
            for (i, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                let grow = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                for ((gw, &a), (b, &w)) in grow.iter_mut().zip(input).zip(below.iter_mut().zip(row)) {
                    *gw += d * a;
                    *b += d * w;
                }
            }
            for (b, &z) in below.iter_mut().zip(&ws.pre[l - 1]) {
                if z <= T::zero() {
                    *b = T::zero();
                }
            }
        }
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn activate<T: Scalar>(pre: &[T], act: &mut [T], identity: bool) {
    if identity {
        act.copy_from_slice(pre);
    } else {
        for (a, &z) in act.iter_mut().zip(pre) {
            *a = if z > T::zero() { z } else { T::zero() };
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-parameter gradient, shape-congruent with its source network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_for(net: &DenseNet<T>) -> Self {
        Self { layers: zeros_like(&net.dims) }
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.layers
    }

    pub fn congruent_with(&self, net: &DenseNet<T>) -> bool {
        self.layers.len() == net.layers.len() && self.layers.iter().zip(&net.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerParams::all_finite)
    }

    fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v = T::zero());
        }
    }
}

/// Update rule of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum UpdateRule {
    /// `p -= lr * g`.
    Sgd,
    /// `acc = decay * acc + (1 - decay) * g^2; p -= lr * g / sqrt(acc + eps)`.
    RmsProp { decay: f64, eps: f64 },
}

impl Default for UpdateRule {
    /// RMSprop with a small `eps`: mean-reduced TD gradients here are of order
    /// 1e-3, and an `eps` near 1e-2 would swamp the running second moment and
    /// stall learning.
    fn default() -> Self {
        UpdateRule::RmsProp { decay: 0.95, eps: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rule: UpdateRule,
    pub learning_rate: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { rule: UpdateRule::default(), learning_rate: 2.5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    config: OptimizerConfig,
    accumulators: Vec<LayerParams<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig, net: &DenseNet<T>) -> Result<Self> {
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!("learning rate must be positive, got {}", config.learning_rate)));
        }
        if let UpdateRule::RmsProp { decay, eps } = config.rule {
            if !(0.0..1.0).contains(&decay) || eps <= 0.0 {
                return Err(NnError::InvalidConfig(format!("bad RMSprop constants decay={decay} eps={eps}")));
            }
        }
        Ok(Self { config, accumulators: zeros_like(&net.dims) })
    }

    pub fn sgd(learning_rate: f64, net: &DenseNet<T>) -> Result<Self> {
        Self::new(OptimizerConfig { rule: UpdateRule::Sgd, learning_rate }, net)
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn accumulators(&self) -> &[LayerParams<T>] {
        &self.accumulators
    }
}

/// One optimizer step. Gradients containing NaN or infinities are rejected
/// and leave both the network and the optimizer untouched.
pub fn apply_update<T: Scalar>(net: &mut DenseNet<T>, grads: &GradientSet<T>, opt: &mut OptimizerState<T>) -> Result<()> {
    if !grads.congruent_with(net) {
        return Err(NnError::Shape { expected: net.param_count(), got: grads.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum() });
    }
    if opt.accumulators.len() != net.layers.len() || opt.accumulators.iter().zip(&net.layers).any(|(a, b)| !a.same_shape(b)) {
        return Err(NnError::InvalidConfig("optimizer state does not match network".into()));
    }
    if !grads.is_finite() {
        return Err(NnError::Numeric("non-finite gradient".into()));
    }
    let lr = T::lit(opt.config.learning_rate);
    match opt.config.rule {
        UpdateRule::Sgd => {
            for (p, g) in net.layers.iter_mut().zip(&grads.layers) {
                sgd_step(&mut p.weights, &g.weights, lr);
                sgd_step(&mut p.biases, &g.biases, lr);
            }
        }
        UpdateRule::RmsProp { decay, eps } => {
            let (decay, eps) = (T::lit(decay), T::lit(eps));
            for ((p, g), acc) in net.layers.iter_mut().zip(&grads.layers).zip(&mut opt.accumulators) {
                rmsprop_step(&mut p.weights, &g.weights, &mut acc.weights, lr, decay, eps);
                rmsprop_step(&mut p.biases, &g.biases, &mut acc.biases, lr, decay, eps);
            }
        }
    }
    Ok(())
}

fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], lr: T) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

fn rmsprop_step<T: Scalar>(params: &mut [T], grads: &[T], acc: &mut [T], lr: T, decay: T, eps: T) {
    let keep = T::one() - decay;
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *a = decay * *a + keep * g * g;
        *p -= lr * g / (*a + eps).sqrt();
    }
}

/// Deep copy of the online network used as the frozen bootstrap network.
pub fn sync_target<T: Scalar>(online: &DenseNet<T>) -> DenseNet<T> {
    online.clone()
}
