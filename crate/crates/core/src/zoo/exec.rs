use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{LayerKind, NetworkGraph};
use super::params::ParameterSet;
use crate::active::ProbabilityMatrix;
use crate::engine::{
    adam_step, batchnorm_backward, batchnorm_forward, concatenate, concatenate_backward, conv2d_backward,
    conv2d_forward, cross_entropy, dense_backward, dense_forward, dropout_backward, dropout_forward, flatten,
    global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward, relu, relu_backward, residual_add,
    softmax, softmax_cross_entropy_backward, AdamState, BatchNormCache, DropoutMask, Mode, ParamMap, PoolIndices,
    RunningStats,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

#[derive(Debug, Clone)]
enum Cache<T> {
    Empty,
    BatchNorm(BatchNormCache<T>),
    Pool(PoolIndices),
    Dropout(DropoutMask<T>),
}

/// Every intermediate of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    activations: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
    running: Vec<(String, RunningStats<T>)>,
}

impl<T: Scalar> ForwardPass<T> {
    /// `N x K` softmax output.
    pub fn probabilities(&self) -> &Tensor<T> {
        self.activations.last().expect("graph has an output node")
    }

    pub fn activation(&self, node: usize) -> &Tensor<T> {
        &self.activations[node]
    }

    /// `(dropped, total)` unit counts across all dropout layers.
    pub fn dropout_counts(&self) -> (usize, usize) {
        self.caches
            .iter()
            .zip(&self.activations)
            .filter_map(|(c, a)| match c {
                Cache::Dropout(m) => Some((m.dropped(), a.len())),
                _ => None,
            })
            .fold((0, 0), |(d, t), (dd, tt)| (d + dd, t + tt))
    }
}

fn check_batch<T: Scalar>(graph: &NetworkGraph, batch: &Tensor<T>) -> Result<()> {
    let [h, w, c] = graph.input_shape();
    match *batch.shape() {
        [_, bh, bw, bc] if (bh, bw, bc) == (h, w, c) => Ok(()),
        _ => Err(Error::shape(
            "forward",
            format!("batch {:?} does not match N x {h} x {w} x {c}", batch.shape()),
        )),
    }
}

/// Runs the graph over an `N x H x W x C` batch. `rng` drives dropout and is
/// only consulted in [`Mode::Train`].
pub fn forward<T: Scalar, R: Rng + ?Sized>(
    graph: &NetworkGraph,
    params: &ParameterSet<T>,
    batch: &Tensor<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardPass<T>> {
    check_batch(graph, batch)?;
    let nodes = graph.nodes();
    let mut activations: Vec<Tensor<T>> = Vec::with_capacity(nodes.len());
    let mut caches = Vec::with_capacity(nodes.len());
    let mut running = Vec::new();
    for node in nodes {
        let input = |i: usize| &activations[node.inputs[i]];
        let param = |suffix: &str| params.get(&format!("{}.{}", node.name, suffix));
        let (out, cache) = match node.kind {
            LayerKind::Input => (batch.clone(), Cache::Empty),
            LayerKind::Conv { padding, .. } => (
                conv2d_forward(input(0), param("weight")?, param("bias")?, padding)?,
                Cache::Empty,
            ),
            LayerKind::BatchNorm => {
                let mut stats = RunningStats {
                    mean: param("running_mean")?.clone(),
                    var: param("running_var")?.clone(),
                };
                let (y, c) = batchnorm_forward(input(0), param("gamma")?, param("beta")?, &mut stats, mode)?;
                if mode == Mode::Train {
                    running.push((node.name.clone(), stats));
                }
                (y, Cache::BatchNorm(c))
            }
            LayerKind::Relu => (relu(input(0)), Cache::Empty),
            LayerKind::MaxPool { window } => {
                let (y, idx) = maxpool2d(input(0), window)?;
                (y, Cache::Pool(idx))
            }
            LayerKind::GlobalAvgPool => (global_avg_pool(input(0))?, Cache::Empty),
            LayerKind::Concat => {
                let parts: Vec<&Tensor<T>> = node.inputs.iter().map(|&i| &activations[i]).collect();
                let axis = parts[0].rank() - 1;
                (concatenate(&parts, axis)?, Cache::Empty)
            }
            LayerKind::Add => {
                let mut acc = input(0).clone();
                for i in 1..node.inputs.len() {
                    acc = residual_add(&acc, input(i))?;
                }
                (acc, Cache::Empty)
            }
            LayerKind::Dropout { rate } => match mode {
                Mode::Train => {
                    let (y, mask) = dropout_forward(input(0), rate, rng)?;
                    (y, Cache::Dropout(mask))
                }
                Mode::Infer => (input(0).clone(), Cache::Empty),
            },
            LayerKind::Flatten => (flatten(input(0))?, Cache::Empty),
            LayerKind::Dense { .. } => (dense_forward(input(0), param("weight")?, param("bias")?)?, Cache::Empty),
            LayerKind::Softmax => (softmax(input(0))?, Cache::Empty),
        };
        debug_assert!(out.all_finite(), "{} produced a non-finite value", node.name);
        activations.push(out);
        caches.push(cache);
    }
    Ok(ForwardPass {
        activations,
        caches,
        running,
    })
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, grad: Tensor<T>) -> Result<()> {
    match slot {
        Some(existing) => *existing = residual_add(existing, &grad)?,
        None => *slot = Some(grad),
    }
    Ok(())
}

/// Gradients of the mean cross-entropy against `labels` for every trainable
/// parameter, keyed by full parameter name.
pub fn backward<T: Scalar>(
    graph: &NetworkGraph,
    params: &ParameterSet<T>,
    pass: &ForwardPass<T>,
    labels: &[usize],
) -> Result<ParamMap<T>> {
    let nodes = graph.nodes();
    let out = graph.output();
    let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
    let logits = nodes[out].inputs[0];
    grads[logits] = Some(softmax_cross_entropy_backward(pass.probabilities(), labels)?);

    let mut param_grads = ParamMap::new();
    for id in (1..out).rev() {
        let Some(g) = grads[id].take() else { continue };
        let node = &nodes[id];
        let x = |i: usize| &pass.activations[node.inputs[i]];
        let param = |suffix: &str| params.get(&format!("{}.{}", node.name, suffix));
        let mut routed: Vec<Tensor<T>> = Vec::with_capacity(node.inputs.len());
        match (&node.kind, &pass.caches[id]) {
            (LayerKind::Conv { padding, .. }, _) => {
                let lg = conv2d_backward(x(0), param("weight")?, &g, *padding)?;
                for (k, v) in lg.parameter_grads {
                    param_grads.insert(format!("{}.{}", node.name, k), v);
                }
                routed.push(lg.input_grad);
            }
            (LayerKind::BatchNorm, Cache::BatchNorm(cache)) => {
                let lg = batchnorm_backward(param("gamma")?, cache, &g)?;
                for (k, v) in lg.parameter_grads {
                    param_grads.insert(format!("{}.{}", node.name, k), v);
                }
                routed.push(lg.input_grad);
            }
            (LayerKind::Dense { .. }, _) => {
                let lg = dense_backward(x(0), param("weight")?, &g)?;
                for (k, v) in lg.parameter_grads {
                    param_grads.insert(format!("{}.{}", node.name, k), v);
                }
                routed.push(lg.input_grad);
            }
            (LayerKind::Relu, _) => routed.push(relu_backward(x(0), &g)?),
            (LayerKind::MaxPool { .. }, Cache::Pool(idx)) => routed.push(maxpool2d_backward(idx, &g)?),
            (LayerKind::GlobalAvgPool, _) => routed.push(global_avg_pool_backward(x(0).shape(), &g)?),
            (LayerKind::Concat, _) => {
                let axis = g.rank() - 1;
                let sizes: Vec<usize> = node.inputs.iter().map(|&i| pass.activations[i].shape()[axis]).collect();
                routed = concatenate_backward(&g, &sizes, axis)?;
            }
            (LayerKind::Add, _) => routed = vec![g; node.inputs.len()],
            (LayerKind::Dropout { .. }, Cache::Dropout(mask)) => routed.push(dropout_backward(mask, &g)?),
            (LayerKind::Dropout { .. }, _) => routed.push(g),
            (LayerKind::Flatten, _) => routed.push(g.reshape(x(0).shape().to_vec())?),
            (kind, _) => {
                return Err(Error::shape("backward", format!("{}: no backward rule for {kind:?}", node.name)));
            }
        }
        for (&input, grad) in node.inputs.iter().zip(routed) {
            if input != 0 {
                accumulate(&mut grads[input], grad)?;
            }
        }
    }
    Ok(param_grads)
}

/// Inference-mode class probabilities for every patch of an `N x H x W x C` batch.
/// Rows carry instance ids `0..N`.
pub fn forward_batch<T: Scalar>(
    graph: &NetworkGraph,
    params: &ParameterSet<T>,
    batch: &Tensor<T>,
) -> Result<ProbabilityMatrix<T>> {
    // Infer mode never draws from the generator.
    let pass = forward(graph, params, batch, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(0))?;
    let probs = pass.activations.into_iter().last().expect("graph has an output node");
    let n = probs.shape()[0];
    ProbabilityMatrix::new(probs, (0..n).collect())
}

/// Like [`forward_batch`] but evaluated in fixed-size chunks to bound memory.
pub fn predict_chunked<T: Scalar>(
    graph: &NetworkGraph,
    params: &ParameterSet<T>,
    patches: &Tensor<T>,
    chunk: usize,
) -> Result<ProbabilityMatrix<T>> {
    check_batch(graph, patches)?;
    let n = patches.shape()[0];
    let k = graph.class_count();
    let mut values = Vec::with_capacity(n * k);
    let chunk = chunk.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let rows: Vec<usize> = (start..end).collect();
        let part = forward_batch(graph, params, &patches.gather_rows(&rows))?;
        values.extend_from_slice(part.values().data());
        start = end;
    }
    ProbabilityMatrix::new(Tensor::new(vec![n, k], values)?, (0..n).collect())
}

/// One forward, backward, and Adam update over a mini-batch. Returns the
/// mean cross-entropy of the batch before the update. BN running statistics
/// are refreshed from the batch.
pub fn train_step<T: Scalar, R: Rng + ?Sized>(
    graph: &NetworkGraph,
    params: &mut ParameterSet<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    adam: &mut AdamState<T>,
    rng: &mut R,
) -> Result<T> {
    let k = graph.class_count();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} outside [0, {k})")));
    }
    let pass = forward(graph, params, batch, Mode::Train, rng)?;
    let probs = pass.probabilities();
    if labels.len() != probs.shape()[0] {
        return Err(Error::shape("train_step", format!("{} labels for {} patches", labels.len(), probs.shape()[0])));
    }
    let mut loss = T::zero();
    for (row, &label) in probs.data().chunks_exact(k).zip(labels) {
        loss += cross_entropy(row, label)?;
    }
    loss /= T::from_usize_lossy(labels.len().max(1));

    let grads = backward(graph, params, &pass, labels)?;
    adam_step(&mut params.entries, &grads, adam)?;
    for (name, stats) in pass.running {
        params.entries.insert(format!("{name}.running_mean"), stats.mean);
        params.entries.insert(format!("{name}.running_var"), stats.var);
    }
    Ok(loss)
}
