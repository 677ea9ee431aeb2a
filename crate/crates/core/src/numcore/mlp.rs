//! Multilayer perceptrons over the tape, plus a tape-free forward path for
//! rollouts and target computations where no gradients are needed.

use std::cell::RefCell;

use rand::Rng;

use super::kernels;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;

thread_local! {
    static SCRATCH: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// Exact-size buffer reuse for the tape-free forward path. Contents are
/// unspecified; every byte is overwritten before use.
fn scratch_take(len: usize) -> Vec<f64> {
    SCRATCH.with(|pool| {
        let mut pool = pool.borrow_mut();
        for i in (0..pool.len()).rev() {
            if pool[i].capacity() == len {
                let mut buf = pool.swap_remove(i);
                buf.resize(len, 0.0);
                return buf;
            }
        }
        vec![0.0; len]
    })
}

fn scratch_give(buf: Vec<f64>) {
    SCRATCH.with(|pool| {
        let mut pool = pool.borrow_mut();
        if pool.len() < 64 {
            pool.push(buf);
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone)]
struct DenseLayer {
    /// [out, in] row-major.
    weight: Tensor,
    /// [out].
    bias: Tensor,
}

/// Feed-forward network: linear layers with `activation` on every hidden
/// layer and an identity output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    activation: Activation,
    layers: Vec<DenseLayer>,
}

/// Tape nodes for one network's parameters, created by [`Mlp::bind`].
///
/// A binding may drive any number of forward passes on the same tape; all of
/// them share the same parameter leaves, so gradients pool correctly.
pub struct MlpBinding {
    weights: Vec<NodeId>,
    biases: Vec<NodeId>,
    trainable: bool,
}

impl MlpBinding {
    pub fn weight_node(&self, layer: usize) -> NodeId {
        self.weights[layer]
    }
}

impl Mlp {
    /// Uniform fan-in initialization, deterministic under the provided rng.
    pub fn new<R: Rng>(layer_dims: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(layer_dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::with_capacity(layer_dims.len() - 1);
        for win in layer_dims.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_out * fan_in)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            layers.push(DenseLayer {
                weight: Tensor::from_vec(&[fan_out, fan_in], w),
                bias: Tensor::from_vec(&[fan_out], b),
            });
        }
        Mlp {
            layer_dims: layer_dims.to_vec(),
            activation,
            layers,
        }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.numel() + l.bias.numel())
            .sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for t in self.params_mut() {
            t.zero_grad();
        }
    }

    /// Tape-free batched forward: `x` is `[rows, input_dim]` flattened.
    ///
    /// Intermediate buffers come from a per-thread scratch pool; only the
    /// returned output is freshly owned by the caller.
    pub fn forward_plain(&self, x: &[f64], rows: usize) -> Vec<f64> {
        assert_eq!(
            x.len(),
            rows * self.input_dim(),
            "forward: input length {} != rows {} x input dim {}",
            x.len(),
            rows,
            self.input_dim()
        );
        let mut cur = scratch_take(x.len());
        cur.copy_from_slice(x);
        let mut cur_dim = self.input_dim();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let out_dim = layer.bias.numel();
            let mut w_t = scratch_take(out_dim * cur_dim);
            kernels::transpose(layer.weight.data(), out_dim, cur_dim, &mut w_t);
            let mut next = scratch_take(rows * out_dim);
            for r in 0..rows {
                next[r * out_dim..(r + 1) * out_dim].copy_from_slice(layer.bias.data());
            }
            kernels::matmul_acc(&cur, &w_t, &mut next, rows, cur_dim, out_dim);
            scratch_give(w_t);
            if li != last {
                match self.activation {
                    Activation::Tanh => kernels::tanh_slice(&mut next),
                    Activation::Relu => kernels::relu_slice(&mut next),
                }
            }
            scratch_give(cur);
            cur = next;
            cur_dim = out_dim;
        }
        cur
    }

    /// Single-input convenience wrapper around [`Mlp::forward_plain`].
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        self.forward_plain(x, 1)
    }

    /// Registers parameter leaves on the tape. `trainable = false` binds the
    /// parameters as constants: no gradients are computed for them, but
    /// gradients still flow through them to earlier inputs.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> MlpBinding {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, inp) = (layer.weight.shape()[0], layer.weight.shape()[1]);
            let (w, b) = if trainable {
                (
                    tape.leaf(out, inp, layer.weight.data()),
                    tape.leaf(1, out, layer.bias.data()),
                )
            } else {
                (
                    tape.constant(out, inp, layer.weight.data()),
                    tape.constant(1, out, layer.bias.data()),
                )
            };
            weights.push(w);
            biases.push(b);
        }
        MlpBinding {
            weights,
            biases,
            trainable,
        }
    }

    /// Forward pass through bound parameters; records the graph for backward.
    pub fn forward_bound(&self, tape: &mut Tape, binding: &MlpBinding, x: NodeId) -> NodeId {
        assert_eq!(
            tape.cols(x),
            self.input_dim(),
            "forward: input node dim mismatch"
        );
        let mut cur = x;
        let last = self.layers.len() - 1;
        for li in 0..self.layers.len() {
            cur = tape.linear(cur, binding.weights[li], binding.biases[li]);
            if li != last {
                cur = match self.activation {
                    Activation::Tanh => tape.tanh(cur),
                    Activation::Relu => tape.relu(cur),
                };
            }
        }
        cur
    }

    /// Pulls gradients off the tape into the parameter tensors (additive).
    pub fn absorb_grads(&mut self, tape: &Tape, binding: &MlpBinding) {
        assert!(binding.trainable, "absorb_grads on a frozen binding");
        for (li, layer) in self.layers.iter_mut().enumerate() {
            let gw = tape.grad(binding.weights[li]);
            if !gw.is_empty() {
                layer.weight.accumulate_grad(gw);
            }
            let gb = tape.grad(binding.biases[li]);
            if !gb.is_empty() {
                layer.bias.accumulate_grad(gb);
            }
        }
    }

    /// Polyak step toward `online`: self = tau * online + (1 - tau) * self.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.layer_dims, online.layer_dims, "architecture mismatch");
        for (dst, src) in self.layers.iter_mut().zip(online.layers.iter()) {
            for (d, s) in dst
                .weight
                .data_mut()
                .iter_mut()
                .zip(src.weight.data().iter())
            {
                *d = tau * s + (1.0 - tau) * *d;
            }
            for (d, s) in dst.bias.data_mut().iter_mut().zip(src.bias.data().iter()) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
    }

    /// Named parameter tensors for checkpointing, prefixed with `prefix`.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.l{li}.w"), &layer.weight));
            out.push((format!("{prefix}.l{li}.b"), &layer.bias));
        }
        out
    }

    pub fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (li, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}.l{li}.w"), &mut layer.weight));
            out.push((format!("{prefix}.l{li}.b"), &mut layer.bias));
        }
        out
    }
}
