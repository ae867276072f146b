//! Multi-head MLP: a shared trunk whose final linear layer is split into
//! `head_count` heads of `head_dim` outputs each.

use crate::autodiff::{gelu_scalar, NodeId, Tape};
use crate::error::Result;
use crate::linalg::DenseMatrix;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Gelu,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Gelu => gelu_scalar(x),
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Gelu => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Activation> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

/// One linear layer: `y = x W + b` with `W` stored (in, out) row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub head_count: usize,
    pub head_dim: usize,
}

impl MlpParams {
    /// Glorot-uniform initialization, biases at zero. The final layer emits
    /// `head_count * head_dim` values that are split into heads at evaluation.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        head_count: usize,
        head_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(head_count * head_dim);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = DenseMatrix::from_vec(
                    fan_in,
                    fan_out,
                    (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect(),
                );
                Layer { weight, bias: vec![0.0; fan_out] }
            })
            .collect();
        MlpParams { layers, activation, head_count, head_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    /// Flattens all weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Writes a flat parameter vector back into the layer structure.
    pub fn unflatten_into(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let wn = l.weight.rows() * l.weight.cols();
            l.weight.data_mut().copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
    }

    /// Evaluates all heads at one input, returning a head_count x head_dim
    /// matrix whose row j is head j's output.
    pub fn forward(&self, input: &[f64]) -> Result<DenseMatrix> {
        Tape::check_input_len(self.input_dim(), input.len())?;
        let mut h = input.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let w = &layer.weight;
            let mut out = layer.bias.clone();
            for (i, &hi) in h.iter().enumerate() {
                if hi == 0.0 {
                    continue;
                }
                let wrow = w.row(i);
                for (o, &wij) in out.iter_mut().zip(wrow) {
                    *o += hi * wij;
                }
            }
            if li != last {
                for v in &mut out {
                    *v = self.activation.apply(*v);
                }
            }
            h = out;
        }
        Ok(DenseMatrix::from_vec(self.head_count, self.head_dim, h))
    }

    /// Registers one trainable leaf per weight and bias, in flatten() order.
    pub fn tape_leaves(&self, tape: &mut Tape) -> Vec<NodeId> {
        let mut leaves = Vec::with_capacity(2 * self.layers.len());
        for layer in &self.layers {
            leaves.push(tape.leaf(layer.weight.clone()));
            leaves.push(tape.leaf(DenseMatrix::from_vec(
                1,
                layer.bias.len(),
                layer.bias.clone(),
            )));
        }
        leaves
    }

    /// Records the trunk using existing parameter leaves, so several batches
    /// can share one parameter set on the same tape. `input` is (B, input_dim);
    /// the result is (B, head_count*head_dim).
    pub fn forward_with_leaves(&self, tape: &mut Tape, input: NodeId, leaves: &[NodeId]) -> NodeId {
        assert_eq!(leaves.len(), 2 * self.layers.len());
        let mut h = input;
        let last = self.layers.len() - 1;
        for (li, _) in self.layers.iter().enumerate() {
            h = tape.matmul(h, leaves[2 * li]);
            h = tape.bias_add(h, leaves[2 * li + 1]);
            if li != last {
                h = match self.activation {
                    Activation::Tanh => tape.tanh(h),
                    Activation::Relu => tape.relu(h),
                    Activation::Gelu => tape.gelu(h),
                };
            }
        }
        h
    }

    /// Convenience: fresh leaves plus one recorded forward pass.
    pub fn forward_tape(&self, tape: &mut Tape, input: NodeId) -> (NodeId, Vec<NodeId>) {
        let leaves = self.tape_leaves(tape);
        let out = self.forward_with_leaves(tape, input, &leaves);
        (out, leaves)
    }
}
