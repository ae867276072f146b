//! Reverse-mode automatic differentiation on a matrix-valued tape.
//!
//! Operations are recorded in topological order during the forward pass;
//! `backward` replays the tape in reverse, accumulating vector-Jacobian
//! products into each node's gradient buffer. Nodes hold whole matrices
//! rather than scalars so MLP training and batched rollouts stay cheap.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

// some payloads (scalar shifts, slice ends) are needed only to build the
// forward value but are kept for Debug output
#[allow(dead_code)]
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar(f64),
    BiasAdd,
    Tanh,
    Relu,
    Gelu,
    Sin,
    Cos,
    Tan,
    Exp,
    Sum,
    SumSq,
    RowSumSq,
    SliceCols { start: usize, end: usize },
    ConcatCols,
    SplitHeads { head_dim: usize },
    Transpose,
    SpdSolve,
    AddScaledIdentity(f64),
}

struct Node {
    op: Op,
    parents: Vec<NodeId>,
    value: DenseMatrix,
    needs_grad: bool,
    /// Cholesky factor cached by `SpdSolve` for reuse in the backward pass.
    aux: Option<DenseMatrix>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by a backward pass.
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    /// Gradient with respect to `id`; zero matrix shape is not materialized
    /// for nodes the loss does not depend on.
    pub fn wrt(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.grads[id.0].as_ref()
    }
}

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!((v.rows(), v.cols()), (1, 1), "node is not scalar");
        v.data()[0]
    }

    fn push(&mut self, op: Op, parents: Vec<NodeId>, value: DenseMatrix) -> NodeId {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node { op, parents, value, needs_grad, aux: None });
        NodeId(self.nodes.len() - 1)
    }

    /// Trainable leaf: gradients flow into it.
    pub fn leaf(&mut self, value: DenseMatrix) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            parents: vec![],
            value,
            needs_grad: true,
            aux: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant leaf: no gradient tracking.
    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            parents: vec![],
            value,
            needs_grad: false,
            aux: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul, vec![a, b], v)
    }

    fn zip(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows(), va.cols()), (vb.rows(), vb.cols()), "shape mismatch");
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let v = DenseMatrix::from_vec(va.rows(), va.cols(), data);
        self.push(op, vec![a, b], v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(Op::Sub, a, b, |x, y| x - y)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(Op::Mul, a, b, |x, y| x * y)
    }

    fn map(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| f(x)).collect();
        let v = DenseMatrix::from_vec(va.rows(), va.cols(), data);
        self.push(op, vec![a], v)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        self.map(Op::Scale(s), a, |x| s * x)
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        self.map(Op::AddScalar(s), a, |x| x + s)
    }

    /// Adds a 1xC bias row to every row of an RxC matrix.
    pub fn bias_add(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(bias));
        assert_eq!(vb.rows(), 1, "bias must be a row vector");
        assert_eq!(va.cols(), vb.cols(), "bias width mismatch");
        let mut v = va.clone();
        let c = v.cols();
        for r in 0..v.rows() {
            for j in 0..c {
                let x = v.get(r, j) + vb.get(0, j);
                v.set(r, j, x);
            }
        }
        self.push(Op::BiasAdd, vec![a, bias], v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Tanh, a, f64::tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Relu, a, |x| x.max(0.0))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Gelu, a, gelu_scalar)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Sin, a, f64::sin)
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Cos, a, f64::cos)
    }

    pub fn tan(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Tan, a, f64::tan)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Exp, a, f64::exp)
    }

    /// Sum of all entries, 1x1 output.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Op::Sum, vec![a], DenseMatrix::from_vec(1, 1, vec![s]))
    }

    /// Sum of squared entries, 1x1 output.
    pub fn sumsq(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().map(|x| x * x).sum();
        self.push(Op::SumSq, vec![a], DenseMatrix::from_vec(1, 1, vec![s]))
    }

    /// Per-row sum of squares: (R,C) -> (R,1).
    pub fn row_sumsq(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let data = (0..va.rows())
            .map(|r| va.row(r).iter().map(|x| x * x).sum())
            .collect();
        let v = DenseMatrix::from_vec(va.rows(), 1, data);
        self.push(Op::RowSumSq, vec![a], v)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let va = self.value(a);
        assert!(start < end && end <= va.cols());
        let mut v = DenseMatrix::zeros(va.rows(), end - start);
        for r in 0..va.rows() {
            for (j, c) in (start..end).enumerate() {
                v.set(r, j, va.get(r, c));
            }
        }
        self.push(Op::SliceCols { start, end }, vec![a], v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = DenseMatrix::zeros(rows, total);
        let mut off = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows(), rows);
            for r in 0..rows {
                for c in 0..vp.cols() {
                    v.set(r, off + c, vp.get(r, c));
                }
            }
            off += vp.cols();
        }
        self.push(Op::ConcatCols, parts.to_vec(), v)
    }

    /// Rearranges a (B, p*m) multi-head output into (B*m, p): row i*m+d,
    /// column j holds head j, output dim d of sample i.
    pub fn split_heads(&mut self, a: NodeId, head_dim: usize) -> NodeId {
        let va = self.value(a);
        assert_eq!(va.cols() % head_dim, 0);
        let p = va.cols() / head_dim;
        let b = va.rows();
        let mut v = DenseMatrix::zeros(b * head_dim, p);
        for i in 0..b {
            for j in 0..p {
                for d in 0..head_dim {
                    v.set(i * head_dim + d, j, va.get(i, j * head_dim + d));
                }
            }
        }
        self.push(Op::SplitHeads { head_dim }, vec![a], v)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose, vec![a], v)
    }

    /// `A + s * I` for square `A`.
    pub fn add_scaled_identity(&mut self, a: NodeId, s: f64) -> NodeId {
        let va = self.value(a);
        assert_eq!(va.rows(), va.cols());
        let mut v = va.clone();
        for i in 0..v.rows() {
            let x = v.get(i, i) + s;
            v.set(i, i, x);
        }
        self.push(Op::AddScaledIdentity(s), vec![a], v)
    }

    /// Differentiable SPD solve `X = A^{-1} B`; the Cholesky factor is kept
    /// for the backward pass.
    pub fn spd_solve(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let l = cholesky(self.value(a))?;
        let x = cholesky_solve(&l, self.value(b));
        let id = self.push(Op::SpdSolve, vec![a, b], x);
        self.nodes[id.0].aux = Some(l);
        Ok(id)
    }

    /// Reverse-mode sweep seeded with d(loss)/d(loss) = 1 on a scalar node.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        let lv = self.value(loss);
        assert_eq!((lv.rows(), lv.cols()), (1, 1), "backward expects a scalar loss");
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseMatrix::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate_parents(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate_parents(&self, idx: usize, g: &DenseMatrix, grads: &mut [Option<DenseMatrix>]) {
        let node = &self.nodes[idx];
        let parent_val = |i: usize| &self.nodes[node.parents[i].0].value;
        let mut add_to = |i: usize, delta: DenseMatrix| {
            let pid = node.parents[i].0;
            if !self.nodes[pid].needs_grad {
                return;
            }
            match &mut grads[pid] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot => *slot = Some(delta),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul => {
                let (a, b) = (parent_val(0), parent_val(1));
                add_to(0, g.matmul(&b.transpose()));
                add_to(1, a.transpose().matmul(g));
            }
            Op::Add => {
                add_to(0, g.clone());
                add_to(1, g.clone());
            }
            Op::Sub => {
                add_to(0, g.clone());
                let mut neg = g.clone();
                for v in neg.data_mut() {
                    *v = -*v;
                }
                add_to(1, neg);
            }
            Op::Mul => {
                let (a, b) = (parent_val(0), parent_val(1));
                let da = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(b.data()).map(|(&gi, &bi)| gi * bi).collect(),
                );
                let db = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(a.data()).map(|(&gi, &ai)| gi * ai).collect(),
                );
                add_to(0, da);
                add_to(1, db);
            }
            Op::Scale(s) => {
                let mut d = g.clone();
                for v in d.data_mut() {
                    *v *= s;
                }
                add_to(0, d);
            }
            Op::AddScalar(_) => add_to(0, g.clone()),
            Op::BiasAdd => {
                add_to(0, g.clone());
                let mut db = DenseMatrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        let v = db.get(0, c) + g.get(r, c);
                        db.set(0, c, v);
                    }
                }
                add_to(1, db);
            }
            Op::Tanh => {
                let y = &node.value;
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(y.data()).map(|(&gi, &yi)| gi * (1.0 - yi * yi)).collect(),
                );
                add_to(0, d);
            }
            Op::Relu => {
                let x = parent_val(0);
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                        .collect(),
                );
                add_to(0, d);
            }
            Op::Gelu => {
                let x = parent_val(0);
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(x.data()).map(|(&gi, &xi)| gi * gelu_deriv(xi)).collect(),
                );
                add_to(0, d);
            }
            Op::Sin => {
                let x = parent_val(0);
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(x.data()).map(|(&gi, &xi)| gi * xi.cos()).collect(),
                );
                add_to(0, d);
            }
            Op::Cos => {
                let x = parent_val(0);
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(x.data()).map(|(&gi, &xi)| -gi * xi.sin()).collect(),
                );
                add_to(0, d);
            }
            Op::Tan => {
                let y = &node.value;
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(y.data()).map(|(&gi, &yi)| gi * (1.0 + yi * yi)).collect(),
                );
                add_to(0, d);
            }
            Op::Exp => {
                let y = &node.value;
                let d = DenseMatrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(y.data()).map(|(&gi, &yi)| gi * yi).collect(),
                );
                add_to(0, d);
            }
            Op::Sum => {
                let x = parent_val(0);
                let s = g.data()[0];
                add_to(0, DenseMatrix::from_vec(x.rows(), x.cols(), vec![s; x.rows() * x.cols()]));
            }
            Op::SumSq => {
                let x = parent_val(0);
                let s = g.data()[0];
                let d = DenseMatrix::from_vec(
                    x.rows(),
                    x.cols(),
                    x.data().iter().map(|&xi| 2.0 * s * xi).collect(),
                );
                add_to(0, d);
            }
            Op::RowSumSq => {
                let x = parent_val(0);
                let mut d = DenseMatrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let gr = g.get(r, 0);
                    for c in 0..x.cols() {
                        d.set(r, c, 2.0 * gr * x.get(r, c));
                    }
                }
                add_to(0, d);
            }
            Op::SliceCols { start, .. } => {
                let x = parent_val(0);
                let mut d = DenseMatrix::zeros(x.rows(), x.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        d.set(r, start + c, g.get(r, c));
                    }
                }
                add_to(0, d);
            }
            Op::ConcatCols => {
                let mut off = 0;
                for i in 0..node.parents.len() {
                    let p = parent_val(i);
                    let mut d = DenseMatrix::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        for c in 0..p.cols() {
                            d.set(r, c, g.get(r, off + c));
                        }
                    }
                    off += p.cols();
                    add_to(i, d);
                }
            }
            Op::SplitHeads { head_dim } => {
                let x = parent_val(0);
                let p = x.cols() / head_dim;
                let mut d = DenseMatrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    for j in 0..p {
                        for dd in 0..*head_dim {
                            d.set(i, j * head_dim + dd, g.get(i * head_dim + dd, j));
                        }
                    }
                }
                add_to(0, d);
            }
            Op::Transpose => add_to(0, g.transpose()),
            Op::SpdSolve => {
                // X = A^{-1} B with A symmetric: dB = A^{-1} g, dA = -dB X^T
                let l = node.aux.as_ref().expect("SpdSolve factor missing");
                let db = cholesky_solve(l, g);
                let xt = node.value.transpose();
                let mut da = db.matmul(&xt);
                for v in da.data_mut() {
                    *v = -*v;
                }
                add_to(0, da);
                add_to(1, db);
            }
            Op::AddScaledIdentity(_) => add_to(0, g.clone()),
        }
    }

    /// Flat gradient over the given trainable leaves, concatenated in order.
    /// Leaves the loss does not touch contribute zeros.
    pub fn grad_vector(&self, loss: NodeId, leaves: &[NodeId]) -> Vec<f64> {
        let grads = self.backward(loss);
        let mut out = Vec::new();
        for &leaf in leaves {
            let v = self.value(leaf);
            match grads.wrt(leaf) {
                Some(g) => out.extend_from_slice(g.data()),
                None => out.extend(std::iter::repeat(0.0).take(v.rows() * v.cols())),
            }
        }
        out
    }

    /// Validates dimensions for an externally supplied input vector.
    pub fn check_input_len(expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::ShapeMismatch {
                expected: expected.to_string(),
                got: got.to_string(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(DenseMatrix::from_vec(1, 1, vec![5.0]));
        let loss = tape.scale(w, 3.0);
        let g = tape.grad_vector(loss, &[w]);
        assert_eq!(g, vec![3.0]);
    }

    #[test]
    fn quadratic_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(DenseMatrix::from_vec(1, 1, vec![2.0]));
        let loss = tape.sumsq(w);
        let g = tape.grad_vector(loss, &[w]);
        assert_eq!(g, vec![4.0]);
    }

    /// Builds a scalar loss from a small random computation graph mixing most
    /// primitive ops, as a closure over a flat parameter vector.
    fn mixed_loss(theta: &[f64]) -> (f64, Vec<f64>) {
        let mut tape = Tape::new();
        let w1 = tape.leaf(DenseMatrix::from_vec(2, 3, theta[0..6].to_vec()));
        let b1 = tape.leaf(DenseMatrix::from_vec(1, 3, theta[6..9].to_vec()));
        let w2 = tape.leaf(DenseMatrix::from_vec(3, 2, theta[9..15].to_vec()));
        let x = tape.constant(DenseMatrix::from_vec(4, 2, vec![
            0.3, -0.1, 0.7, 0.2, -0.5, 0.9, 0.1, 0.4,
        ]));
        let h = tape.matmul(x, w1);
        let h = tape.bias_add(h, b1);
        let h = tape.tanh(h);
        let s = tape.sin(h);
        let c = tape.cos(h);
        let sc = tape.mul(s, c);
        let e = tape.scale(sc, 0.1);
        let e = tape.exp(e);
        let y = tape.matmul(e, w2);
        let g1 = tape.gelu(y);
        let parts = tape.slice_cols(g1, 0, 1);
        let parts2 = tape.slice_cols(g1, 1, 2);
        let joined = tape.concat_cols(&[parts, parts2]);
        let rs = tape.row_sumsq(joined);
        let loss = tape.sum(rs);
        let grad = tape.grad_vector(loss, &[w1, b1, w2]);
        (tape.scalar(loss), grad)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..15).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let (_, grad) = mixed_loss(&theta);
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            tp[i] += h;
            let (fp, _) = mixed_loss(&tp);
            tp[i] -= 2.0 * h;
            let (fm, _) = mixed_loss(&tp);
            let fd = (fp - fm) / (2.0 * h);
            let denom = fd.abs().max(1e-8);
            assert!(
                (grad[i] - fd).abs() / denom < 1e-6,
                "coord {i}: ad {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn spd_solve_gradient_matches_finite_differences() {
        let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
            let mut tape = Tape::new();
            let m = tape.leaf(DenseMatrix::from_vec(3, 3, theta[0..9].to_vec()));
            let b = tape.leaf(DenseMatrix::from_vec(3, 1, theta[9..12].to_vec()));
            let mt = tape.transpose(m);
            let a = tape.matmul(mt, m);
            let a = tape.add_scaled_identity(a, 0.5);
            let x = tape.spd_solve(a, b).unwrap();
            let loss = tape.sumsq(x);
            let grad = tape.grad_vector(loss, &[m, b]);
            (tape.scalar(loss), grad)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = eval(&theta);
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            tp[i] += h;
            let (fp, _) = eval(&tp);
            tp[i] -= 2.0 * h;
            let (fm, _) = eval(&tp);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() / fd.abs().max(1e-6) < 1e-5,
                "coord {i}: ad {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn split_heads_is_a_permutation() {
        let mut tape = Tape::new();
        let a = tape.leaf(DenseMatrix::from_vec(2, 6, (0..12).map(|v| v as f64).collect()));
        let s = tape.split_heads(a, 2); // p = 3 heads of dim 2
        let v = tape.value(s);
        assert_eq!((v.rows(), v.cols()), (4, 3));
        // sample 0, head 1, dim 0 lives at input (0, 2) = 2.0
        assert_eq!(v.get(0, 1), 2.0);
        // sample 1, head 2, dim 1 lives at input (1, 5) = 11.0
        assert_eq!(v.get(3, 2), 11.0);
    }
}
