use crate::error::{Error, Result};
use crate::scalar::Real;

use super::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Batch-norm / network mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
}

#[derive(Debug)]
pub(crate) enum Op<R> {
    Leaf,
    Linear { x: NodeId, w: NodeId, b: NodeId },
    Relu { x: NodeId },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<R>,
        inv_std: Vec<R>,
        batch_stats: bool,
    },
    MaxPool { x: NodeId, argmax: Vec<usize> },
    Conv2d { x: NodeId, k: NodeId, geom: ConvGeom },
    BiasAdd { x: NodeId, b: NodeId },
    Reshape { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    MulConst { x: NodeId, c: Vec<R> },
    Scale { x: NodeId, s: R },
    Square { x: NodeId },
    Abs { x: NodeId },
    Softplus { x: NodeId },
    SliceCols { x: NodeId, start: usize, len: usize },
    Sum { x: NodeId },
    Chamfer {
        a: NodeId,
        b: NodeId,
        batch: usize,
        nn_ab: Vec<usize>,
        nn_ba: Vec<usize>,
    },
}

pub(crate) struct Node<R> {
    pub op: Op<R>,
    pub value: Tensor<R>,
}

/// Append-only computation graph for reverse-mode differentiation.
///
/// Nodes are created in topological order; [`Graph::backward`] walks them in
/// strict reverse order. Leaf gradients accumulate across `backward` calls
/// until [`Graph::zero_grad`]; interior gradients are recomputed each call.
pub struct Graph<R = f64> {
    pub(crate) nodes: Vec<Node<R>>,
}

impl<R: Real> Default for Graph<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Graph<R> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf holding `tensor`; its `requires_grad` flag is kept.
    pub fn leaf(&mut self, tensor: Tensor<R>) -> NodeId {
        self.push(Op::Leaf, tensor)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor<R>) -> NodeId {
        self.push(Op::Leaf, tensor.with_grad(false))
    }

    /// Trainable leaf.
    pub fn variable(&mut self, tensor: Tensor<R>) -> NodeId {
        self.push(Op::Leaf, tensor.with_grad(true))
    }

    pub fn tensor(&self, id: NodeId) -> &Tensor<R> {
        &self.nodes[id.0].value
    }

    pub fn value(&self, id: NodeId) -> &[R] {
        self.nodes[id.0].value.values()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn grad(&self, id: NodeId) -> &[R] {
        self.nodes[id.0].value.grad()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].op, Op::Leaf)
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    pub(crate) fn push(&mut self, op: Op<R>, mut value: Tensor<R>) -> NodeId {
        if !matches!(op, Op::Leaf) {
            let rg = op_inputs(&op).iter().any(|i| self.nodes[i.0].value.requires_grad());
            value.set_requires_grad(rg);
        }
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Propagates d(loss)/d(node) to every node the loss depends on.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lt = &self.nodes[loss.0].value;
        if lt.len() != 1 {
            return Err(Error::invalid(format!(
                "backward requires a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        for n in self.nodes[..=loss.0].iter_mut() {
            if !matches!(n.op, Op::Leaf) {
                n.value.reset_grad_storage();
            }
        }
        if !self.nodes[loss.0].value.requires_grad() {
            return Ok(());
        }
        self.nodes[loss.0].value.grad_mut()[0] += R::one();
        for i in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            if matches!(node.op, Op::Leaf) || !node.value.requires_grad() {
                continue;
            }
            let g = node.value.take_grad();
            super::ops::backprop(&node.op, &node.value, &g, before);
            node.value.put_grad(g);
        }
        Ok(())
    }

    /// Fingerprint of every discrete choice made in the forward pass: ReLU
    /// and `abs` input signs, max-pool winners and Chamfer correspondences.
    /// Two evaluations with equal signatures lie on the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for n in &self.nodes {
            match &n.op {
                Op::Relu { x } | Op::Abs { x } => {
                    for &v in self.nodes[x.0].value.values() {
                        (v > R::zero(), v < R::zero()).hash(&mut h);
                    }
                }
                Op::MaxPool { argmax, .. } => argmax.hash(&mut h),
                Op::Chamfer { nn_ab, nn_ba, .. } => {
                    nn_ab.hash(&mut h);
                    nn_ba.hash(&mut h);
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Index of the first node holding a non-finite value or gradient.
    pub fn check_finite(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(j) = n.value.first_non_finite() {
                return Err(Error::NonFinite {
                    context: format!("graph node {i}"),
                    index: j,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn op_inputs<R>(op: &Op<R>) -> Vec<NodeId> {
    match op {
        Op::Leaf => vec![],
        Op::Linear { x, w, b } => vec![*x, *w, *b],
        Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        Op::Conv2d { x, k, .. } => vec![*x, *k],
        Op::BiasAdd { x, b } => vec![*x, *b],
        Op::Add { a, b } | Op::Sub { a, b } | Op::Chamfer { a, b, .. } => vec![*a, *b],
        Op::Relu { x }
        | Op::MaxPool { x, .. }
        | Op::Reshape { x }
        | Op::MulConst { x, .. }
        | Op::Scale { x, .. }
        | Op::Square { x }
        | Op::Abs { x }
        | Op::Softplus { x }
        | Op::SliceCols { x, .. }
        | Op::Sum { x } => vec![*x],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_precede_outputs() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        let y = g.square(x);
        let s = g.sum(y);
        for (i, n) in g.nodes.iter().enumerate() {
            for inp in op_inputs(&n.op) {
                assert!(inp.0 < i);
            }
        }
        assert!(s.0 > y.0);
    }

    #[test]
    fn loss_is_itself() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::scalar(3.0));
        g.backward(x).unwrap();
        assert_eq!(g.grad(x), &[1.0]);
    }

    #[test]
    fn two_paths_accumulate() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::scalar(3.0));
        let a = g.scale(x, 2.0);
        let b = g.scale(x, 5.0);
        let l = g.add(a, b).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x), &[7.0]);
    }

    #[test]
    fn same_input_twice() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::scalar(3.0));
        let l = g.add(x, x).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x), &[2.0]);
    }

    #[test]
    fn repeated_backward_accumulates_leaves() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::scalar(3.0));
        let y = g.square(x);
        g.backward(y).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x), &[12.0]);
        g.zero_grad();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x), &[6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        assert!(matches!(g.backward(x), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let c = g.constant(Tensor::scalar(3.0));
        let x = g.variable(Tensor::scalar(2.0));
        let p = g.add(c, x).unwrap();
        let l = g.square(p);
        g.backward(l).unwrap();
        assert_eq!(g.grad(c), &[0.0]);
        assert_eq!(g.grad(x), &[10.0]);
    }
}
