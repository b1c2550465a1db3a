//! Reverse-mode differentiation over a tape of recorded operations.
//!
//! Values live on the tape; a [`Var`] is an index into it. Nodes are
//! appended in evaluation order, so the tape is acyclic by construction and
//! a reverse sweep visits every node after all of its consumers.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule of a recorded operation.
///
/// `backward` returns one entry per input; `needs[i]` tells whether input
/// `i` wants a gradient, and entries may be `None` when it does not.
pub trait Op<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        grad: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>>;
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    inputs: Vec<Var>,
    op: Option<Box<dyn Op<T>>>,
    requires_grad: bool,
}

/// The computation graph of one forward pass.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_node(&mut self, node: Node<T>) -> Var {
        self.nodes.push(node);
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input; its gradient accumulates across backward passes.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push_node(Node {
            value,
            grad: None,
            inputs: Vec::new(),
            op: None,
            requires_grad: true,
        })
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_node(Node {
            value,
            grad: None,
            inputs: Vec::new(),
            op: None,
            requires_grad: false,
        })
    }

    /// Record `output = op(inputs)`. Custom operations enter the graph here.
    pub fn push(&mut self, op: Box<dyn Op<T>>, inputs: &[Var], output: Tensor<T>) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_node(Node {
            value: output,
            grad: None,
            inputs: inputs.to_vec(),
            op: Some(op),
            requires_grad,
        })
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<T>> {
        self.nodes[v.0].grad.take()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn op_name(&self, v: Var) -> Option<&'static str> {
        self.nodes[v.0].op.as_ref().map(|o| o.name())
    }

    /// Zero every leaf gradient.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn accumulate(&mut self, v: Var, g: Tensor<T>) {
        let node = &mut self.nodes[v.0];
        debug_assert_eq!(node.value.shape(), g.shape(), "gradient shape");
        match &mut node.grad {
            Some(acc) => acc.add_assign(&g),
            None => node.grad = Some(g),
        }
    }

    /// Back-propagate from the scalar `loss`. Leaf gradients accumulate;
    /// intermediate gradients are consumed by the sweep.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar output, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        for n in &mut self.nodes[..=loss.0] {
            if n.op.is_some() {
                n.grad = None;
            }
        }
        let shape = self.nodes[loss.0].value.shape();
        self.accumulate(loss, Tensor::full(shape, T::one()));

        for i in (0..=loss.0).rev() {
            if self.nodes[i].op.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let node = &self.nodes[i];
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|v| self.nodes[v.0].requires_grad)
                .collect();
            let ins: Vec<&Tensor<T>> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let op = node.op.as_ref().expect("checked above");
            let grads = op.backward(&ins, &node.value, &g, &needs);
            let inputs = node.inputs.clone();
            for ((v, gi), need) in inputs.into_iter().zip(grads).zip(needs) {
                if let (Some(gi), true) = (gi, need) {
                    self.accumulate(v, gi);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops::{sum, weighted_sum};

    #[test]
    fn sum_has_unit_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_fn([1, 2, 2, 2], |i| i as f64));
        let s = sum(&mut t, x);
        assert_eq!(t.value(s).data(), &[28.0]);
        t.backward(s).unwrap();
        assert!(t.grad(x).unwrap().data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn two_backward_passes_double_the_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_fn([1, 1, 2, 3], |i| i as f64 - 2.0));
        let w = Tensor::from_fn([1, 1, 2, 3], |i| 0.5 * i as f64);
        let s = weighted_sum(&mut t, x, w.clone()).unwrap();
        t.backward(s).unwrap();
        let once = t.grad(x).unwrap().clone();
        t.backward(s).unwrap();
        let twice = t.grad(x).unwrap();
        for ((a, b), c) in once.data().iter().zip(twice.data()).zip(w.data()) {
            assert_eq!(*a, *c);
            assert_eq!(*b, 2.0 * c);
        }
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::<f64>::new();
        let c = t.constant(Tensor::full([1, 1, 2, 2], 3.0));
        let s = sum(&mut t, c);
        t.backward(s).unwrap();
        assert!(t.grad(c).is_none());
        assert!(!t.requires_grad(s));
    }

    #[test]
    fn non_scalar_backward_is_an_error() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::zeros([1, 1, 2, 2]));
        assert!(t.backward(x).is_err());
    }
}
