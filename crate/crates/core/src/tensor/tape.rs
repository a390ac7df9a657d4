use super::{Element, Tensor};
use crate::error::{invalid, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Backward rule of one recorded operation.
///
/// Returns one gradient per input, `None` where `needs[i]` is false.
pub(crate) trait Backward<F: Element>: Send + Sync {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>>;
}

struct Node<F: Element> {
    value: Tensor<F>,
    requires_grad: bool,
    parents: Vec<Var>,
    op: Option<Box<dyn Backward<F>>>,
    grad: Option<Tensor<F>>,
}

/// Ordered record of operations with their backward rules.
///
/// Operations are appended in execution order, so reverse index order is a
/// valid reverse topological order.
pub struct Tape<F: Element = f32> {
    nodes: Vec<Node<F>>,
    recording: bool,
}

impl<F: Element> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Element> Tape<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            recording: true,
        }
    }

    /// A tape that never stores backward rules. Inference uses this.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, false, Vec::new(), None)
    }

    /// Trainable leaf; holds d(loss)/d(value) after [`Tape::backward`].
    pub fn param(&mut self, value: Tensor<F>) -> Var {
        let requires = self.recording;
        self.push(value, requires, Vec::new(), None)
    }

    pub fn value(&self, var: Var) -> &Tensor<F> {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn grad(&self, var: Var) -> Option<&Tensor<F>> {
        self.nodes[var.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, var: Var) -> Option<Tensor<F>> {
        self.nodes[var.0].grad.take()
    }

    pub(crate) fn record(
        &mut self,
        value: Tensor<F>,
        parents: Vec<Var>,
        op: Box<dyn Backward<F>>,
    ) -> Var {
        let requires =
            self.recording && parents.iter().any(|p| self.nodes[p.0].requires_grad);
        let op = if requires { Some(op) } else { None };
        let parents = if requires { parents } else { Vec::new() };
        self.push(value, requires, parents, op)
    }

    fn push(
        &mut self,
        value: Tensor<F>,
        requires_grad: bool,
        parents: Vec<Var>,
        op: Option<Box<dyn Backward<F>>>,
    ) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            parents,
            op,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Replays backward rules from `loss` to every trainable leaf.
    ///
    /// Leaf gradients from any earlier call are replaced.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let seed = Tensor::full(root.value.shape().to_vec(), F::one());
        let root_requires = root.requires_grad;
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !root_requires {
            return Ok(());
        }

        let mut pending: Vec<Option<Tensor<F>>> = (0..=loss.0).map(|_| None).collect();
        pending[loss.0] = Some(seed);
        let mut leaf_grads = Vec::new();

        for idx in (0..=loss.0).rev() {
            let Some(grad) = pending[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Some(op) => {
                    let inputs: Vec<&Tensor<F>> = node
                        .parents
                        .iter()
                        .map(|p| &self.nodes[p.0].value)
                        .collect();
                    let needs: Vec<bool> = node
                        .parents
                        .iter()
                        .map(|p| self.nodes[p.0].requires_grad)
                        .collect();
                    let parent_grads = op.backward(&inputs, &node.value, &grad, &needs);
                    debug_assert_eq!(parent_grads.len(), node.parents.len());
                    for (parent, g) in node.parents.iter().zip(parent_grads) {
                        let Some(g) = g else { continue };
                        debug_assert_eq!(g.shape(), self.nodes[parent.0].value.shape());
                        match &mut pending[parent.0] {
                            Some(acc) => acc.add_assign(&g),
                            slot => *slot = Some(g),
                        }
                    }
                }
                None => {
                    if node.requires_grad {
                        leaf_grads.push((idx, grad));
                    }
                }
            }
        }
        for (idx, grad) in leaf_grads {
            self.nodes[idx].grad = Some(grad);
        }
        Ok(())
    }
}
