//! Define-by-run tape for reverse-mode differentiation.

use std::cell::{Ref, RefCell};
use std::fmt;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// What a backward rule sees: parent values, this node's value and the
/// incoming gradient. `needs[i]` is false when parent `i` has no path to a
/// trainable leaf, in which case the rule may return `None` for it.
pub struct BackwardCtx<'a, S> {
    pub inputs: Vec<&'a Tensor<S>>,
    pub output: &'a Tensor<S>,
    pub grad: &'a Tensor<S>,
    pub needs: Vec<bool>,
}

pub type BackwardFn<S> = Box<dyn Fn(&BackwardCtx<S>) -> Vec<Option<Tensor<S>>>>;

struct Node<S> {
    value: Tensor<S>,
    parents: Vec<usize>,
    requires_grad: bool,
    backward: Option<BackwardFn<S>>,
}

pub struct Graph<S> {
    nodes: RefCell<Vec<Node<S>>>,
    record: bool,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            record: true,
        }
    }

    /// A graph that never records backward rules.
    pub fn inference() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            record: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> Var<'_, S> {
        let id = self.push_node(Node {
            value,
            parents: Vec::new(),
            requires_grad: requires_grad && self.record,
            backward: None,
        });
        Var { graph: self, id }
    }

    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, false)
    }

    pub fn param(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, true)
    }

    fn push_node(&self, node: Node<S>) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// Records an op result. The rule is dropped when no parent needs grads.
    pub fn record<F>(&self, name: &str, value: Tensor<S>, parents: &[Var<'_, S>], backward: F) -> Result<Var<'_, S>>
    where
        F: Fn(&BackwardCtx<S>) -> Vec<Option<Tensor<S>>> + 'static,
    {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let requires_grad = self.record && {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        let id = self.push_node(Node {
            value,
            parents: parents.iter().map(|p| p.id).collect(),
            requires_grad,
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
        });
        Ok(Var { graph: self, id })
    }

    /// Populates gradients for every node reachable from `loss`, which must
    /// be a single-element tensor. Backward rules are released afterwards.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.id].value.len() != 1 {
            return shape_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..nodes.len()).map(|_| None).collect();
        let seed_shape = nodes[loss.id].value.shape().to_vec();
        grads[loss.id] = Some(Tensor::ones(&seed_shape));
        for id in (0..=loss.id).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            if let Some(rule) = &node.backward {
                let ctx = BackwardCtx {
                    inputs: node.parents.iter().map(|&p| &nodes[p].value).collect(),
                    output: &node.value,
                    grad: &grad,
                    needs: node.parents.iter().map(|&p| nodes[p].requires_grad).collect(),
                };
                let parent_grads = rule(&ctx);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&p, g) in node.parents.iter().zip(parent_grads) {
                    let Some(g) = g else { continue };
                    if !nodes[p].requires_grad {
                        continue;
                    }
                    debug_assert_eq!(g.shape(), nodes[p].value.shape(), "grad shape");
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&g),
                        slot @ None => *slot = Some(g),
                    }
                }
            }
            if node.parents.is_empty() && node.requires_grad {
                grads[id] = Some(grad);
            }
        }
        for node in nodes.iter_mut() {
            node.backward = None;
        }
        Ok(Gradients { grads })
    }
}

/// Handle to a value recorded in a [`Graph`].
pub struct Var<'g, S> {
    graph: &'g Graph<S>,
    id: usize,
}

impl<S> Clone for Var<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for Var<'_, S> {}

impl<S> fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

impl<'g, S: Scalar> Var<'g, S> {
    pub fn graph(&self) -> &'g Graph<S> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Ref<'g, Tensor<S>> {
        Ref::map(self.graph.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn to_tensor(&self) -> Tensor<S> {
        self.value().clone()
    }

    pub fn item(&self) -> S {
        self.value().data()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// A constant copy of this value, cut from the tape.
    pub fn detach(&self) -> Var<'g, S> {
        self.graph.constant(self.to_tensor())
    }
}

/// Gradients of leaves, indexed by node id.
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, v: Var<'_, S>) -> Option<&Tensor<S>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var<'_, S>) -> Option<Tensor<S>> {
        self.grads.get_mut(v.id).and_then(|g| g.take())
    }
}
