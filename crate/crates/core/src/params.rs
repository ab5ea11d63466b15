//! Named parameter storage shared by the networks, the optimizer and the
//! weight archive.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{shape_err, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Entry<S> {
    pub name: String,
    pub tensor: Tensor<S>,
    /// Buffers (running statistics) are saved but not optimized or counted.
    pub trainable: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: Vec<Entry<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        self.push(name.into(), tensor, true)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        self.push(name.into(), tensor, false)
    }

    fn push(&mut self, name: String, tensor: Tensor<S>, trainable: bool) -> ParamId {
        debug_assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter {name}"
        );
        self.entries.push(Entry { name, tensor, trainable });
        ParamId(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[Entry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.entries[id.0].tensor
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.tensor.len())
            .sum()
    }

    /// Replaces a tensor, keeping its shape contract.
    pub fn set(&mut self, id: ParamId, tensor: Tensor<S>) -> Result<()> {
        let e = &mut self.entries[id.0];
        if e.tensor.shape() != tensor.shape() {
            return shape_err(format!(
                "{}: expected {:?}, got {:?}",
                e.name,
                e.tensor.shape(),
                tensor.shape()
            ));
        }
        e.tensor = tensor;
        Ok(())
    }

    /// Puts every entry on `graph`. Trainable entries become gradient leaves
    /// when `trainable` is set; buffers are always constants.
    pub fn bind<'g>(&self, graph: &'g Graph<S>, trainable: bool) -> Bound<'g, S> {
        Bound {
            vars: self
                .entries
                .iter()
                .map(|e| graph.leaf(e.tensor.clone(), trainable && e.trainable))
                .collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                    trainable: e.trainable,
                })
                .collect(),
        }
    }
}

/// A [`ParamStore`] placed on a graph.
pub struct Bound<'g, S> {
    vars: Vec<Var<'g, S>>,
}

impl<'g, S: Scalar> Bound<'g, S> {
    pub fn var(&self, id: ParamId) -> Var<'g, S> {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var<'g, S>] {
        &self.vars
    }
}

/// Uniform initialization in `[-bound, bound]` with `bound = 1/sqrt(fan_in)`.
pub fn uniform_init<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<S> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| S::of(rng.random_range(-bound..=bound)))
}
