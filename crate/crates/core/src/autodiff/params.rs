use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named, ordered trainable parameters.
///
/// Order is fixed at construction and is the order used by checkpoints,
/// gradient vectors and meta-updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector<S> {
    entries: Vec<(String, Tensor<S>)>,
}

impl<S: Scalar> Default for ParameterVector<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParameterVector<S> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    /// Number of named entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn flat(&self) -> Vec<S> {
        self.tensors().flat_map(|t| t.values().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[S]) -> Result<()> {
        if values.len() != self.numel() {
            return Err(Error::shape("set_flat", &[self.numel()], &[values.len()]));
        }
        let mut rest = values;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.numel());
            t.values_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec())))
                .collect(),
        }
    }

    /// Register every entry as a gradient-carrying leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph<S>) -> Vec<Var> {
        self.tensors().map(|t| graph.param(t.clone())).collect()
    }

    /// Collect gradients for vars produced by [`ParameterVector::bind`],
    /// laid out like `self`.
    pub fn gradients_for(&self, vars: &[Var], grads: &Gradients<S>) -> Result<Self> {
        if vars.len() != self.entries.len() {
            return Err(Error::shape("gradients_for", &[self.entries.len()], &[vars.len()]));
        }
        let mut out = self.zeros_like();
        for ((_, slot), v) in out.entries.iter_mut().zip(vars) {
            if let Some(g) = grads.get(*v) {
                slot.values_mut().copy_from_slice(g.values());
            }
        }
        Ok(out)
    }

    /// Elementwise combination of two parameter vectors with equal layouts.
    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        if !self.same_layout(other) {
            return Err(Error::InvalidArgument(
                "parameter vectors have different layouts".into(),
            ));
        }
        let mut out = self.clone();
        for (t, o) in out.tensors_mut().zip(other.tensors()) {
            t.values_mut()
                .iter_mut()
                .zip(o.values())
                .for_each(|(a, &b)| *a = f(*a, b));
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }
}
