use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParameterVector, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maps a batch of flattened input windows to embeddings.
pub trait Encoder<S: Scalar>: Send + Sync {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn init_params(&self, rng: &mut dyn rand::RngCore) -> ParameterVector<S>;

    /// Turn raw rows into the input tensor (applies any fixed normalization).
    fn prepare(&self, rows: &[&[f64]]) -> Result<Tensor<S>> {
        rows_to_tensor(rows, self.input_dim(), |r, out| {
            out.extend(r.iter().map(|&v| S::of(v)));
        })
    }

    fn forward(&self, graph: &mut Graph<S>, params: &[Var], input: Var) -> Result<Var>;
}

pub(crate) fn rows_to_tensor<S: Scalar>(
    rows: &[&[f64]],
    dim: usize,
    fill: impl Fn(&[f64], &mut Vec<S>),
) -> Result<Tensor<S>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty input batch".into()));
    }
    let mut values = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(Error::shape("encoder input", &[dim], &[r.len()]));
        }
        fill(r, &mut values);
    }
    Tensor::new(vec![rows.len(), dim], values)
}

/// Fixed transform of each input window before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNorm {
    None,
    /// Zero mean and unit variance per window.
    #[default]
    PerWindow,
}

/// Fully connected ReLU network; the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEncoder {
    /// Layer widths including the input, e.g. `[8192, 256, 256, 128]`.
    pub sizes: Vec<usize>,
    pub input_norm: InputNorm,
}

impl DenseEncoder {
    pub fn new(sizes: Vec<usize>, input_norm: InputNorm) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "encoder needs an input and at least one positive layer width, got {sizes:?}"
            )));
        }
        Ok(Self { sizes, input_norm })
    }

    pub fn layer_names(&self) -> Vec<(String, String)> {
        (0..self.sizes.len() - 1)
            .map(|l| (format!("layer{l}.weight"), format!("layer{l}.bias")))
            .collect()
    }
}

impl<S: Scalar> Encoder<S> for DenseEncoder {
    fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// He-normal weights, zero biases.
    fn init_params(&self, rng: &mut dyn rand::RngCore) -> ParameterVector<S> {
        let mut p = ParameterVector::new();
        for (l, (wn, bn)) in self.layer_names().into_iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            let w = (0..fan_in * fan_out).map(|_| S::of(dist.sample(rng))).collect();
            p.push(wn, Tensor::new(vec![fan_in, fan_out], w).unwrap()).unwrap();
            p.push(bn, Tensor::zeros(vec![fan_out])).unwrap();
        }
        p
    }

    fn prepare(&self, rows: &[&[f64]]) -> Result<Tensor<S>> {
        let norm = self.input_norm;
        rows_to_tensor(rows, self.sizes[0], |r, out| match norm {
            InputNorm::None => out.extend(r.iter().map(|&v| S::of(v))),
            InputNorm::PerWindow => {
                let n = r.len() as f64;
                let mean = r.iter().sum::<f64>() / n;
                let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let inv = 1.0 / (var + 1e-8).sqrt();
                out.extend(r.iter().map(|&v| S::of((v - mean) * inv)));
            }
        })
    }

    fn forward(&self, graph: &mut Graph<S>, params: &[Var], input: Var) -> Result<Var> {
        let layers = self.sizes.len() - 1;
        if params.len() != 2 * layers {
            return Err(Error::shape("dense encoder", &[2 * layers], &[params.len()]));
        }
        let mut h = input;
        for l in 0..layers {
            h = graph.affine(h, params[2 * l], params[2 * l + 1])?;
            if l + 1 < layers {
                h = graph.relu(h)?;
            }
        }
        Ok(h)
    }
}

/// Embedding equals the input; has no parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityEncoder {
    pub dim: usize,
}

impl<S: Scalar> Encoder<S> for IdentityEncoder {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn init_params(&self, _rng: &mut dyn rand::RngCore) -> ParameterVector<S> {
        ParameterVector::new()
    }

    fn forward(&self, _graph: &mut Graph<S>, _params: &[Var], input: Var) -> Result<Var> {
        Ok(input)
    }
}

/// Embed rows without recording gradients.
pub fn embed<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    params: &ParameterVector<S>,
    rows: &[&[f64]],
) -> Result<Tensor<S>> {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.tensors().map(|t| g.input(t.clone())).collect();
    let x = g.input(encoder.prepare(rows)?);
    let z = encoder.forward(&mut g, &vars, x)?;
    Ok(g.value(z).clone())
}

