use serde::{Deserialize, Serialize};

use super::encoder::{embed, Encoder};
use super::episode::EpisodeBatch;
use crate::autodiff::{logsumexp_slice, Graph, ParameterVector, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Divergence between an embedding and a prototype.
///
/// Both variants are Bregman divergences of a squared norm, i.e. each class
/// is an isotropic Gaussian around its prototype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distance {
    SquaredEuclidean,
    /// `scale * ||z - c||^2`; a precision of `2 * scale` per dimension.
    ScaledSquaredEuclidean { scale: f64 },
}

impl Default for Distance {
    fn default() -> Self {
        Distance::SquaredEuclidean
    }
}

impl Distance {
    pub fn scale(&self) -> f64 {
        match *self {
            Distance::SquaredEuclidean => 1.0,
            Distance::ScaledSquaredEuclidean { scale } => scale,
        }
    }

    pub fn eval<S: Scalar>(&self, z: &[S], c: &[S]) -> S {
        let sq: S = z.iter().zip(c).map(|(&a, &b)| (a - b) * (a - b)).sum();
        sq * S::of(self.scale())
    }

    /// `-d(z_i, c_k)` for every row/prototype pair, recorded in the graph.
    pub fn logits<S: Scalar>(&self, graph: &mut Graph<S>, z: Var, protos: Var) -> Result<Var> {
        let d = graph.pairwise_sqdist(z, protos)?;
        graph.scale(d, S::of(-self.scale()))
    }
}

/// Class centroids in embedding space for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet<S> {
    pub task_name: String,
    pub class_names: Vec<String>,
    /// `K × d`, row `k` is the prototype of `class_names[k]`.
    pub prototypes: Tensor<S>,
}

impl<S: Scalar> PrototypeSet<S> {
    pub fn new(task_name: impl Into<String>, class_names: Vec<String>, prototypes: Tensor<S>) -> Result<Self> {
        let (k, _) = prototypes
            .dims2()
            .ok_or_else(|| Error::shape("prototypes", prototypes.shape(), &[0, 0]))?;
        if k != class_names.len() {
            return Err(Error::shape("prototypes", &[k], &[class_names.len()]));
        }
        Ok(Self {
            task_name: task_name.into(),
            class_names,
            prototypes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.dims2().map_or(0, |(_, d)| d)
    }

    pub fn row(&self, k: usize) -> &[S] {
        self.prototypes.row(k)
    }

    pub fn distances(&self, z: &[S], distance: Distance) -> Vec<S> {
        (0..self.num_classes()).map(|k| distance.eval(z, self.row(k))).collect()
    }

    /// Index of the closest prototype; the lowest index wins ties.
    pub fn nearest(&self, z: &[S], distance: Distance) -> usize {
        let d = self.distances(z, distance);
        let mut best = 0;
        for k in 1..d.len() {
            if d[k] < d[best] {
                best = k;
            }
        }
        best
    }
}

/// Mean embedding of each class's support windows.
pub fn compute_prototypes<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    params: &ParameterVector<S>,
    task_name: &str,
    class_names: Vec<String>,
    support: &[Vec<&[f64]>],
) -> Result<PrototypeSet<S>> {
    if support.len() != class_names.len() {
        return Err(Error::shape("compute_prototypes", &[class_names.len()], &[support.len()]));
    }
    if let Some(k) = support.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!(
            "class `{}` has no support windows",
            class_names[k]
        )));
    }
    let rows: Vec<&[f64]> = support.iter().flatten().copied().collect();
    let z = embed(encoder, params, &rows)?;
    let (_, d) = z.dims2().unwrap();
    let mut protos = Vec::with_capacity(support.len() * d);
    let mut offset = 0;
    for class in support {
        let mut acc = vec![S::zero(); d];
        for r in offset..offset + class.len() {
            for (a, &v) in acc.iter_mut().zip(z.row(r)) {
                *a += v;
            }
        }
        let n = S::of_usize(class.len());
        protos.extend(acc.into_iter().map(|a| a / n));
        offset += class.len();
    }
    PrototypeSet::new(task_name, class_names, Tensor::new(vec![support.len(), d], protos)?)
}

/// Softmax over negative distances; `p_k ∝ exp(-d_k)`.
pub fn distance_softmax<S: Scalar>(distances: &[S]) -> Vec<S> {
    let m = distances.iter().copied().fold(S::infinity(), S::min);
    let e: Vec<S> = distances.iter().map(|&d| (m - d).exp()).collect();
    let total: S = e.iter().copied().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Posterior cluster assignment of a mixture with priors `pi`:
/// `p_k ∝ pi_k exp(-d_k)`, evaluated in the log domain.
pub fn prior_weighted_assignment<S: Scalar>(distances: &[S], priors: &[S]) -> Result<Vec<S>> {
    if priors.len() != distances.len() {
        return Err(Error::shape("prior_weighted_assignment", &[distances.len()], &[priors.len()]));
    }
    let total: S = priors.iter().copied().sum();
    if priors.iter().any(|&p| p < S::zero()) || (total - S::one()).abs() > S::of(1e-9) {
        return Err(Error::InvalidArgument("priors must lie on the probability simplex".into()));
    }
    let log_w: Vec<S> = distances.iter().zip(priors).map(|(&d, &p)| p.ln() - d).collect();
    let lse = logsumexp_slice(&log_w);
    Ok(log_w.into_iter().map(|w| (w - lse).exp()).collect())
}

/// Class posterior for one embedding; flat priors when `priors` is `None`.
pub fn class_likelihood<S: Scalar>(
    embedding: &[S],
    protos: &PrototypeSet<S>,
    priors: Option<&[S]>,
    distance: Distance,
) -> Result<Vec<S>> {
    if protos.num_classes() == 0 {
        return Err(Error::InvalidArgument("no prototypes".into()));
    }
    if embedding.len() != protos.dim() {
        return Err(Error::shape("class_likelihood", &[protos.dim()], &[embedding.len()]));
    }
    let d = protos.distances(embedding, distance);
    match priors {
        None => Ok(distance_softmax(&d)),
        Some(p) => prior_weighted_assignment(&d, p),
    }
}

/// Graph handles of one episode's forward pass.
#[derive(Debug, Clone)]
pub struct EpisodeForward {
    pub prototypes: Var,
    pub query: Var,
    pub query_targets: Vec<usize>,
    /// Embeddings of any extra rows passed alongside the episode.
    pub extra: Option<Var>,
}

/// Embed support, query and optional extra rows in a single pass, then form
/// prototypes from the support embeddings.
pub fn forward_episode<S: Scalar, E: Encoder<S> + ?Sized>(
    graph: &mut Graph<S>,
    encoder: &E,
    params: &[Var],
    batch: &EpisodeBatch<'_>,
    extra: &[&[f64]],
) -> Result<EpisodeForward> {
    batch.validate()?;
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut groups = Vec::with_capacity(batch.num_classes());
    for class in &batch.support {
        groups.push((rows.len()..rows.len() + class.len()).collect::<Vec<_>>());
        rows.extend(class.iter().copied());
    }
    let mut query_rows = Vec::new();
    let mut query_targets = Vec::new();
    for (k, class) in batch.query.iter().enumerate() {
        query_rows.extend(rows.len()..rows.len() + class.len());
        query_targets.extend(std::iter::repeat_n(k, class.len()));
        rows.extend(class.iter().copied());
    }
    let extra_rows: Vec<usize> = (rows.len()..rows.len() + extra.len()).collect();
    rows.extend(extra.iter().copied());

    let x = graph.input(encoder.prepare(&rows)?);
    let z = encoder.forward(graph, params, x)?;
    let prototypes = graph.group_mean(z, groups)?;
    let query = graph.select_rows(z, query_rows)?;
    let extra = if extra_rows.is_empty() {
        None
    } else {
        Some(graph.select_rows(z, extra_rows)?)
    };
    Ok(EpisodeForward {
        prototypes,
        query,
        query_targets,
        extra,
    })
}

/// Mean negative log-likelihood of each query window's class.
pub fn query_loss<S: Scalar>(graph: &mut Graph<S>, fwd: &EpisodeForward, distance: Distance) -> Result<Var> {
    let logits = distance.logits(graph, fwd.query, fwd.prototypes)?;
    let nll = graph.nll_gather(logits, fwd.query_targets.clone())?;
    graph.mean(nll)
}

/// Prototype loss of one episode with gradients flowing through both the
/// query embeddings and the support-derived prototypes.
pub fn episode_loss<S: Scalar, E: Encoder<S> + ?Sized>(
    graph: &mut Graph<S>,
    encoder: &E,
    params: &[Var],
    batch: &EpisodeBatch<'_>,
    distance: Distance,
) -> Result<Var> {
    let fwd = forward_episode(graph, encoder, params, batch, &[])?;
    query_loss(graph, &fwd, distance)
}
