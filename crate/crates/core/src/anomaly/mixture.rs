use crate::autodiff::logsumexp_slice;
use crate::episodic::{Distance, PrototypeSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `log Σ_k π_k exp(-d(z, c_k))`, the unnormalized log-density of the
/// class mixture at `z`.
pub fn log_mixture_density<S: Scalar>(
    embedding: &[S],
    protos: &PrototypeSet<S>,
    priors: &[S],
    distance: Distance,
) -> Result<S> {
    if priors.len() != protos.num_classes() {
        return Err(Error::shape("mixture_density", &[protos.num_classes()], &[priors.len()]));
    }
    if embedding.len() != protos.dim() {
        return Err(Error::shape("mixture_density", &[protos.dim()], &[embedding.len()]));
    }
    let terms: Vec<S> = protos
        .distances(embedding, distance)
        .into_iter()
        .zip(priors)
        .map(|(d, &p)| p.ln() - d)
        .collect();
    Ok(logsumexp_slice(&terms))
}

pub fn mixture_density<S: Scalar>(
    embedding: &[S],
    protos: &PrototypeSet<S>,
    priors: &[S],
    distance: Distance,
) -> Result<S> {
    Ok(log_mixture_density(embedding, protos, priors, distance)?.exp())
}

pub fn flat_prior<S: Scalar>(k: usize) -> Vec<S> {
    vec![S::one() / S::of_usize(k); k]
}
