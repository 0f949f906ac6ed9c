use crate::autodiff::{Graph, Var};
use crate::episodic::{Distance, Encoder};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cross-entropy between the uniform distribution and the class posterior,
/// averaged over outlier embeddings: `mean_i [ lse_k(l_ik) - mean_k(l_ik) ]`.
pub fn outlier_exposure_term<S: Scalar>(
    graph: &mut Graph<S>,
    outlier_embeddings: Var,
    prototypes: Var,
    distance: Distance,
) -> Result<Var> {
    let k = graph.value(prototypes).dims2().map_or(0, |(k, _)| k);
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "outlier exposure needs at least 2 classes, got {k}"
        )));
    }
    let logits = distance.logits(graph, outlier_embeddings, prototypes)?;
    let lse = graph.logsumexp(logits)?;
    let mean_logit = graph.row_mean(logits)?;
    let neg = graph.scale(mean_logit, -S::one())?;
    let ce = graph.add(lse, neg)?;
    graph.mean(ce)
}

/// Embed `outlier_windows` and apply [`outlier_exposure_term`].
pub fn outlier_exposure_loss<S: Scalar, E: Encoder<S> + ?Sized>(
    graph: &mut Graph<S>,
    encoder: &E,
    params: &[Var],
    outlier_windows: &[&[f64]],
    prototypes: Var,
    distance: Distance,
) -> Result<Var> {
    if outlier_windows.is_empty() {
        return Err(Error::InvalidArgument("empty outlier batch".into()));
    }
    let x = graph.input(encoder.prepare(outlier_windows)?);
    let z = encoder.forward(graph, params, x)?;
    outlier_exposure_term(graph, z, prototypes, distance)
}

/// `task + lambda * oe`.
pub fn combined_loss<S: Scalar>(graph: &mut Graph<S>, task: Var, oe: Var, lambda: S) -> Result<Var> {
    if !(lambda >= S::zero()) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    let weighted = graph.scale(oe, lambda)?;
    graph.add(task, weighted)
}
