use serde::{Deserialize, Serialize};

use crate::autodiff::{logsumexp_slice, ParameterVector};
use crate::episodic::{embed, Distance, Encoder, PrototypeSet};
use crate::error::{Error, Result};
use crate::frontend::{Condition, Domain};
use crate::scalar::Scalar;

/// Probability floor inside the log; caps a window score at `-ln(1e-12)`.
pub const PROB_FLOOR: f64 = 1e-12;

/// How window scores become a clip score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl Aggregation {
    pub fn apply<S: Scalar>(self, scores: &[S]) -> Result<S> {
        if scores.is_empty() {
            return Err(Error::InvalidArgument("no window scores to aggregate".into()));
        }
        Ok(match self {
            Aggregation::Mean => scores.iter().copied().sum::<S>() / S::of_usize(scores.len()),
            Aggregation::Max => scores.iter().copied().fold(S::neg_infinity(), S::max),
        })
    }
}

/// `-log p(true_class | z)` from the distances of `z` to every prototype.
///
/// Evaluated as `ln(1 + Σ_{k≠t} exp(d_t - d_k))` so confidently classified
/// windows keep distinct, non-zero scores instead of rounding to zero.
pub fn nll_from_distances<S: Scalar>(distances: &[S], true_class: usize) -> S {
    let dt = distances[true_class];
    let others: Vec<S> = distances
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != true_class)
        .map(|(_, &d)| dt - d)
        .collect();
    let nll = if others.is_empty() {
        S::zero()
    } else {
        let m = others.iter().copied().fold(S::neg_infinity(), S::max);
        if m < S::zero() {
            others.iter().map(|&x| x.exp()).sum::<S>().ln_1p()
        } else {
            let mut all = others;
            all.push(S::zero());
            logsumexp_slice(&all)
        }
    };
    nll.max(S::zero()).min(-S::of(PROB_FLOOR).ln())
}

/// Per-window anomaly scores against `protos`.
pub fn window_scores<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    params: &ParameterVector<S>,
    windows: &[&[f64]],
    protos: &PrototypeSet<S>,
    true_class: usize,
    distance: Distance,
) -> Result<Vec<S>> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no windows to score".into()));
    }
    if true_class >= protos.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {true_class} out of range for {} prototypes",
            protos.num_classes()
        )));
    }
    let z = embed(encoder, params, windows)?;
    let (n, _) = z.dims2().unwrap();
    Ok((0..n)
        .map(|i| nll_from_distances(&protos.distances(z.row(i), distance), true_class))
        .collect())
}

/// Clip-level anomaly score: aggregated window negative log-likelihoods.
pub fn anomaly_score<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    params: &ParameterVector<S>,
    windows: &[&[f64]],
    protos: &PrototypeSet<S>,
    true_class: usize,
    distance: Distance,
    aggregation: Aggregation,
) -> Result<S> {
    aggregation.apply(&window_scores(encoder, params, windows, protos, true_class, distance)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredClip {
    pub clip_id: String,
    pub machine: String,
    pub section: String,
    pub domain: Domain,
    pub truth: Condition,
    pub score: f64,
}

pub const SCORE_CSV_HEADER: [&str; 6] = ["clip_id", "machine", "section", "domain", "truth", "score"];

/// Write scores as CSV. Scores use Rust's shortest round-trip formatting.
pub fn write_scores_csv<W: std::io::Write>(out: W, scores: &[ScoredClip]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_CSV_HEADER)?;
    for s in scores {
        w.write_record([
            s.clip_id.as_str(),
            s.machine.as_str(),
            s.section.as_str(),
            s.domain.as_str(),
            s.truth.as_str(),
            &s.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<Vec<ScoredClip>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |m: String| Error::Data(format!("scores csv: {m}"));
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != SCORE_CSV_HEADER {
        return Err(bad(format!("header must be {}", SCORE_CSV_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let score: f64 = rec[5].parse().map_err(|_| bad(format!("bad score `{}`", &rec[5])))?;
        if !score.is_finite() || score < 0.0 {
            return Err(bad(format!("score must be finite and non-negative, got {score}")));
        }
        out.push(ScoredClip {
            clip_id: rec[0].to_owned(),
            machine: rec[1].to_owned(),
            section: rec[2].to_owned(),
            domain: rec[3].parse()?,
            truth: rec[4].parse()?,
            score,
        });
    }
    Ok(out)
}
