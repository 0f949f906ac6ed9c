use crate::anomaly::ScoredClip;
use crate::error::{Error, Result};
use crate::frontend::Condition;

/// DCASE convention for the partial-AUC region.
pub const DEFAULT_MAX_FPR: f64 = 0.1;

/// Split clip scores into (normal, anomalous). Clips without ground truth
/// cannot be evaluated and are rejected.
pub fn split_by_truth(clips: &[ScoredClip]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut normal = Vec::new();
    let mut anomalous = Vec::new();
    for c in clips {
        match c.truth {
            Condition::Normal => normal.push(c.score),
            Condition::Anomalous => anomalous.push(c.score),
            Condition::Unknown => {
                return Err(Error::Data(format!("clip `{}` has no ground-truth condition", c.clip_id)))
            }
        }
    }
    Ok((normal, anomalous))
}

fn check_sets(normal: &[f64], anomalous: &[f64]) -> Result<()> {
    if normal.is_empty() || anomalous.is_empty() {
        return Err(Error::Data(format!(
            "ROC needs both classes, got {} normal and {} anomalous clips",
            normal.len(),
            anomalous.len()
        )));
    }
    if normal.iter().chain(anomalous).any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN anomaly score".into()));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of (anomalous, normal) pairs ranked correctly, ties counting
/// one half.
pub fn auroc(normal: &[f64], anomalous: &[f64]) -> Result<f64> {
    check_sets(normal, anomalous)?;
    let normal = sorted(normal);
    // Twice the win count, kept integral so the result is a single rounding.
    let mut twice_wins: u64 = 0;
    for &a in anomalous {
        let below = normal.partition_point(|&n| n < a);
        let not_above = normal.partition_point(|&n| n <= a);
        twice_wins += 2 * below as u64 + (not_above - below) as u64;
    }
    Ok(twice_wins as f64 / (2 * normal.len() * anomalous.len()) as f64)
}

/// ROC vertices `(fpr, tpr)` from sweeping the threshold down through every
/// distinct score; tied scores give a diagonal segment.
pub fn roc_curve(normal: &[f64], anomalous: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_sets(normal, anomalous)?;
    let mut all: Vec<(f64, bool)> = normal
        .iter()
        .map(|&s| (s, false))
        .chain(anomalous.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (nn, na) = (normal.len() as f64, anomalous.len() as f64);
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut curve = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((fp as f64 / nn, tp as f64 / na));
    }
    Ok(curve)
}

/// Area under the ROC curve over `fpr ∈ [0, max_fpr]`, divided by
/// `max_fpr` (unstandardized). The curve is interpolated linearly where it
/// crosses the boundary.
pub fn pauroc(normal: &[f64], anomalous: &[f64], max_fpr: f64) -> Result<f64> {
    if !(max_fpr > 0.0 && max_fpr <= 1.0) {
        return Err(Error::InvalidArgument(format!("max_fpr must lie in (0, 1], got {max_fpr}")));
    }
    let curve = roc_curve(normal, anomalous)?;
    let mut area = 0.0;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= max_fpr {
            break;
        }
        if x1 <= max_fpr {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y_cut = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0);
            area += (max_fpr - x0) * (y0 + y_cut) / 2.0;
            break;
        }
    }
    Ok(area / max_fpr)
}

pub fn auroc_clips(clips: &[ScoredClip]) -> Result<f64> {
    let (n, a) = split_by_truth(clips)?;
    auroc(&n, &a)
}

pub fn pauroc_clips(clips: &[ScoredClip], max_fpr: f64) -> Result<f64> {
    let (n, a) = split_by_truth(clips)?;
    pauroc(&n, &a, max_fpr)
}

/// `n / Σ 1/v`, defined for strictly positive values.
pub fn harmonic_aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("harmonic mean of no values".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("harmonic mean needs positive values, got {v}")));
    }
    Ok(values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>())
}

/// Harmonic mean extended by its limit: zero when any value is zero.
pub(crate) fn harmonic_or_zero(values: &[f64]) -> Result<f64> {
    if !values.is_empty() && values.iter().any(|&v| v == 0.0) {
        return Ok(0.0);
    }
    harmonic_aggregate(values)
}
