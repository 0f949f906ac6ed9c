//! Anomaly scoring, the class-mixture density view of the classifier, and
//! outlier exposure.

mod mixture;
mod oe;
mod outliers;
mod score;

pub use mixture::{flat_prior, log_mixture_density, mixture_density};
pub use oe::{combined_loss, outlier_exposure_loss, outlier_exposure_term};
pub use outliers::{build_outlier_pool, freq_warp, sample_warp_factor, synthesize_outliers, OutlierMode, OutlierPool};
pub use score::{
    anomaly_score, nll_from_distances, read_scores_csv, window_scores, write_scores_csv, Aggregation, ScoredClip,
    PROB_FLOOR, SCORE_CSV_HEADER,
};
