//! ROC metrics and harmonic-mean aggregation across sections and machines.

mod metrics;
mod report;

pub use metrics::{
    auroc, auroc_clips, harmonic_aggregate, pauroc, pauroc_clips, roc_curve, split_by_truth, DEFAULT_MAX_FPR,
};
pub use report::{Aggregate, EvalReport, MetricRow, REPORT_CSV_HEADER};

#[cfg(test)]
mod tests;
