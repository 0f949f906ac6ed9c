use serde::{Deserialize, Serialize};

use crate::autodiff::ParameterVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Move `theta` towards the task-adapted `theta_t`:
/// `theta + epsilon * (theta_t - theta)`, evaluated as the convex
/// combination `(1 - epsilon) * theta + epsilon * theta_t` so both endpoints
/// are reproduced exactly.
pub fn reptile_meta_update<S: Scalar>(
    theta: &ParameterVector<S>,
    theta_t: &ParameterVector<S>,
    epsilon: S,
) -> Result<ParameterVector<S>> {
    if !(epsilon >= S::zero() && epsilon <= S::one()) {
        return Err(Error::InvalidArgument(format!("meta step size must be in [0, 1], got {epsilon}")));
    }
    if !theta.same_layout(theta_t) {
        return Err(Error::shape("reptile_meta_update", &[theta.numel()], &[theta_t.numel()]));
    }
    let keep = S::one() - epsilon;
    theta.zip_map(theta_t, |a, b| keep * a + epsilon * b)
}

/// Outer-loop schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaSchedule {
    pub outer_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Inner gradient steps per task visit.
    pub inner_iters: usize,
    /// Fine-tuning steps on the few-shot target clips.
    pub finetune_iters: usize,
}

impl Default for MetaSchedule {
    fn default() -> Self {
        Self {
            outer_steps: 10_000,
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            inner_iters: 8,
            finetune_iters: 50,
        }
    }
}

impl MetaSchedule {
    /// Linear interpolation from `epsilon_start` at step 0 to `epsilon_end`
    /// at the last step.
    pub fn epsilon(&self, step: usize) -> f64 {
        if self.outer_steps <= 1 {
            return self.epsilon_start;
        }
        let frac = step as f64 / (self.outer_steps - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |e: f64| (0.0..=1.0).contains(&e);
        if self.inner_iters == 0 {
            return Err(Error::Config("inner_iters must be at least 1".into()));
        }
        if !in_unit(self.epsilon_start) || !in_unit(self.epsilon_end) {
            return Err(Error::Config("epsilon range must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
