use serde::{Deserialize, Serialize};

use crate::autodiff::ParameterVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Inner-loop optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 0.001,
            beta1: 0.0,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Optimizer state for one task visit: moment buffers aligned with the
/// flattened parameters and a step counter.
#[derive(Debug, Clone)]
pub struct InnerOptState<S> {
    pub config: OptimizerConfig,
    first_moment: Vec<S>,
    second_moment: Vec<S>,
    step: u32,
}

impl<S: Scalar> InnerOptState<S> {
    pub fn new(config: OptimizerConfig, params: &ParameterVector<S>) -> Self {
        let n = params.numel();
        Self {
            config,
            first_moment: vec![S::zero(); n],
            second_moment: vec![S::zero(); n],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// Apply one update in place.
    pub fn step(&mut self, params: &mut ParameterVector<S>, grads: &ParameterVector<S>) -> Result<()> {
        if !params.same_layout(grads) || params.numel() != self.first_moment.len() {
            return Err(Error::InvalidArgument("gradient layout does not match parameters".into()));
        }
        self.step += 1;
        let lr = S::of(self.config.lr);
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.tensors_mut().zip(grads.tensors()) {
                    p.values_mut()
                        .iter_mut()
                        .zip(g.values())
                        .for_each(|(p, &g)| *p -= lr * g);
                }
            }
            OptimizerKind::Adam => {
                let b1 = S::of(self.config.beta1);
                let b2 = S::of(self.config.beta2);
                let eps = S::of(self.config.eps);
                let t = self.step as i32;
                let c1 = S::one() - b1.powi(t);
                let c2 = S::one() - b2.powi(t);
                let mut i = 0;
                for (p, g) in params.tensors_mut().zip(grads.tensors()) {
                    for (p, &g) in p.values_mut().iter_mut().zip(g.values()) {
                        let m = &mut self.first_moment[i];
                        let v = &mut self.second_moment[i];
                        *m = b1 * *m + (S::one() - b1) * g;
                        *v = b2 * *v + (S::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                        i += 1;
                    }
                }
            }
        }
        Ok(())
    }
}
