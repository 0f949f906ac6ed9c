use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{InnerOptState, OptimizerConfig};
use super::reptile::{reptile_meta_update, MetaSchedule};
use crate::anomaly::{combined_loss, outlier_exposure_term, OutlierMode, OutlierPool};
use crate::autodiff::{Graph, ParameterVector};
use crate::benchgen::MachineData;
use crate::episodic::{forward_episode, query_loss, sample_episode, Distance, Encoder, EpisodeBatch, EpisodeSizes, TaskSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outlier exposure settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OeConfig {
    pub enabled: bool,
    pub lambda: f64,
    pub modes: Vec<OutlierMode>,
    /// Outlier clips mixed into every inner step.
    pub clips_per_step: usize,
    /// Pool size per outlier mode.
    pub pool_clips: usize,
}

impl Default for OeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: 0.2,
            modes: vec![OutlierMode::OtherMachines, OutlierMode::FreqWarp],
            clips_per_step: 4,
            pool_clips: 32,
        }
    }
}

/// Everything the inner loop needs besides the parameters.
pub struct InnerLoop<'a, S: Scalar, E: Encoder<S> + ?Sized> {
    pub encoder: &'a E,
    pub data: &'a MachineData,
    pub sizes: EpisodeSizes,
    pub distance: Distance,
    pub optimizer: OptimizerConfig,
    /// Outlier pool, clips per step and weight.
    pub outliers: Option<(&'a OutlierPool, usize, S)>,
}

/// Loss value and parameter gradients of one training step.
pub fn step_gradients<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    params: &ParameterVector<S>,
    batch: &EpisodeBatch<'_>,
    outlier_windows: &[&[f64]],
    lambda: S,
    distance: Distance,
) -> Result<(S, ParameterVector<S>)> {
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let fwd = forward_episode(&mut g, encoder, &vars, batch, outlier_windows)?;
    let task = query_loss(&mut g, &fwd, distance)?;
    let loss = match fwd.extra {
        Some(z_out) => {
            let oe = outlier_exposure_term(&mut g, z_out, fwd.prototypes, distance)?;
            combined_loss(&mut g, task, oe, lambda)?
        }
        None => task,
    };
    let value = g.value(loss).item().unwrap();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("training loss {value}")));
    }
    let grads = params.gradients_for(&vars, &g.backward(loss)?)?;
    Ok((value, grads))
}

impl<S: Scalar, E: Encoder<S> + ?Sized> InnerLoop<'_, S, E> {
    /// `iters` optimizer steps on freshly sampled episodes of `task`,
    /// starting from a fresh optimizer state. Returns the adapted
    /// parameters and the loss of every step.
    pub fn run<R: Rng + ?Sized>(
        &self,
        params: &ParameterVector<S>,
        task: &TaskSpec,
        iters: usize,
        rng: &mut R,
    ) -> Result<(ParameterVector<S>, Vec<f64>)> {
        let mut theta = params.clone();
        let mut opt = InnerOptState::new(self.optimizer, params);
        let mut losses = Vec::with_capacity(iters);
        for _ in 0..iters {
            let episode = sample_episode(self.data, task, self.sizes, rng)?;
            let batch = episode.batch(self.data);
            let (outlier_windows, lambda) = match self.outliers {
                Some((pool, n, lambda)) => (pool.sample_windows(n, rng), lambda),
                None => (Vec::new(), S::zero()),
            };
            let (loss, grads) = step_gradients(self.encoder, &theta, &batch, &outlier_windows, lambda, self.distance)?;
            opt.step(&mut theta, &grads)?;
            losses.push(loss.as_f64());
        }
        Ok((theta, losses))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStepLog {
    pub step: usize,
    pub task: String,
    pub epsilon: f64,
    pub first_loss: f64,
    pub last_loss: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub params: ParameterVector<S>,
    pub log: Vec<OuterStepLog>,
}

/// Settings of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub schedule: MetaSchedule,
    pub optimizer: OptimizerConfig,
    pub sizes: EpisodeSizes,
    pub distance: Distance,
    pub oe_lambda: f64,
    pub oe_clips_per_step: usize,
    pub seed: u64,
}

/// Meta-train across `tasks`: visit them round-robin, adapt with the inner
/// loop, then pull the shared parameters towards the adapted ones with an
/// annealed step size.
pub fn train<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    init: ParameterVector<S>,
    data: &MachineData,
    tasks: &[TaskSpec],
    settings: &TrainSettings,
    outliers: Option<&OutlierPool>,
) -> Result<TrainOutcome<S>> {
    settings.schedule.validate()?;
    settings.optimizer.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("no tasks to train on".into()));
    }
    for task in tasks {
        if task.num_classes() < 2 {
            return Err(Error::Data(format!("task `{}` has fewer than two classes", task.name)));
        }
        let pools = data.class_pools(task);
        for (k, pool) in pools.iter().enumerate() {
            if pool.len() < settings.sizes.per_class() {
                return Err(Error::InsufficientClips {
                    task: task.name.clone(),
                    class: task.classes[k].clone(),
                    available: pool.len(),
                    required: settings.sizes.per_class(),
                });
            }
        }
    }
    let outliers = match outliers {
        Some(pool) if pool.is_empty() => return Err(Error::Data("outlier pool is empty".into())),
        Some(pool) => Some((pool, settings.oe_clips_per_step.max(1), S::of(settings.oe_lambda))),
        None => None,
    };
    let inner = InnerLoop {
        encoder,
        data,
        sizes: settings.sizes,
        distance: settings.distance,
        optimizer: settings.optimizer,
        outliers,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut theta = init;
    let mut log = Vec::with_capacity(settings.schedule.outer_steps);
    for step in 0..settings.schedule.outer_steps {
        let task = &tasks[step % tasks.len()];
        let epsilon = settings.schedule.epsilon(step);
        let (adapted, losses) = inner.run(&theta, task, settings.schedule.inner_iters, &mut rng)?;
        theta = reptile_meta_update(&theta, &adapted, S::of(epsilon))?;
        log.push(OuterStepLog {
            step,
            task: task.name.clone(),
            epsilon,
            first_loss: losses[0],
            last_loss: *losses.last().unwrap(),
            mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
        });
        if step % 50 == 0 {
            log::debug!("outer step {step} task {} eps {epsilon:.3} loss {:.4}", task.name, losses[0]);
        }
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("parameters diverged during training".into()));
    }
    Ok(TrainOutcome { params: theta, log })
}
