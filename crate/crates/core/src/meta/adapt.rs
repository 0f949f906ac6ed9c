use rayon::prelude::*;

use super::optim::{InnerOptState, OptimizerConfig};
use super::train::step_gradients;
use crate::anomaly::{anomaly_score, Aggregation, ScoredClip};
use crate::autodiff::ParameterVector;
use crate::benchgen::{FeaturedClip, MachineData, Split};
use crate::episodic::{compute_prototypes, Distance, Encoder, EpisodeBatch, PrototypeSet, TaskSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptSettings {
    pub finetune_iters: usize,
    pub optimizer: OptimizerConfig,
    pub distance: Distance,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone)]
pub struct Adapted<S> {
    pub params: ParameterVector<S>,
    pub prototypes: PrototypeSet<S>,
    pub finetune_losses: Vec<f64>,
    pub scores: Vec<ScoredClip>,
}

/// Few-shot windows grouped by the classes of `task`.
pub fn fewshot_support<'a>(data: &'a MachineData, task: &TaskSpec) -> Result<Vec<Vec<&'a [f64]>>> {
    let mut support = vec![Vec::new(); task.num_classes()];
    let mut any = false;
    for clip in data.split(Split::Fewshot) {
        let label = clip_label(clip, task)?;
        support[task.class_index(label)?].extend(clip.windows());
        any = true;
    }
    if !any {
        return Err(Error::Data(format!("machine `{}` has no few-shot clips", data.machine)));
    }
    if let Some(k) = support.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!(
            "no few-shot clips for class `{}` of task `{}`",
            task.classes[k], task.name
        )));
    }
    Ok(support)
}

fn clip_label<'a>(clip: &'a FeaturedClip, task: &TaskSpec) -> Result<&'a str> {
    clip.meta
        .label(&task.name)
        .ok_or_else(|| Error::Data(format!("clip `{}` has no `{}` label", clip.meta.clip_id, task.name)))
}

/// Fine-tune on the few-shot clips (support = query), rebuild prototypes
/// from them, and score every test clip by its claimed class.
pub fn adapt_and_score<S: Scalar, E: Encoder<S> + ?Sized>(
    encoder: &E,
    trained: &ParameterVector<S>,
    data: &MachineData,
    task: &TaskSpec,
    settings: &AdaptSettings,
) -> Result<Adapted<S>> {
    let support = fewshot_support(data, task)?;
    let batch = EpisodeBatch {
        support: support.clone(),
        query: support.clone(),
    };

    let mut params = trained.clone();
    let mut finetune_losses = Vec::with_capacity(settings.finetune_iters);
    if settings.finetune_iters > 0 {
        settings.optimizer.validate()?;
        let mut opt = InnerOptState::new(settings.optimizer, &params);
        for _ in 0..settings.finetune_iters {
            let (loss, grads) = step_gradients(encoder, &params, &batch, &[], S::zero(), settings.distance)?;
            opt.step(&mut params, &grads)?;
            finetune_losses.push(loss.as_f64());
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters diverged during fine-tuning".into()));
        }
    }

    let prototypes = compute_prototypes(encoder, &params, &task.name, task.classes.clone(), &support)?;
    let test: Vec<&FeaturedClip> = data.split(Split::Test).collect();
    let scores = test
        .par_iter()
        .map(|clip| {
            let k = task.class_index(clip_label(clip, task)?)?;
            let windows: Vec<&[f64]> = clip.windows().collect();
            let score = anomaly_score(encoder, &params, &windows, &prototypes, k, settings.distance, settings.aggregation)?;
            Ok(ScoredClip {
                clip_id: clip.meta.clip_id.clone(),
                machine: clip.meta.machine.clone(),
                section: clip.meta.section.clone(),
                domain: clip.meta.domain,
                truth: clip.meta.condition,
                score: score.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Adapted {
        params,
        prototypes,
        finetune_losses,
        scores,
    })
}
