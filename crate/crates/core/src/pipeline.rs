//! End-to-end steps: load, train per machine, checkpoint, adapt and score.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::{build_outlier_pool, OutlierPool, ScoredClip};
use crate::autodiff::ParameterVector;
use crate::benchgen::{self, Dataset, MachineData};
use crate::config::{RunConfig, ALL_TASKS};
use crate::episodic::{Encoder, TaskSpec};
use crate::error::{Error, Result};
use crate::frontend::Featurizer;
use crate::meta::{adapt_and_score, checkpoint, train, AdaptSettings, Adapted, OuterStepLog, TrainSettings};

/// Independent 64-bit seed for a named stream of a run.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// A loaded dataset with the featurizer of a run.
pub struct Workspace {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub featurizer: Featurizer,
}

impl Workspace {
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let dataset = benchgen::load(&config.dataset)?;
        let featurizer = Featurizer::new(config.frontend.clone())?;
        Ok(Self {
            config,
            dataset,
            featurizer,
        })
    }

    /// Machines selected by the config, checked against the dataset.
    pub fn machines(&self) -> Result<Vec<String>> {
        let available = self.dataset.machines();
        if self.config.machines.is_empty() {
            return Ok(available.into_iter().map(str::to_owned).collect());
        }
        for m in &self.config.machines {
            if !available.contains(&m.as_str()) {
                return Err(Error::Data(format!(
                    "machine `{m}` not in dataset (have {})",
                    available.join(", ")
                )));
            }
        }
        Ok(self.config.machines.clone())
    }

    pub fn machine_data(&self, machine: &str) -> Result<MachineData> {
        self.dataset.machine_data(machine, &self.featurizer)
    }

    pub fn outlier_pool(&self, data: &MachineData) -> Result<Option<OutlierPool>> {
        let oe = &self.config.oe;
        if !oe.enabled || oe.lambda == 0.0 {
            return Ok(None);
        }
        let seed = derive_seed(self.config.seed, &format!("{}/outliers", data.machine));
        build_outlier_pool(&self.dataset, data, &self.featurizer, &oe.modes, oe.pool_clips, seed).map(Some)
    }
}

/// Training tasks selected by `names` for one machine, in dataset order.
pub fn select_tasks(names: &[String], data: &MachineData) -> Result<Vec<TaskSpec>> {
    if names.iter().any(|n| n == ALL_TASKS) {
        if data.tasks.is_empty() {
            return Err(Error::Data(format!("machine `{}` has no usable tasks", data.machine)));
        }
        return Ok(data.tasks.clone());
    }
    let wanted: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    for name in &wanted {
        data.task(name)?;
    }
    Ok(data.tasks.iter().filter(|t| wanted.contains(t.name.as_str())).cloned().collect())
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub machine: String,
    pub tasks: Vec<String>,
    pub params: ParameterVector<f64>,
    pub log: Vec<OuterStepLog>,
}

pub fn train_machine(ws: &Workspace, data: &MachineData) -> Result<TrainedModel> {
    let cfg = &ws.config;
    let tasks = select_tasks(&cfg.tasks, data)?;
    let encoder = cfg.build_encoder()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("{}/init", data.machine)));
    let init: ParameterVector<f64> = encoder.init_params(&mut init_rng);
    let outliers = ws.outlier_pool(data)?;
    let settings = TrainSettings {
        schedule: cfg.schedule,
        optimizer: cfg.optimizer,
        sizes: cfg.episode,
        distance: cfg.distance,
        oe_lambda: cfg.oe.lambda,
        oe_clips_per_step: cfg.oe.clips_per_step,
        seed: derive_seed(cfg.seed, &format!("{}/train", data.machine)),
    };
    let outcome = train(&encoder, init, data, &tasks, &settings, outliers.as_ref())?;
    Ok(TrainedModel {
        machine: data.machine.clone(),
        tasks: tasks.into_iter().map(|t| t.name).collect(),
        params: outcome.params,
        log: outcome.log,
    })
}

/// What a checkpoint records besides the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub machine: String,
    pub tasks: Vec<String>,
    pub config: RunConfig,
}

pub fn save_model(path: &Path, config: &RunConfig, model: &TrainedModel) -> Result<()> {
    let meta = CheckpointMeta {
        machine: model.machine.clone(),
        tasks: model.tasks.clone(),
        config: config.clone(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    checkpoint::save(path, &text, &model.params)
}

pub fn load_model(path: &Path) -> Result<(CheckpointMeta, ParameterVector<f64>)> {
    let ckpt = checkpoint::load::<f64>(path)?;
    let meta: CheckpointMeta = toml::from_str(&ckpt.metadata)
        .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", path.display())))?;
    let encoder = meta.config.build_encoder()?;
    let expected: ParameterVector<f64> = encoder.init_params(&mut ChaCha8Rng::seed_from_u64(0));
    if !expected.same_layout(&ckpt.params) {
        return Err(Error::Checkpoint(format!(
            "{}: parameters do not match the recorded encoder",
            path.display()
        )));
    }
    Ok((meta, ckpt.params))
}

/// Fine-tune on the few-shot clips for `finetune_iters` steps (the section
/// task) and score every test clip of the machine.
pub fn score_machine(
    config: &RunConfig,
    params: &ParameterVector<f64>,
    data: &MachineData,
    finetune_iters: usize,
) -> Result<Adapted<f64>> {
    let encoder = config.build_encoder()?;
    let task = data
        .tasks
        .first()
        .ok_or_else(|| Error::Data(format!("machine `{}` has no tasks", data.machine)))?;
    let settings = AdaptSettings {
        finetune_iters,
        optimizer: config.optimizer,
        distance: config.distance,
        aggregation: config.aggregation,
    };
    adapt_and_score(&encoder, params, data, task, &settings)
}

pub fn write_train_log(path: &Path, log: &[OuterStepLog]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in log {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_scores(path: &Path, scores: &[ScoredClip]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    crate::anomaly::write_scores_csv(std::io::BufWriter::new(file), scores).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredClip>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    crate::anomaly::read_scores_csv(std::io::BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
