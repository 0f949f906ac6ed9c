//! Run configuration shared by the command-line tool and library callers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::Aggregation;
use crate::episodic::{DenseEncoder, Distance, EpisodeSizes, InputNorm};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_MAX_FPR;
use crate::frontend::FrontendConfig;
use crate::meta::{MetaSchedule, OeConfig, OptimizerConfig};

/// Task keyword selecting every task the dataset defines for a machine.
pub const ALL_TASKS: &str = "all";

/// Hidden widths and bottleneck of the dense encoder; the input width
/// follows from the frontend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub hidden: Vec<usize>,
    pub bottleneck: usize,
    pub input_norm: InputNorm,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            bottleneck: 128,
            input_norm: InputNorm::PerWindow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Machines to model; empty means every machine in the dataset.
    pub machines: Vec<String>,
    /// Training task names, or `["all"]`.
    pub tasks: Vec<String>,
    pub seed: u64,
    /// Directory for checkpoints, logs, scores and reports.
    pub output: PathBuf,
    pub max_fpr: f64,
    pub aggregation: Aggregation,
    pub distance: Distance,
    pub frontend: FrontendConfig,
    pub encoder: EncoderConfig,
    pub schedule: MetaSchedule,
    pub optimizer: OptimizerConfig,
    pub episode: EpisodeSizes,
    pub oe: OeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            machines: Vec::new(),
            tasks: vec![ALL_TASKS.to_owned()],
            seed: 0,
            output: PathBuf::from("run"),
            max_fpr: DEFAULT_MAX_FPR,
            aggregation: Aggregation::Mean,
            distance: Distance::SquaredEuclidean,
            frontend: FrontendConfig::default(),
            encoder: EncoderConfig::default(),
            schedule: MetaSchedule::default(),
            optimizer: OptimizerConfig::default(),
            episode: EpisodeSizes::default(),
            oe: OeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.optimizer.validate()?;
        if self.tasks.is_empty() {
            return Err(Error::Config("at least one training task is required".into()));
        }
        if self.episode.support == 0 || self.episode.query == 0 {
            return Err(Error::Config("support and query sizes must be at least 1".into()));
        }
        if !(self.oe.lambda >= 0.0) {
            return Err(Error::Config(format!("OE weight must be non-negative, got {}", self.oe.lambda)));
        }
        if self.oe.enabled && (self.oe.modes.is_empty() || self.oe.clips_per_step == 0 || self.oe.pool_clips == 0) {
            return Err(Error::Config("OE needs at least one mode and non-zero clip counts".into()));
        }
        if !(self.max_fpr > 0.0 && self.max_fpr <= 1.0) {
            return Err(Error::Config(format!("max_fpr must lie in (0, 1], got {}", self.max_fpr)));
        }
        if self.distance.scale() <= 0.0 {
            return Err(Error::Config("distance scale must be positive".into()));
        }
        self.build_encoder().map(|_| ())
    }

    /// Layer widths: window size, hidden layers, bottleneck.
    pub fn encoder_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.frontend.window_dim()];
        sizes.extend(&self.encoder.hidden);
        sizes.push(self.encoder.bottleneck);
        sizes
    }

    pub fn build_encoder(&self) -> Result<DenseEncoder> {
        DenseEncoder::new(self.encoder_sizes(), self.encoder.input_norm)
    }

    pub fn checkpoint_path(&self, machine: &str) -> PathBuf {
        self.output.join(format!("{machine}.ckpt"))
    }

    pub fn train_log_path(&self, machine: &str) -> PathBuf {
        self.output.join(format!("{machine}.train_log.csv"))
    }

    pub fn scores_path(&self) -> PathBuf {
        self.output.join("scores.csv")
    }
}
