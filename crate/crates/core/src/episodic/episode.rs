use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::task::TaskSpec;
use crate::benchgen::MachineData;
use crate::error::{Error, Result};

/// Clips per class in the support and query halves of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSizes {
    pub support: usize,
    pub query: usize,
}

impl Default for EpisodeSizes {
    fn default() -> Self {
        Self { support: 3, query: 5 }
    }
}

impl EpisodeSizes {
    pub fn per_class(&self) -> usize {
        self.support + self.query
    }
}

/// Class-balanced support/query split at clip granularity. Entries are clip
/// indices into the [`MachineData`] the episode was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub task: String,
    pub support: Vec<Vec<usize>>,
    pub query: Vec<Vec<usize>>,
}

impl Episode {
    pub fn num_classes(&self) -> usize {
        self.support.len()
    }

    pub fn support_clips(&self) -> usize {
        self.support.iter().map(Vec::len).sum()
    }

    pub fn query_clips(&self) -> usize {
        self.query.iter().map(Vec::len).sum()
    }

    /// Materialize every window of every chosen clip.
    pub fn batch<'a>(&self, data: &'a MachineData) -> EpisodeBatch<'a> {
        let windows = |clips: &Vec<usize>| -> Vec<&'a [f64]> {
            clips.iter().flat_map(|&c| data.clips[c].windows()).collect()
        };
        EpisodeBatch {
            support: self.support.iter().map(windows).collect(),
            query: self.query.iter().map(windows).collect(),
        }
    }
}

/// Draw a balanced episode: for each class, shuffle its training clips and
/// take the first `support` for S and the next `query` for Q.
pub fn sample_episode<R: Rng + ?Sized>(
    data: &MachineData,
    task: &TaskSpec,
    sizes: EpisodeSizes,
    rng: &mut R,
) -> Result<Episode> {
    if sizes.support == 0 || sizes.query == 0 {
        return Err(Error::InvalidArgument("support and query sizes must be at least 1".into()));
    }
    let pools = data.class_pools(task);
    let mut support = Vec::with_capacity(pools.len());
    let mut query = Vec::with_capacity(pools.len());
    for (k, pool) in pools.iter().enumerate() {
        if pool.len() < sizes.per_class() {
            return Err(Error::InsufficientClips {
                task: task.name.clone(),
                class: task.classes[k].clone(),
                available: pool.len(),
                required: sizes.per_class(),
            });
        }
        let mut shuffled = pool.clone();
        shuffled.shuffle(rng);
        support.push(shuffled[..sizes.support].to_vec());
        query.push(shuffled[sizes.support..sizes.per_class()].to_vec());
    }
    Ok(Episode {
        task: task.name.clone(),
        support,
        query,
    })
}

pub fn sample_episode_seeded(data: &MachineData, task: &TaskSpec, sizes: EpisodeSizes, seed: u64) -> Result<Episode> {
    sample_episode(data, task, sizes, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Input windows of one episode grouped by class.
#[derive(Debug, Clone, Default)]
pub struct EpisodeBatch<'a> {
    pub support: Vec<Vec<&'a [f64]>>,
    pub query: Vec<Vec<&'a [f64]>>,
}

impl<'a> EpisodeBatch<'a> {
    pub fn num_classes(&self) -> usize {
        self.support.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() {
            return Err(Error::InvalidArgument("episode has no classes".into()));
        }
        if self.query.len() != self.support.len() {
            return Err(Error::shape("episode", &[self.support.len()], &[self.query.len()]));
        }
        if let Some(k) = self.support.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("class {k} has no support windows")));
        }
        if self.query.iter().all(Vec::is_empty) {
            return Err(Error::InvalidArgument("episode has no query windows".into()));
        }
        Ok(())
    }
}
