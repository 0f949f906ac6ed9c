use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchgen::{Dataset, FeaturedClip, MachineData, Split};
use crate::error::{Error, Result};
use crate::frontend::{Featurizer, LogMel};

/// Where outlier samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// Training clips of every other machine type in the dataset.
    OtherMachines,
    /// The machine's own training clips, stretched along the mel axis.
    FreqWarp,
}

/// Stretch a log-mel spectrogram along the mel axis: output bin `m` reads
/// input position `m / factor` with linear interpolation, clamped at the
/// edges. A factor above one moves content to higher bins.
pub fn freq_warp(logmel: &LogMel, factor: f64) -> Result<LogMel> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!("warp factor must be positive, got {factor}")));
    }
    let m = logmel.n_mels;
    let last = (m - 1) as f64;
    let taps: Vec<(usize, usize, f64)> = (0..m)
        .map(|j| {
            let pos = (j as f64 / factor).clamp(0.0, last);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(m - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect();
    let mut values = Vec::with_capacity(logmel.values.len());
    for t in 0..logmel.n_frames {
        let row = logmel.frame(t);
        values.extend(taps.iter().map(|&(lo, hi, w)| {
            if w == 0.0 {
                row[lo]
            } else {
                (1.0 - w) * row[lo] + w * row[hi]
            }
        }));
    }
    Ok(LogMel {
        n_frames: logmel.n_frames,
        n_mels: m,
        values,
    })
}

/// Warp factor drawn from `[0.9, 1.1]` excluding `(0.99, 1.01)`.
pub fn sample_warp_factor<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let mag = rng.random_range(0.01..=0.1);
    if rng.random_bool(0.5) {
        1.0 + mag
    } else {
        1.0 - mag
    }
}

/// A pool of outlier clips to draw OE batches from.
#[derive(Debug, Clone, Default)]
pub struct OutlierPool {
    pub clips: Vec<FeaturedClip>,
}

impl OutlierPool {
    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    /// Windows of `n_clips` clips drawn without replacement.
    pub fn sample_windows<R: Rng + ?Sized>(&self, n_clips: usize, rng: &mut R) -> Vec<&[f64]> {
        let mut idx: Vec<usize> = (0..self.clips.len()).collect();
        idx.shuffle(rng);
        idx.truncate(n_clips);
        idx.iter().flat_map(|&i| self.clips[i].windows()).collect()
    }
}

/// Build an outlier pool of at most `max_clips` clips for `machine`.
pub fn synthesize_outliers(
    dataset: &Dataset,
    machine: &MachineData,
    featurizer: &Featurizer,
    mode: OutlierMode,
    max_clips: usize,
    seed: u64,
) -> Result<OutlierPool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        OutlierMode::OtherMachines => {
            let others: Vec<&str> = dataset
                .machines()
                .into_iter()
                .filter(|m| *m != machine.machine)
                .collect();
            if others.is_empty() {
                return Err(Error::Data(format!(
                    "other-machine outliers for `{}` need a second machine type in the dataset",
                    machine.machine
                )));
            }
            let mut ids: Vec<&str> = dataset
                .clips
                .iter()
                .filter(|c| c.machine != machine.machine && c.split == Split::Train)
                .map(|c| c.clip_id.as_str())
                .collect();
            ids.shuffle(&mut rng);
            ids.truncate(max_clips);
            let chosen: std::collections::BTreeSet<&str> = ids.into_iter().collect();
            let clips = dataset.featurize_where(featurizer, |c| chosen.contains(c.clip_id.as_str()))?;
            Ok(OutlierPool { clips })
        }
        OutlierMode::FreqWarp => {
            let mut sources: Vec<&FeaturedClip> = machine.split(Split::Train).collect();
            sources.shuffle(&mut rng);
            sources.truncate(max_clips);
            let cfg = featurizer.config();
            let clips = sources
                .into_iter()
                .map(|c| {
                    let factor = sample_warp_factor(&mut rng);
                    let mut meta = c.meta.clone();
                    meta.clip_id = format!("{}~warp{factor:.4}", meta.clip_id);
                    FeaturedClip::new(meta, freq_warp(&c.logmel, factor)?, cfg.context, cfg.shift)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OutlierPool { clips })
        }
    }
}

/// Concatenate pools from several modes.
pub fn build_outlier_pool(
    dataset: &Dataset,
    machine: &MachineData,
    featurizer: &Featurizer,
    modes: &[OutlierMode],
    max_clips_per_mode: usize,
    seed: u64,
) -> Result<OutlierPool> {
    let mut pool = OutlierPool::default();
    for (i, &mode) in modes.iter().enumerate() {
        let part = synthesize_outliers(dataset, machine, featurizer, mode, max_clips_per_mode, seed.wrapping_add(i as u64))?;
        pool.clips.extend(part.clips);
    }
    Ok(pool)
}
