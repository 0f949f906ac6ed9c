//! Audio to log-mel context windows.

mod clip;
mod mel;
mod stft;
mod wav;
mod windows;

use serde::{Deserialize, Serialize};

pub use clip::{AudioClip, Condition, Domain};
pub use mel::{hz_to_mel, mel_center_frequencies, mel_edges, mel_filterbank, mel_to_hz, MelFilterbank};
pub use stft::{centered_frame_count, frame_geometry, stft_logmel, LogMel, POWER_FLOOR};
pub use wav::{read_pcm16_mono, write_pcm16_mono};
pub use windows::{window_count, window_samples, LogMelWindow};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub frame_ms: f64,
    pub hop_fraction: f64,
    pub n_mels: usize,
    /// Frames per context window.
    pub context: usize,
    /// Frames between consecutive windows.
    pub shift: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            frame_ms: 64.0,
            hop_fraction: 0.5,
            n_mels: 128,
            context: 64,
            shift: 8,
        }
    }
}

impl FrontendConfig {
    pub fn window_dim(&self) -> usize {
        self.context * self.n_mels
    }
}

/// Reusable featurizer holding the filterbank for one configuration.
#[derive(Debug, Clone)]
pub struct Featurizer {
    config: FrontendConfig,
    n_fft: usize,
    hop: usize,
    filterbank: MelFilterbank,
}

impl Featurizer {
    pub fn new(config: FrontendConfig) -> Result<Self> {
        let (n_fft, hop) = frame_geometry(config.sample_rate, config.frame_ms, config.hop_fraction)?;
        let filterbank = MelFilterbank::new(n_fft / 2 + 1, config.n_mels, config.sample_rate)?;
        if config.context == 0 || config.shift == 0 {
            return Err(Error::InvalidArgument("context and shift must be at least 1".into()));
        }
        Ok(Self {
            config,
            n_fft,
            hop,
            filterbank,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    pub fn logmel(&self, clip: &AudioClip) -> Result<LogMel> {
        if clip.sample_rate != self.config.sample_rate {
            return Err(Error::Data(format!(
                "clip `{}` is {} Hz, pipeline expects {} Hz",
                clip.clip_id, clip.sample_rate, self.config.sample_rate
            )));
        }
        stft::logmel_with(&clip.samples, &clip.clip_id, self.n_fft, self.hop, &self.filterbank)
    }

    pub fn windows(&self, clip: &AudioClip) -> Result<Vec<LogMelWindow>> {
        let lm = self.logmel(clip)?;
        window_samples(&lm, &clip.clip_id, self.config.context, self.config.shift)
    }
}

#[cfg(test)]
mod tests;
