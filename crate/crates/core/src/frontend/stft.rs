use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::clip::AudioClip;
use super::mel::MelFilterbank;
use crate::error::{Error, Result};

pub const POWER_FLOOR: f64 = 1e-10;

/// Log-mel spectrogram, frames × mel bins, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub n_frames: usize,
    pub n_mels: usize,
    pub values: Vec<f64>,
}

impl LogMel {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

/// Frame length and hop in samples.
pub fn frame_geometry(sample_rate: u32, frame_ms: f64, hop_fraction: f64) -> Result<(usize, usize)> {
    if !(hop_fraction > 0.0 && hop_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "hop fraction must be in (0, 1], got {hop_fraction}"
        )));
    }
    let n_fft = (frame_ms * f64::from(sample_rate) / 1000.0).round() as usize;
    if n_fft < 2 {
        return Err(Error::InvalidArgument(format!(
            "{frame_ms} ms at {sample_rate} Hz is shorter than two samples"
        )));
    }
    let hop = ((n_fft as f64 * hop_fraction).round() as usize).max(1);
    Ok((n_fft, hop))
}

/// Number of centered frames for a signal of `len` samples.
pub fn centered_frame_count(len: usize, hop: usize) -> usize {
    len / hop + 1
}

/// Hann-windowed power STFT with centered reflection padding, projected to
/// mel bands and log-compressed with a `1e-10` power floor.
pub fn stft_logmel(clip: &AudioClip, frame_ms: f64, hop_fraction: f64, n_mels: usize) -> Result<LogMel> {
    let (n_fft, hop) = frame_geometry(clip.sample_rate, frame_ms, hop_fraction)?;
    let fb = MelFilterbank::new(n_fft / 2 + 1, n_mels, clip.sample_rate)?;
    logmel_with(&clip.samples, &clip.clip_id, n_fft, hop, &fb)
}

pub(crate) fn logmel_with(
    samples: &[f64],
    clip_id: &str,
    n_fft: usize,
    hop: usize,
    fb: &MelFilterbank,
) -> Result<LogMel> {
    let pad = n_fft / 2;
    if samples.len() <= pad {
        return Err(Error::Data(format!(
            "clip `{clip_id}` has {} samples, too short to reflect-pad a {n_fft}-sample frame",
            samples.len()
        )));
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("clip `{clip_id}` sample {i}")));
    }
    let padded = reflect_pad(samples, pad);
    let n_frames = centered_frame_count(samples.len(), hop);
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos())
        .collect();

    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0; n_fft / 2 + 1];
    let mut values = vec![0.0; n_frames * fb.n_mels];
    for (t, out) in values.chunks_mut(fb.n_mels).enumerate() {
        let start = t * hop;
        for (b, (&x, &w)) in buf.iter_mut().zip(padded[start..start + n_fft].iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        fb.apply(&power, out);
        for v in out.iter_mut() {
            *v = v.max(POWER_FLOOR).ln();
        }
    }
    Ok(LogMel {
        n_frames,
        n_mels: fb.n_mels,
        values,
    })
}

/// Reflection padding without repeating the edge sample (numpy "reflect").
fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    out
}
