use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::spec::{AnomalyKind, AttributeEffect, SectionSpec};
use crate::frontend::Domain;

/// RMS of the harmonic part of every clip.
const HUM_RMS: f64 = 0.1;
const PITCH_JITTER: f64 = 0.002;

/// Independent RNG stream for one clip, so synthesis order does not matter.
pub fn clip_rng(seed: u64, clip_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(clip_id.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Everything about a clip that is decided before synthesis.
#[derive(Debug, Clone)]
pub struct ClipPlan {
    pub domain: Domain,
    /// Level index per attribute of the section, in declaration order.
    pub levels: Vec<usize>,
    pub anomaly: Option<AnomalyKind>,
}

pub fn synthesize(
    section: &SectionSpec,
    plan: &ClipPlan,
    n_samples: usize,
    sample_rate: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let nyquist = sr / 2.0;

    let mut pitch = 1.0 + PITCH_JITTER * rng.sample::<f64, _>(StandardNormal);
    let mut noise_snr = section.source_noise_snr;
    if plan.domain == Domain::Target {
        pitch *= section.target_shift.pitch_ratio;
        noise_snr += section.target_shift.noise_snr_delta;
    }

    let mut amps: Vec<f64> = section.base_harmonics.iter().map(|&(_, a)| a).collect();
    let mut modulation: Option<(f64, f64)> = None;
    for (attr, &level) in section.attributes.iter().zip(&plan.levels) {
        let level = level as f64;
        match attr.effect {
            AttributeEffect::Pitch { step } => pitch *= (1.0 + step).powf(level),
            AttributeEffect::Tilt { step_db } => {
                for (h, a) in amps.iter_mut().enumerate() {
                    *a *= 10f64.powf(level * step_db * h as f64 / 20.0);
                }
            }
            AttributeEffect::Modulation { rate_hz, depth } => {
                modulation = Some((rate_hz * (level + 1.0), depth));
            }
        }
    }

    let detune = match plan.anomaly {
        Some(AnomalyKind::Detune) => section.anomaly_injection.harmonic_detune,
        _ => 0.0,
    };
    let partials: Vec<(f64, f64, f64)> = section
        .base_harmonics
        .iter()
        .zip(&amps)
        .enumerate()
        .map(|(h, (&(f, _), &a))| {
            let shift = if h % 2 == 1 { 1.0 + detune } else { 1.0 };
            (f * pitch * shift, a, rng.random_range(0.0..2.0 * PI))
        })
        .filter(|&(f, _, _)| f < nyquist)
        .collect();

    let mut hum: Vec<f64> = (0..n_samples)
        .map(|i| {
            let t = i as f64 / sr;
            partials
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum()
        })
        .collect();
    if let Some((rate, depth)) = modulation {
        let ph = rng.random_range(0.0..2.0 * PI);
        for (i, x) in hum.iter_mut().enumerate() {
            *x *= 1.0 + depth * (2.0 * PI * rate * i as f64 / sr + ph).sin();
        }
    }
    scale_to_rms(&mut hum, HUM_RMS);

    // Low-passed Gaussian noise at the requested harmonic-to-noise ratio.
    let mut noise = vec![0.0; n_samples];
    let mut state = 0.0;
    for x in noise.iter_mut() {
        state = 0.6 * state + rng.sample::<f64, _>(StandardNormal);
        *x = state;
    }
    scale_to_rms(&mut noise, HUM_RMS * 10f64.powf(-noise_snr / 20.0));

    let mut out: Vec<f64> = hum.iter().zip(&noise).map(|(h, n)| h + n).collect();

    if plan.domain == Domain::Target {
        if let Some((f, a)) = section.target_shift.extra_tone {
            let ph = rng.random_range(0.0..2.0 * PI);
            for (i, x) in out.iter_mut().enumerate() {
                *x += HUM_RMS * a * (2.0 * PI * f * i as f64 / sr + ph).sin();
            }
        }
    }

    match plan.anomaly {
        Some(AnomalyKind::Clicks) => add_clicks(&mut out, section.anomaly_injection.transient_clicks, sr, rng),
        Some(AnomalyKind::BandNoise) => {
            add_band_bursts(&mut out, section.anomaly_injection.band_noise_burst, sr, rng)
        }
        Some(AnomalyKind::Detune) | None => {}
    }
    out
}

fn scale_to_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let k = target / rms;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Short exponentially decaying noise bursts, about one per second.
fn add_clicks(out: &mut [f64], magnitude: f64, sr: f64, rng: &mut ChaCha8Rng) {
    let seconds = out.len() as f64 / sr;
    let count = (seconds.round() as usize).max(2);
    let decay = 0.002 * sr;
    let len = (5.0 * decay) as usize;
    for _ in 0..count {
        let start = rng.random_range(0..out.len());
        for k in 0..len.min(out.len() - start) {
            let e = (-(k as f64) / decay).exp();
            out[start + k] += magnitude * e * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Noise confined to a random 1 kHz band, present in a few 0.3 s bursts.
fn add_band_bursts(out: &mut [f64], magnitude: f64, sr: f64, rng: &mut ChaCha8Rng) {
    let lo = rng.random_range(1500.0..(sr / 2.0 - 1500.0).max(1600.0));
    let tones: Vec<(f64, f64)> = (0..32)
        .map(|_| (rng.random_range(lo..lo + 1000.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let norm = (2.0 / tones.len() as f64).sqrt();
    let burst = (0.3 * sr) as usize;
    let seconds = out.len() as f64 / sr;
    let count = ((seconds / 3.0).round() as usize).max(1);
    for _ in 0..count {
        let start = rng.random_range(0..out.len());
        for k in 0..burst.min(out.len() - start) {
            let t = (start + k) as f64 / sr;
            let v: f64 = tones.iter().map(|&(f, ph)| (2.0 * PI * f * t + ph).sin()).sum();
            out[start + k] += magnitude * norm * v;
        }
    }
}
