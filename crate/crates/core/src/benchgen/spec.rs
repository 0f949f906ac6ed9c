use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of a synthetic machine-sound benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub seed: u64,
    #[serde(default = "default_clip_seconds")]
    pub clip_seconds: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub counts: Counts,
    pub machines: Vec<MachineSpec>,
}

fn default_clip_seconds() -> f64 {
    10.0
}

fn default_sample_rate() -> u32 {
    16_000
}

/// Clips per section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Counts {
    pub train_source: usize,
    pub fewshot_target: usize,
    pub test_normal_per_domain: usize,
    pub test_anomalous_per_domain: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Self {
            train_source: 100,
            fewshot_target: 3,
            test_normal_per_domain: 25,
            test_anomalous_per_domain: 25,
        }
    }
}

impl Counts {
    pub fn per_section(&self) -> usize {
        self.train_source + self.fewshot_target + 2 * (self.test_normal_per_domain + self.test_anomalous_per_domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub name: String,
    pub sections: Vec<SectionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub section_id: String,
    /// `(frequency Hz, amplitude)` of each partial of the machine hum.
    pub base_harmonics: Vec<(f64, f64)>,
    /// Auxiliary metadata attributes that vary from clip to clip.
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
    /// Harmonic-to-noise ratio of source-domain clips, dB.
    pub source_noise_snr: f64,
    pub target_shift: TargetShift,
    pub anomaly_injection: AnomalyInjection,
}

/// One metadata column. Each clip draws a level; level `i` applies the
/// effect `i` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub task: String,
    pub classes: Vec<String>,
    pub effect: AttributeEffect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttributeEffect {
    /// Multiply every partial frequency by `(1 + step)^level`.
    Pitch { step: f64 },
    /// Scale partial `h` (0-based) by `10^(level * step_db * h / 20)`.
    Tilt { step_db: f64 },
    /// Amplitude modulation at `rate_hz * (level + 1)` with the given depth.
    Modulation { rate_hz: f64, depth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetShift {
    #[serde(default = "one")]
    pub pitch_ratio: f64,
    #[serde(default)]
    pub noise_snr_delta: f64,
    /// Extra stationary `(frequency Hz, amplitude)` tone.
    #[serde(default)]
    pub extra_tone: Option<(f64, f64)>,
}

fn one() -> f64 {
    1.0
}

/// Anomaly types and their magnitudes; zero disables a type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalyInjection {
    /// Peak amplitude of short decaying clicks.
    pub transient_clicks: f64,
    /// Relative frequency offset applied to every other partial.
    pub harmonic_detune: f64,
    /// Amplitude of band-limited noise bursts.
    pub band_noise_burst: f64,
}

impl Default for AnomalyInjection {
    fn default() -> Self {
        Self {
            transient_clicks: 0.6,
            harmonic_detune: 0.06,
            band_noise_burst: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Clicks,
    Detune,
    BandNoise,
}

impl AnomalyInjection {
    pub fn enabled(&self) -> Vec<AnomalyKind> {
        let mut v = Vec::new();
        if self.transient_clicks > 0.0 {
            v.push(AnomalyKind::Clicks);
        }
        if self.harmonic_detune > 0.0 {
            v.push(AnomalyKind::Detune);
        }
        if self.band_noise_burst > 0.0 {
            v.push(AnomalyKind::BandNoise);
        }
        v
    }
}

impl BenchmarkSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("benchmark spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.clip_seconds > 0.0) {
            return bad(format!("clip_seconds must be positive, got {}", self.clip_seconds));
        }
        if self.sample_rate < 1000 {
            return bad(format!("sample_rate {} too low", self.sample_rate));
        }
        let c = &self.counts;
        for (name, v) in [
            ("train_source", c.train_source),
            ("fewshot_target", c.fewshot_target),
            ("test_normal_per_domain", c.test_normal_per_domain),
            ("test_anomalous_per_domain", c.test_anomalous_per_domain),
        ] {
            if v == 0 {
                return bad(format!("counts.{name} must be at least 1"));
            }
        }
        if self.machines.is_empty() {
            return bad("no machines".into());
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        let mut names: Vec<&str> = self.machines.iter().map(|m| m.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate machine names".into());
        }
        for m in &self.machines {
            if m.name.is_empty() || m.name.contains(['/', '\\', ',']) {
                return bad(format!("invalid machine name `{}`", m.name));
            }
            if m.sections.is_empty() {
                return bad(format!("machine `{}` has no sections", m.name));
            }
            let mut ids: Vec<&str> = m.sections.iter().map(|s| s.section_id.as_str()).collect();
            ids.sort();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("machine `{}` repeats a section id", m.name));
            }
            for s in &m.sections {
                let here = format!("{}/{}", m.name, s.section_id);
                if s.section_id.is_empty() || s.section_id.contains(['/', '\\', ',', '_']) {
                    return bad(format!("{here}: invalid section id"));
                }
                if s.base_harmonics.is_empty() {
                    return bad(format!("{here}: no base harmonics"));
                }
                if s.base_harmonics.iter().any(|&(f, a)| !(f > 0.0 && f < nyquist) || !(a >= 0.0)) {
                    return bad(format!("{here}: harmonic outside (0, Nyquist) or negative amplitude"));
                }
                let t = &s.target_shift;
                if !(t.pitch_ratio > 0.0) {
                    return bad(format!("{here}: pitch_ratio must be positive"));
                }
                if t.pitch_ratio == 1.0 && t.noise_snr_delta == 0.0 && t.extra_tone.is_none() {
                    return bad(format!("{here}: target domain must differ from source"));
                }
                if s.anomaly_injection.enabled().is_empty() {
                    return bad(format!("{here}: every anomaly magnitude is zero"));
                }
                for a in &s.attributes {
                    if a.task == "section" || a.task.is_empty() || a.task.contains(',') {
                        return bad(format!("{here}: invalid attribute name `{}`", a.task));
                    }
                    if a.classes.is_empty() {
                        return bad(format!("{here}: attribute `{}` has no classes", a.task));
                    }
                }
            }
        }
        Ok(())
    }

    /// Two machines with two sections each, sized for a laptop.
    pub fn desk_default() -> Self {
        let speed = |step| AttributeSpec {
            task: "speed".into(),
            classes: vec!["low".into(), "mid".into(), "high".into()],
            effect: AttributeEffect::Pitch { step },
        };
        let load = || AttributeSpec {
            task: "load".into(),
            classes: vec!["light".into(), "heavy".into()],
            effect: AttributeEffect::Tilt { step_db: 1.0 },
        };
        // Sections of one machine share a pitch range and differ in a fixed
        // random spectral fingerprint spread over many harmonics, so telling
        // them apart relies on detail that anomalies disturb.
        let section = |machine: &str, id: &str, f0: f64, pitch: f64, attributes| {
            let mut rng = super::synth::clip_rng(0, &format!("{machine}/{id}/fingerprint"));
            let n = (6000.0 / f0) as usize;
            SectionSpec {
                section_id: id.into(),
                base_harmonics: (1..=n)
                    .map(|h| {
                        let db: f64 = rng.random_range(-12.0..12.0);
                        (f0 * h as f64, 10f64.powf(db / 20.0) / (h as f64).sqrt())
                    })
                    .collect(),
                attributes,
                source_noise_snr: 20.0,
                target_shift: TargetShift {
                    pitch_ratio: pitch,
                    noise_snr_delta: -6.0,
                    extra_tone: None,
                },
                anomaly_injection: AnomalyInjection::default(),
            }
        };
        Self {
            seed: 20_211_001,
            clip_seconds: 10.0,
            sample_rate: 16_000,
            counts: Counts::default(),
            machines: vec![
                MachineSpec {
                    name: "fan".into(),
                    sections: vec![
                        section("fan", "00", 150.0, 1.04, vec![speed(0.005), load()]),
                        section("fan", "01", 153.0, 0.96, vec![speed(0.005), load()]),
                    ],
                },
                MachineSpec {
                    name: "pump".into(),
                    sections: vec![
                        section("pump", "00", 220.0, 1.05, vec![speed(0.005)]),
                        section("pump", "01", 225.0, 0.95, vec![speed(0.005)]),
                    ],
                },
            ],
        }
    }
}
