use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use super::dataset::{Split, METADATA_FILE};
use super::spec::{BenchmarkSpec, SectionSpec};
use super::synth::{clip_rng, synthesize, ClipPlan};
use crate::error::{Error, Result};
use crate::frontend::{write_pcm16_mono, Condition, Domain};

/// A clip to be synthesized, with its metadata row.
#[derive(Debug, Clone)]
pub struct PlannedClip {
    pub clip_id: String,
    pub machine: String,
    pub machine_index: usize,
    pub section_index: usize,
    pub split: Split,
    pub condition: Condition,
    pub plan: ClipPlan,
}

impl PlannedClip {
    pub fn relative_path(&self) -> PathBuf {
        audio_path(&self.machine, &self.clip_id)
    }
}

pub(crate) fn audio_path(machine: &str, clip_id: &str) -> PathBuf {
    Path::new(machine).join(format!("{clip_id}.wav"))
}

/// Every clip of the benchmark in metadata order.
pub fn plan_clips(spec: &BenchmarkSpec) -> Vec<PlannedClip> {
    let c = &spec.counts;
    let mut out = Vec::new();
    for (mi, m) in spec.machines.iter().enumerate() {
        for (si, s) in m.sections.iter().enumerate() {
            let kinds = s.anomaly_injection.enabled();
            let mut push = |split: Split, domain: Domain, condition: Condition, idx: usize| {
                let clip_id = format!(
                    "{}_{}_{}_{}_{}_{idx:04}",
                    m.name, s.section_id, domain, split, condition
                );
                let mut rng = clip_rng(spec.seed, &format!("{clip_id}/plan"));
                let levels = s
                    .attributes
                    .iter()
                    .map(|a| rng.random_range(0..a.classes.len()))
                    .collect();
                let anomaly = (condition == Condition::Anomalous).then(|| kinds[idx % kinds.len()]);
                out.push(PlannedClip {
                    clip_id,
                    machine: m.name.clone(),
                    machine_index: mi,
                    section_index: si,
                    split,
                    condition,
                    plan: ClipPlan {
                        domain,
                        levels,
                        anomaly,
                    },
                });
            };
            for i in 0..c.train_source {
                push(Split::Train, Domain::Source, Condition::Normal, i);
            }
            for i in 0..c.fewshot_target {
                push(Split::Fewshot, Domain::Target, Condition::Normal, i);
            }
            for domain in [Domain::Source, Domain::Target] {
                for i in 0..c.test_normal_per_domain {
                    push(Split::Test, domain, Condition::Normal, i);
                }
                for i in 0..c.test_anomalous_per_domain {
                    push(Split::Test, domain, Condition::Anomalous, i);
                }
            }
        }
    }
    out
}

pub fn clip_samples(spec: &BenchmarkSpec, clip: &PlannedClip) -> Vec<f64> {
    let section: &SectionSpec = &spec.machines[clip.machine_index].sections[clip.section_index];
    let n = (spec.clip_seconds * f64::from(spec.sample_rate)).round() as usize;
    let mut rng = clip_rng(spec.seed, &clip.clip_id);
    synthesize(section, &clip.plan, n, spec.sample_rate, &mut rng)
}

/// Sorted union of attribute names across all sections.
pub fn attribute_columns(spec: &BenchmarkSpec) -> Vec<String> {
    let set: BTreeSet<&str> = spec
        .machines
        .iter()
        .flat_map(|m| &m.sections)
        .flat_map(|s| &s.attributes)
        .map(|a| a.task.as_str())
        .collect();
    set.into_iter().map(str::to_owned).collect()
}

/// Write WAV clips, `metadata.csv` and a copy of the benchmark definition under `out_dir`.
pub fn generate(spec: &BenchmarkSpec, out_dir: &Path) -> Result<()> {
    spec.validate()?;
    let clips = plan_clips(spec);
    for m in &spec.machines {
        let d = out_dir.join(&m.name);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    clips.par_iter().try_for_each(|clip| {
        let samples = clip_samples(spec, clip);
        write_pcm16_mono(&out_dir.join(clip.relative_path()), &samples, spec.sample_rate)
    })?;

    let attrs = attribute_columns(spec);
    let meta_path = out_dir.join(METADATA_FILE);
    let csv_err = |source| Error::Csv {
        path: meta_path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&meta_path).map_err(csv_err)?;
    let mut header = vec!["clip_id", "machine", "section", "domain", "split", "condition"];
    header.extend(attrs.iter().map(String::as_str));
    w.write_record(&header).map_err(csv_err)?;
    for clip in &clips {
        let section = &spec.machines[clip.machine_index].sections[clip.section_index];
        let mut row = vec![
            clip.clip_id.clone(),
            clip.machine.clone(),
            section.section_id.clone(),
            clip.plan.domain.to_string(),
            clip.split.to_string(),
            clip.condition.to_string(),
        ];
        for name in &attrs {
            let value = section
                .attributes
                .iter()
                .zip(&clip.plan.levels)
                .find(|(a, _)| &a.task == name)
                .map(|(a, &l)| a.classes[l].clone())
                .unwrap_or_default();
            row.push(value);
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&meta_path, e))?;

    let spec_path = out_dir.join("benchmark.toml");
    fs::write(&spec_path, spec.to_toml_string()).map_err(|e| Error::io(&spec_path, e))?;
    Ok(())
}
