//! Small in-memory fixtures shared by unit tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::benchgen::{ClipMeta, FeaturedClip, MachineData, Split, SECTION_TASK};
use crate::episodic::TaskSpec;
use crate::frontend::{Condition, Domain, LogMel};

pub(crate) const N_MELS: usize = 4;
pub(crate) const N_FRAMES: usize = 6;
pub(crate) const CONTEXT: usize = 4;
pub(crate) const SHIFT: usize = 2;
pub(crate) const WINDOW_DIM: usize = CONTEXT * N_MELS;

fn toy_logmel(rng: &mut ChaCha8Rng, class: usize, anomalous: bool) -> LogMel {
    let values = (0..N_FRAMES * N_MELS)
        .map(|i| {
            let bin = i % N_MELS;
            let mut v = 0.3 * rng.sample::<f64, _>(StandardNormal);
            if bin == class % N_MELS {
                v += 2.0;
            }
            if anomalous && bin == N_MELS - 1 {
                v += 3.0;
            }
            v
        })
        .collect();
    LogMel {
        n_frames: N_FRAMES,
        n_mels: N_MELS,
        values,
    }
}

/// A two-section machine with a second two-class attribute. Sections differ
/// in which mel bin is raised; anomalies raise the top bin.
pub(crate) fn toy_machine(seed: u64, train_per_class: usize) -> MachineData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clips = Vec::new();
    let mut push = |rng: &mut ChaCha8Rng, section: usize, split: Split, domain: Domain, condition: Condition, i: usize| {
        let clip_id = format!("toy_{section:02}_{domain}_{split}_{condition}_{i:04}");
        let mut attributes = BTreeMap::new();
        attributes.insert("attr".to_owned(), if i % 2 == 0 { "a" } else { "b" }.to_owned());
        let meta = ClipMeta {
            clip_id,
            machine: "toy".into(),
            section: format!("{section:02}"),
            domain,
            split,
            condition,
            attributes,
        };
        let logmel = toy_logmel(rng, section, condition == Condition::Anomalous);
        clips.push(FeaturedClip::new(meta, logmel, CONTEXT, SHIFT).unwrap());
    };
    for section in 0..2 {
        for i in 0..train_per_class {
            push(&mut rng, section, Split::Train, Domain::Source, Condition::Normal, i);
        }
        push(&mut rng, section, Split::Fewshot, Domain::Target, Condition::Normal, 0);
        for (i, condition) in [Condition::Normal, Condition::Normal, Condition::Anomalous, Condition::Anomalous]
            .into_iter()
            .enumerate()
        {
            push(&mut rng, section, Split::Test, Domain::Target, condition, i);
        }
    }
    let train: Vec<&FeaturedClip> = clips.iter().filter(|c| c.meta.split == Split::Train).collect();
    let tasks = [SECTION_TASK, "attr"]
        .iter()
        .map(|&name| {
            TaskSpec::from_labels(
                name,
                train
                    .iter()
                    .map(|c| (c.meta.clip_id.as_str(), c.meta.label(name).unwrap())),
            )
        })
        .collect();
    MachineData {
        machine: "toy".into(),
        clips,
        tasks,
    }
}
