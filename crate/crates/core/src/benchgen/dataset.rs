use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::generate::audio_path;
use crate::episodic::TaskSpec;
use crate::error::{Error, Result};
use crate::frontend::{read_pcm16_mono, AudioClip, Condition, Domain, Featurizer, LogMel};

pub const METADATA_FILE: &str = "metadata.csv";
pub const SECTION_TASK: &str = "section";
const FIXED_COLUMNS: [&str; 6] = ["clip_id", "machine", "section", "domain", "split", "condition"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Fewshot,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Fewshot => "fewshot",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "fewshot" => Ok(Split::Fewshot),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

/// One metadata row.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMeta {
    pub clip_id: String,
    pub machine: String,
    pub section: String,
    pub domain: Domain,
    pub split: Split,
    pub condition: Condition,
    /// Non-empty auxiliary attribute values.
    pub attributes: BTreeMap<String, String>,
}

impl ClipMeta {
    /// Class of this clip under an auxiliary task.
    pub fn label(&self, task: &str) -> Option<&str> {
        if task == SECTION_TASK {
            Some(&self.section)
        } else {
            self.attributes.get(task).map(String::as_str)
        }
    }
}

/// A loaded benchmark directory: metadata plus derived auxiliary tasks.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub clips: Vec<ClipMeta>,
    pub attribute_columns: Vec<String>,
    /// Usable tasks per machine; the section task always comes first.
    pub tasks: BTreeMap<String, Vec<TaskSpec>>,
    pub warnings: Vec<String>,
}

/// Read `metadata.csv`, check every referenced WAV exists and derive one
/// task per attribute column for each machine.
pub fn load(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join(METADATA_FILE);
    if !meta_path.is_file() {
        return Err(Error::Data(format!("{} not found", meta_path.display())));
    }
    let csv_err = |source| Error::Csv {
        path: meta_path.clone(),
        source,
    };
    let mut reader = csv::Reader::from_path(&meta_path).map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Data(format!(
            "{}: header must start with {}",
            meta_path.display(),
            FIXED_COLUMNS.join(",")
        )));
    }
    let attribute_columns = header[FIXED_COLUMNS.len()..].to_vec();

    let mut clips = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let clip_id = field(0).to_owned();
        if clip_id.is_empty() || !seen.insert(clip_id.clone()) {
            return Err(Error::Data(format!("row {}: empty or duplicate clip_id `{clip_id}`", line + 2)));
        }
        let attributes = attribute_columns
            .iter()
            .enumerate()
            .filter_map(|(j, name)| {
                let v = field(FIXED_COLUMNS.len() + j);
                (!v.is_empty()).then(|| (name.clone(), v.to_owned()))
            })
            .collect();
        let meta = ClipMeta {
            machine: field(1).to_owned(),
            section: field(2).to_owned(),
            domain: field(3).parse()?,
            split: field(4).parse()?,
            condition: field(5).parse()?,
            attributes,
            clip_id,
        };
        validate_row(&meta)?;
        let wav = dir.join(audio_path(&meta.machine, &meta.clip_id));
        if !wav.is_file() {
            return Err(Error::Data(format!(
                "clip `{}` references missing audio {}",
                meta.clip_id,
                wav.display()
            )));
        }
        clips.push(meta);
    }
    if clips.is_empty() {
        return Err(Error::Data(format!("{} has no clips", meta_path.display())));
    }

    let mut tasks = BTreeMap::new();
    let mut warnings = Vec::new();
    let machines: BTreeSet<&str> = clips.iter().map(|c| c.machine.as_str()).collect();
    for machine in machines {
        let train: Vec<&ClipMeta> = clips
            .iter()
            .filter(|c| c.machine == machine && c.split == Split::Train)
            .collect();
        if train.is_empty() {
            return Err(Error::Data(format!("machine `{machine}` has no training clips")));
        }
        let mut specs = Vec::new();
        for name in std::iter::once(SECTION_TASK).chain(attribute_columns.iter().map(String::as_str)) {
            let labeled: Vec<(&str, &str)> = train
                .iter()
                .filter_map(|c| c.label(name).map(|l| (c.clip_id.as_str(), l)))
                .collect();
            if labeled.is_empty() {
                continue;
            }
            let task = TaskSpec::from_labels(name, labeled);
            if task.num_classes() < 2 {
                let msg = format!(
                    "machine `{machine}`: task `{name}` has a single class and is excluded"
                );
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            specs.push(task);
        }
        tasks.insert(machine.to_owned(), specs);
    }

    Ok(Dataset {
        root: dir.to_path_buf(),
        clips,
        attribute_columns,
        tasks,
        warnings,
    })
}

fn validate_row(m: &ClipMeta) -> Result<()> {
    let bad = |why: &str| Err(Error::Data(format!("clip `{}`: {why}", m.clip_id)));
    if m.machine.is_empty() || m.section.is_empty() {
        return bad("machine and section are required");
    }
    match (m.split, m.domain, m.condition) {
        (Split::Train, _, Condition::Normal) => Ok(()),
        (Split::Train, _, _) => bad("training clips must be normal"),
        (Split::Fewshot, Domain::Target, Condition::Normal) => Ok(()),
        (Split::Fewshot, _, _) => bad("few-shot clips must be normal target-domain clips"),
        (Split::Test, _, _) => Ok(()),
    }
}

impl Dataset {
    pub fn machines(&self) -> Vec<&str> {
        self.tasks.keys().map(String::as_str).collect()
    }

    pub fn tasks_for(&self, machine: &str) -> Result<&[TaskSpec]> {
        self.tasks
            .get(machine)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Data(format!("unknown machine `{machine}`")))
    }

    pub fn audio(&self, meta: &ClipMeta) -> Result<AudioClip> {
        let path = self.root.join(audio_path(&meta.machine, &meta.clip_id));
        let (samples, sample_rate) = read_pcm16_mono(&path)?;
        let mut labels: BTreeMap<String, String> = meta.attributes.clone();
        labels.insert(SECTION_TASK.into(), meta.section.clone());
        Ok(AudioClip {
            clip_id: meta.clip_id.clone(),
            samples,
            sample_rate,
            labels,
            domain: meta.domain,
            condition: meta.condition,
        })
    }

    /// Featurize the clips selected by `keep`, in metadata order.
    pub fn featurize_where(
        &self,
        featurizer: &Featurizer,
        keep: impl Fn(&ClipMeta) -> bool + Sync,
    ) -> Result<Vec<FeaturedClip>> {
        let selected: Vec<&ClipMeta> = self.clips.iter().filter(|c| keep(c)).collect();
        selected
            .par_iter()
            .map(|meta| {
                let audio = self.audio(meta)?;
                let logmel = featurizer.logmel(&audio)?;
                FeaturedClip::new((*meta).clone(), logmel, featurizer.config().context, featurizer.config().shift)
            })
            .collect()
    }

    /// All clips of one machine, featurized, with its tasks.
    pub fn machine_data(&self, machine: &str, featurizer: &Featurizer) -> Result<MachineData> {
        let tasks = self.tasks_for(machine)?.to_vec();
        let clips = self.featurize_where(featurizer, |c| c.machine == machine)?;
        Ok(MachineData {
            machine: machine.to_owned(),
            clips,
            tasks,
        })
    }
}

/// Log-mel features of one clip, cut into context windows on demand.
#[derive(Debug, Clone)]
pub struct FeaturedClip {
    pub meta: ClipMeta,
    pub logmel: LogMel,
    context: usize,
    shift: usize,
    n_windows: usize,
}

impl FeaturedClip {
    pub fn new(meta: ClipMeta, logmel: LogMel, context: usize, shift: usize) -> Result<Self> {
        let n_windows = crate::frontend::window_count(logmel.n_frames, context, shift)
            .map_err(|e| Error::Data(format!("clip `{}`: {e}", meta.clip_id)))?;
        Ok(Self {
            meta,
            logmel,
            context,
            shift,
            n_windows,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    /// Window `w` as a contiguous `context × n_mels` slice.
    pub fn window(&self, w: usize) -> &[f64] {
        let m = self.logmel.n_mels;
        let start = w * self.shift * m;
        &self.logmel.values[start..start + self.context * m]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_windows).map(move |w| self.window(w))
    }

    pub fn window_dim(&self) -> usize {
        self.context * self.logmel.n_mels
    }
}

/// Everything needed to train and evaluate one machine's model.
#[derive(Debug, Clone)]
pub struct MachineData {
    pub machine: String,
    pub clips: Vec<FeaturedClip>,
    pub tasks: Vec<TaskSpec>,
}

impl MachineData {
    pub fn clip(&self, clip_id: &str) -> Option<&FeaturedClip> {
        self.clips.iter().find(|c| c.meta.clip_id == clip_id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &FeaturedClip> {
        self.clips.iter().filter(move |c| c.meta.split == split)
    }

    pub fn window_dim(&self) -> Option<usize> {
        self.clips.first().map(FeaturedClip::window_dim)
    }

    pub fn task(&self, name: &str) -> Result<&TaskSpec> {
        self.tasks
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Data(format!("machine `{}` has no task `{name}`", self.machine)))
    }

    /// Training clip indices per class of `task`, in clip order.
    pub fn class_pools(&self, task: &TaskSpec) -> Vec<Vec<usize>> {
        let mut pools = vec![Vec::new(); task.num_classes()];
        for (i, c) in self.clips.iter().enumerate() {
            if c.meta.split != Split::Train {
                continue;
            }
            if let Some(&k) = task.label_of.get(&c.meta.clip_id) {
                pools[k].push(i);
            }
        }
        pools
    }
}
