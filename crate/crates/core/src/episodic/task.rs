use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// An auxiliary classification task over clip metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    /// Sorted class names; the position is the class index.
    pub classes: Vec<String>,
    /// Class index of every labeled training clip.
    pub label_of: BTreeMap<String, usize>,
}

impl TaskSpec {
    /// Build from `(clip_id, class_name)` pairs. Class indices follow the
    /// sorted class names.
    pub fn from_labels<'a>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let pairs: Vec<(&str, &str)> = labels.into_iter().collect();
        let mut classes: Vec<String> = pairs.iter().map(|(_, c)| c.to_string()).collect();
        classes.sort();
        classes.dedup();
        let label_of = pairs
            .iter()
            .map(|(id, c)| {
                let k = classes.binary_search_by(|x| x.as_str().cmp(c)).unwrap();
                (id.to_string(), k)
            })
            .collect();
        Self {
            name: name.into(),
            classes,
            label_of,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::Data(format!("task `{}` has no class `{class}`", self.name)))
    }

    /// Clip ids per class, in clip-id order.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.classes.len()];
        for (id, &k) in &self.label_of {
            out[k].push(id.as_str());
        }
        out
    }

    /// Fail with the first class that cannot fill `per_class` clips.
    pub fn check_capacity(&self, per_class: usize) -> Result<()> {
        for (k, m) in self.members().iter().enumerate() {
            if m.len() < per_class {
                return Err(Error::InsufficientClips {
                    task: self.name.clone(),
                    class: self.classes[k].clone(),
                    available: m.len(),
                    required: per_class,
                });
            }
        }
        Ok(())
    }
}
