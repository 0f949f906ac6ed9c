use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Normal,
    Anomalous,
    Unknown,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Anomalous => "anomalous",
            Condition::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::Data(format!("unknown domain `{other}`"))),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "normal" => Ok(Condition::Normal),
            "anomalous" | "anomaly" => Ok(Condition::Anomalous),
            "unknown" => Ok(Condition::Unknown),
            other => Err(Error::Data(format!("unknown condition `{other}`"))),
        }
    }
}

/// Mono audio with its metadata.
#[derive(Debug, Clone)]
pub struct AudioClip {
    pub clip_id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Auxiliary task name to class name.
    pub labels: BTreeMap<String, String>,
    pub domain: Domain,
    pub condition: Condition,
}

impl AudioClip {
    pub fn new(clip_id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            clip_id: clip_id.into(),
            samples,
            sample_rate,
            labels: BTreeMap::new(),
            domain: Domain::Source,
            condition: Condition::Unknown,
        }
    }
}
