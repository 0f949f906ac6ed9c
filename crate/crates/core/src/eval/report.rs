use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{auroc, harmonic_or_zero, pauroc, split_by_truth};
use crate::anomaly::ScoredClip;
use crate::error::{Error, Result};
use crate::frontend::Domain;

/// Metrics of one (machine, section, domain) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub machine: String,
    pub section: String,
    pub domain: Domain,
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub auroc: f64,
    pub pauroc: f64,
}

/// Harmonic means over a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auroc: f64,
    pub pauroc: f64,
    /// Harmonic mean of every AUROC and pAUROC together.
    pub score: f64,
}

impl Aggregate {
    fn of<'a>(rows: impl Iterator<Item = &'a MetricRow> + Clone) -> Result<Self> {
        let a: Vec<f64> = rows.clone().map(|r| r.auroc).collect();
        let p: Vec<f64> = rows.map(|r| r.pauroc).collect();
        let both: Vec<f64> = a.iter().chain(&p).copied().collect();
        Ok(Self {
            auroc: harmonic_or_zero(&a)?,
            pauroc: harmonic_or_zero(&p)?,
            score: harmonic_or_zero(&both)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_fpr: f64,
    /// Sorted by machine, section, then domain.
    pub rows: Vec<MetricRow>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "scope",
    "machine",
    "section",
    "domain",
    "n_normal",
    "n_anomalous",
    "auroc",
    "pauroc",
    "score",
];

impl EvalReport {
    pub fn from_scores(scores: &[ScoredClip], max_fpr: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Data("no scored clips to evaluate".into()));
        }
        let mut groups: BTreeMap<(&str, &str, Domain), Vec<ScoredClip>> = BTreeMap::new();
        for s in scores {
            groups
                .entry((&s.machine, &s.section, s.domain))
                .or_default()
                .push(s.clone());
        }
        let rows = groups
            .into_iter()
            .map(|((machine, section, domain), clips)| {
                let (n, a) = split_by_truth(&clips)?;
                let ctx = |e: Error| Error::Data(format!("{machine}/{section}/{domain}: {e}"));
                Ok(MetricRow {
                    machine: machine.to_owned(),
                    section: section.to_owned(),
                    domain,
                    n_normal: n.len(),
                    n_anomalous: a.len(),
                    auroc: auroc(&n, &a).map_err(ctx)?,
                    pauroc: pauroc(&n, &a, max_fpr).map_err(ctx)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            max_fpr,
            rows,
            seed: None,
            config_hash: None,
        })
    }

    pub fn with_metadata(mut self, seed: Option<u64>, config_hash: Option<String>) -> Self {
        self.seed = seed;
        self.config_hash = config_hash;
        self
    }

    pub fn machines(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.rows.iter().map(|r| r.machine.as_str()).collect();
        m.dedup();
        m
    }

    /// Aggregate over all sections of all machines in `domain`.
    pub fn domain_aggregate(&self, domain: Domain) -> Option<Aggregate> {
        let rows = self.rows.iter().filter(move |r| r.domain == domain);
        rows.clone().next()?;
        Aggregate::of(rows).ok()
    }

    /// Aggregate over the sections of one machine in `domain`.
    pub fn machine_aggregate(&self, machine: &str, domain: Domain) -> Option<Aggregate> {
        let rows = self
            .rows
            .iter()
            .filter(move |r| r.domain == domain && r.machine == machine);
        rows.clone().next()?;
        Aggregate::of(rows).ok()
    }

    /// Harmonic mean of target-domain AUROC and pAUROC over every section.
    pub fn target_score(&self) -> Option<f64> {
        self.domain_aggregate(Domain::Target).map(|a| a.score)
    }

    /// Section rows, then per-machine and overall aggregates per domain.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                "section",
                &r.machine,
                &r.section,
                r.domain.as_str(),
                &r.n_normal.to_string(),
                &r.n_anomalous.to_string(),
                &r.auroc.to_string(),
                &r.pauroc.to_string(),
                "",
            ])?;
        }
        for domain in [Domain::Source, Domain::Target] {
            for m in self.machines() {
                if let Some(a) = self.machine_aggregate(m, domain) {
                    w.write_record(agg_record("machine", m, domain, &a))?;
                }
            }
            if let Some(a) = self.domain_aggregate(domain) {
                w.write_record(agg_record("overall", "", domain, &a))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        if let Some(h) = &self.config_hash {
            let _ = writeln!(s, "config: {h}");
        }
        let pa = format!("pAUROC@{}", self.max_fpr);
        let _ = writeln!(s, "{:<12} {:<10} {:<8} {:>7} {:>10}", "machine", "section", "domain", "AUROC", pa);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:<10} {:<8} {:>7.4} {:>10.4}",
                r.machine, r.section, r.domain, r.auroc, r.pauroc
            );
        }
        for domain in [Domain::Source, Domain::Target] {
            for m in self.machines() {
                if let Some(a) = self.machine_aggregate(m, domain) {
                    let _ = writeln!(s, "{:<12} {:<10} {:<8} {:>7.4} {:>10.4}", m, "hmean", domain, a.auroc, a.pauroc);
                }
            }
            if let Some(a) = self.domain_aggregate(domain) {
                let _ = writeln!(
                    s,
                    "{:<12} {:<10} {:<8} {:>7.4} {:>10.4}  score {:.4}",
                    "all", "hmean", domain, a.auroc, a.pauroc, a.score
                );
            }
        }
        s
    }
}

fn agg_record(scope: &str, machine: &str, domain: Domain, a: &Aggregate) -> [String; 9] {
    [
        scope.to_owned(),
        machine.to_owned(),
        String::new(),
        domain.as_str().to_owned(),
        String::new(),
        String::new(),
        a.auroc.to_string(),
        a.pauroc.to_string(),
        a.score.to_string(),
    ]
}
