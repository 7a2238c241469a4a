//! Training dynamics: per-epoch logits, area-under-the-margin scores and
//! data-map statistics.
//!
//! The dynamics log is JSONL with one object per (sample, epoch):
//!
//! ```text
//! {"sample_id":"s1","epoch":0,"logits":[0.12,-0.40]}
//! ```
//!
//! Epochs are 0-indexed and must form the same contiguous range for every
//! sample. The built-in trainer writes this format and external trainers can
//! produce it to reuse the rest of the pipeline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, softmax};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLine {
    pub sample_id: String,
    pub epoch: usize,
    pub logits: Vec<f64>,
}

/// Per-sample logit trajectories keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTable {
    entries: BTreeMap<String, BTreeMap<usize, Vec<f64>>>,
    logit_len: usize,
}

impl DynamicsTable {
    pub fn new(logit_len: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            logit_len,
        }
    }

    /// Records the logits of `id` at `epoch`.
    pub fn record(&mut self, id: &str, epoch: usize, logits: Vec<f64>) -> Result<()> {
        if logits.len() != self.logit_len {
            return Err(Error::LogitLength {
                id: id.to_string(),
                epoch,
                expected: self.logit_len,
                found: logits.len(),
            });
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteLogit {
                id: id.to_string(),
                epoch,
            });
        }
        let trajectory = self.entries.entry(id.to_string()).or_default();
        if trajectory.insert(epoch, logits).is_some() {
            return Err(Error::DuplicateEpoch {
                id: id.to_string(),
                epoch,
            });
        }
        Ok(())
    }

    pub fn logit_len(&self) -> usize {
        self.logit_len
    }

    /// One past the largest recorded epoch.
    pub fn num_epochs(&self) -> usize {
        self.entries
            .values()
            .filter_map(|t| t.keys().next_back())
            .max()
            .map_or(0, |e| e + 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// Logit vectors of one sample, epoch-ascending.
    pub fn trajectory(&self, id: &str) -> Option<Vec<&[f64]>> {
        self.entries
            .get(id)
            .map(|t| t.values().map(Vec::as_slice).collect())
    }

    /// Mean logit vector over recorded epochs.
    pub fn mean_logits(&self, id: &str) -> Option<Vec<f64>> {
        let t = self.entries.get(id)?;
        let mut mean = vec![0.0; self.logit_len];
        for z in t.values() {
            for (m, v) in mean.iter_mut().zip(z) {
                *m += v;
            }
        }
        let n = t.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Some(mean)
    }

    fn is_complete(&self, id: &str, num_epochs: usize) -> bool {
        self.entries
            .get(id)
            .is_some_and(|t| t.len() == num_epochs)
    }

    /// Checks that every sample has epochs `0..T` exactly once.
    pub fn validate(&self) -> Result<()> {
        let t = self.num_epochs();
        for (id, trajectory) in &self.entries {
            if let Some(missing) = (0..t).find(|e| !trajectory.contains_key(e)) {
                return Err(Error::MissingEpoch {
                    id: id.clone(),
                    epoch: missing,
                });
            }
        }
        Ok(())
    }

    /// Dynamics-log lines, epoch-major, samples by id within an epoch.
    pub fn lines(&self) -> Vec<DynamicsLine> {
        let mut out = Vec::new();
        for epoch in 0..self.num_epochs() {
            for (id, t) in &self.entries {
                if let Some(z) = t.get(&epoch) {
                    out.push(DynamicsLine {
                        sample_id: id.clone(),
                        epoch,
                        logits: z.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn write_jsonl(&self, out: &mut impl Write) -> Result<()> {
        let mut out = BufWriter::new(out);
        for line in self.lines() {
            serde_json::to_writer(&mut out, &line).map_err(|e| Error::Serialize(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::Serialize(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a dynamics log. With `allow_ragged`, samples may be
/// missing epochs; duplicates and bad vectors are still rejected.
pub fn ingest_dynamics(path: &Path, allow_ragged: bool) -> Result<DynamicsTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<DynamicsTable> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DynamicsLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let t = table.get_or_insert_with(|| DynamicsTable::new(rec.logits.len()));
        t.record(&rec.sample_id, rec.epoch, rec.logits)?;
    }
    let table = table.ok_or_else(|| Error::Empty(format!("{} has no dynamics records", path.display())))?;
    if table.logit_len < 2 {
        return Err(Error::invalid("logit vectors need at least 2 entries"));
    }
    if !allow_ragged {
        table.validate()?;
    }
    Ok(table)
}

/// `z[gold] − max_{k ≠ gold} z[k]` on raw logits.
pub fn margin(logits: &[f64], gold: usize) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::invalid(format!(
            "margin needs at least 2 logits, got {}",
            logits.len()
        )));
    }
    if gold >= logits.len() {
        return Err(Error::invalid(format!(
            "gold class {gold} outside {} logits",
            logits.len()
        )));
    }
    let other = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != gold)
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(logits[gold] - other)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AumRecord {
    pub sample_id: String,
    pub margins: Vec<f64>,
    /// Mean of `margins`.
    pub aum: f64,
    pub label_used: usize,
    /// Averaged over fewer epochs than the table holds.
    #[serde(default)]
    pub ragged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMapRecord {
    pub sample_id: String,
    pub confidence: f64,
    pub variability: f64,
    pub correctness: f64,
}

/// Options shared by [`compute_aum`] and [`compute_datamap`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DynamicsOptions {
    /// Average over the epochs present instead of rejecting ragged tables.
    pub allow_ragged: bool,
}

fn checked_trajectories<'a>(
    table: &'a DynamicsTable,
    labels: &BTreeMap<String, usize>,
    options: DynamicsOptions,
) -> Result<Vec<(&'a str, usize, Vec<&'a [f64]>, bool)>> {
    if !options.allow_ragged {
        table.validate()?;
    }
    let t = table.num_epochs();
    table
        .entries
        .iter()
        .map(|(id, traj)| {
            let y = *labels.get(id).ok_or_else(|| Error::MissingLabel(id.clone()))?;
            if y >= table.logit_len {
                return Err(Error::LabelOutOfRange {
                    id: id.clone(),
                    label: y,
                    num_classes: table.logit_len,
                });
            }
            let ragged = !table.is_complete(id, t);
            Ok((id.as_str(), y, traj.values().map(Vec::as_slice).collect(), ragged))
        })
        .collect()
}

/// One record per sample in the table, ordered by sample id.
pub fn compute_aum(
    table: &DynamicsTable,
    labels: &BTreeMap<String, usize>,
    options: DynamicsOptions,
) -> Result<Vec<AumRecord>> {
    checked_trajectories(table, labels, options)?
        .into_iter()
        .map(|(id, y, traj, ragged)| {
            let margins = traj
                .iter()
                .map(|z| margin(z, y))
                .collect::<Result<Vec<_>>>()?;
            let aum = margins.iter().sum::<f64>() / margins.len() as f64;
            Ok(AumRecord {
                sample_id: id.to_string(),
                margins,
                aum,
                label_used: y,
                ragged,
            })
        })
        .collect()
}

/// Confidence (mean gold probability), variability (population standard
/// deviation of the gold probability) and correctness (fraction of epochs
/// where the argmax logit is the gold label).
pub fn compute_datamap(
    table: &DynamicsTable,
    labels: &BTreeMap<String, usize>,
    options: DynamicsOptions,
) -> Result<Vec<DataMapRecord>> {
    Ok(checked_trajectories(table, labels, options)?
        .into_iter()
        .map(|(id, y, traj, _)| {
            let probs: Vec<f64> = traj.iter().map(|z| softmax(z)[y]).collect();
            let n = probs.len() as f64;
            let confidence = probs.iter().sum::<f64>() / n;
            let variance = probs.iter().map(|p| (p - confidence).powi(2)).sum::<f64>() / n;
            let correct = traj.iter().filter(|z| argmax(z) == y).count();
            DataMapRecord {
                sample_id: id.to_string(),
                confidence,
                variability: variance.sqrt(),
                correctness: correct as f64 / n,
            }
        })
        .collect())
}
