//! Dataset model and file I/O.
//!
//! Two on-disk encodings are supported:
//!
//! * TSV with header `id\ttext\tlabel`, GLUE style. Provenance is not stored.
//! * JSONL, one object per line with `id`, `text`, `label` and the optional
//!   `original_label`, `flags` and `cluster_id` keys.
//!
//! Datasets are values: every transformation elsewhere in the crate returns a
//! new `Dataset` and leaves its input untouched.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    num_classes: usize,
    fake_class_active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_names: Option<Vec<String>>,
}

impl LabelSpace {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "label space needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(Self {
            num_classes,
            fake_class_active: false,
            class_names: None,
        })
    }

    pub fn binary() -> Self {
        Self::new(2).expect("2 classes")
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::invalid(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    /// The same real classes with the fake class appended at index `num_classes`.
    pub fn with_fake_class(&self) -> Self {
        Self {
            fake_class_active: true,
            ..self.clone()
        }
    }

    /// The same real classes without the fake class.
    pub fn without_fake_class(&self) -> Self {
        Self {
            fake_class_active: false,
            ..self.clone()
        }
    }

    /// Number of real classes.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn fake_class_active(&self) -> bool {
        self.fake_class_active
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Real classes plus one when the fake class is active.
    pub fn effective_classes(&self) -> usize {
        self.num_classes + usize::from(self.fake_class_active)
    }

    pub fn fake_index(&self) -> Option<usize> {
        self.fake_class_active.then_some(self.num_classes)
    }

    pub fn is_binary(&self) -> bool {
        self.num_classes == 2
    }
}

/// Provenance markers carried by a sample through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    NoiseInjected,
    FakeAssignedRun1,
    FakeAssignedRun2,
    Flipped,
    Sieved,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::NoiseInjected => "noise_injected",
            Flag::FakeAssignedRun1 => "fake_assigned_run1",
            Flag::FakeAssignedRun2 => "fake_assigned_run2",
            Flag::Flipped => "flipped",
            Flag::Sieved => "sieved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub id: String,
    pub text: String,
    pub label: usize,
    /// Label at first load. Never overwritten by noise injection or flipping.
    pub original_label: usize,
    pub flags: BTreeSet<Flag>,
    /// Cluster membership, set by the clustered-corpus generator.
    pub cluster_id: Option<u32>,
}

impl LabeledSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: usize) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            original_label: label,
            flags: BTreeSet::new(),
            cluster_id: None,
        }
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Tsv,
    Jsonl,
}

impl DataFormat {
    /// Picks the format from a `.tsv` or `.jsonl` extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Ok(DataFormat::Tsv),
            Some("jsonl") => Ok(DataFormat::Jsonl),
            _ => Err(Error::invalid(format!(
                "cannot infer dataset format from {}",
                path.display()
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DataFormat::Tsv => "tsv",
            DataFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(DataFormat::Tsv),
            "jsonl" => Ok(DataFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown dataset format `{other}`"))),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    label_space: LabelSpace,
    split_name: String,
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness and that every label is a
    /// real class.
    pub fn new(
        samples: Vec<LabeledSample>,
        label_space: LabelSpace,
        split_name: impl Into<String>,
    ) -> Result<Self> {
        validate(&samples, label_space.num_classes())?;
        Ok(Self {
            samples,
            label_space,
            split_name: split_name.into(),
        })
    }

    /// Builds a view whose labels may use the fake class index. Only threshold
    /// runs create these; they are never written to disk by the pipeline.
    pub(crate) fn augmented(samples: Vec<LabeledSample>, label_space: LabelSpace, split: &str) -> Result<Self> {
        validate(&samples, label_space.effective_classes())?;
        Ok(Self {
            samples,
            label_space,
            split_name: split.to_string(),
        })
    }

    pub fn with_split_name(mut self, split_name: impl Into<String>) -> Self {
        self.split_name = split_name.into();
        self
    }

    /// Same metadata, new samples. Labels are revalidated.
    pub fn with_samples(&self, samples: Vec<LabeledSample>) -> Result<Self> {
        Dataset::new(samples, self.label_space.clone(), self.split_name.clone())
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn split_name(&self) -> &str {
        &self.split_name
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    /// Current label per sample id.
    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.samples
            .iter()
            .map(|s| (s.id.clone(), s.label))
            .collect()
    }

    /// Count of samples per current label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_space.effective_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Checks that every id in `ids` belongs to this dataset.
    pub fn check_ids<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Result<()> {
        let known: HashSet<&str> = self.samples.iter().map(|s| s.id.as_str()).collect();
        for id in ids {
            if !known.contains(id.as_str()) {
                return Err(Error::UnknownId(id.clone()));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledSample;
    type IntoIter = std::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

fn validate(samples: &[LabeledSample], limit: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(samples.len());
    for s in samples {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
        if s.label >= limit {
            return Err(Error::LabelOutOfRange {
                id: s.id.clone(),
                label: s.label,
                num_classes: limit,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
    label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original_label: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_id: Option<u32>,
}

pub const TSV_HEADER: &str = "id\ttext\tlabel";

/// Loads a dataset. When `num_classes` is `None` it is inferred as the
/// largest label plus one (at least 2).
pub fn load_dataset(path: &Path, format: DataFormat, num_classes: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let rows = match format {
        DataFormat::Tsv => read_tsv(path, reader)?,
        DataFormat::Jsonl => read_jsonl(path, reader)?,
    };

    let mut seen = HashSet::with_capacity(rows.len());
    for (line, sample) in &rows {
        if !seen.insert(sample.id.as_str()) {
            return Err(Error::parse(path, *line, format!("duplicate sample id `{}`", sample.id)));
        }
    }

    let inferred = rows
        .iter()
        .map(|(_, s)| s.label.max(s.original_label) + 1)
        .max()
        .unwrap_or(2)
        .max(2);
    let c = num_classes.unwrap_or(inferred);
    let label_space = LabelSpace::new(c)?;
    for (line, s) in &rows {
        for label in [s.label, s.original_label] {
            if label >= c {
                return Err(Error::parse(
                    path,
                    *line,
                    format!("sample `{}`: label {label} out of range for {c} classes", s.id),
                ));
            }
        }
    }

    Dataset::new(rows.into_iter().map(|(_, s)| s).collect(), label_space, "train")
}

fn read_tsv(path: &Path, reader: impl BufRead) -> Result<Vec<(usize, LabeledSample)>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Err(Error::Empty(format!("{} has no header", path.display()))),
        Some(line) => line.map_err(|e| Error::io(path, e))?,
    };
    if header.trim_end_matches('\r') != TSV_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{}`", TSV_HEADER.escape_default())));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let label = parse_label(fields[2].trim()).map_err(|m| Error::parse(path, lineno, m))?;
        rows.push((lineno, LabeledSample::new(fields[0], fields[1], label)));
    }
    Ok(rows)
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<(usize, LabeledSample)>> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let label = to_label(record.label).map_err(|m| Error::parse(path, lineno, m))?;
        let original_label = match record.original_label {
            Some(l) => to_label(l).map_err(|m| Error::parse(path, lineno, m))?,
            None => label,
        };
        rows.push((
            lineno,
            LabeledSample {
                id: record.id,
                text: record.text,
                label,
                original_label,
                flags: record.flags.into_iter().collect(),
                cluster_id: record.cluster_id,
            },
        ));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no records", path.display())));
    }
    Ok(rows)
}

fn parse_label(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("label `{s}` is not a non-negative integer"))
}

fn to_label(v: i64) -> std::result::Result<usize, String> {
    usize::try_from(v).map_err(|_| format!("label {v} is negative"))
}

/// Writes a dataset. TSV drops provenance (original labels, flags, cluster
/// ids) and logs a warning when that loses information.
pub fn save_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf, format)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Serializes a dataset into any writer.
pub fn write_dataset(dataset: &Dataset, out: &mut impl Write, format: DataFormat) -> Result<()> {
    let mut out = BufWriter::new(out);
    let io = |e: std::io::Error| Error::Serialize(e.to_string());
    match format {
        DataFormat::Tsv => {
            let lossy = dataset
                .iter()
                .any(|s| !s.flags.is_empty() || s.original_label != s.label || s.cluster_id.is_some());
            if lossy {
                log::warn!("TSV output drops flags, original labels and cluster ids");
            }
            writeln!(out, "{TSV_HEADER}").map_err(io)?;
            for s in dataset {
                if s.text.contains(['\t', '\n', '\r']) || s.id.contains(['\t', '\n', '\r']) {
                    return Err(Error::invalid(format!(
                        "sample `{}` contains a tab or newline and cannot be written as TSV",
                        s.id
                    )));
                }
                writeln!(out, "{}\t{}\t{}", s.id, s.text, s.label).map_err(io)?;
            }
        }
        DataFormat::Jsonl => {
            for s in dataset {
                let record = JsonlRecord {
                    id: s.id.clone(),
                    text: s.text.clone(),
                    label: s.label as i64,
                    original_label: Some(s.original_label as i64),
                    flags: s.flags.iter().copied().collect(),
                    cluster_id: s.cluster_id,
                };
                let line = serde_json::to_string(&record).map_err(|e| Error::Serialize(e.to_string()))?;
                writeln!(out, "{line}").map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}
