//! Sieving, flipping and end-to-end experiments.
//!
//! An experiment runs: optional noise injection into the training split,
//! two fake-class threshold runs, two-run verdicts at a percentile, the
//! filter action, a fresh retrain and an evaluation on the untouched
//! validation split. Every random stream comes from [`StageSeeds`].
//!
//! Results directory layout:
//!
//! ```text
//! manifest.json          seeds, config echo, both threshold-run manifests
//! dynamics_run1.jsonl    dynamics log of threshold run 1
//! dynamics_run2.jsonl    dynamics log of threshold run 2
//! train_input.jsonl      training split after noise injection
//! noise_mask.json        only when noise was injected
//! flags.csv              one governing verdict per training sample
//! filtered.{tsv|jsonl}   training split after the action
//! sieved_audit.jsonl     only for sieve: removed samples, flagged `sieved`
//! result.json            ExperimentResult
//! ```
//!
//! A sweep writes the threshold artefacts once, `sweep.csv` at the top, and
//! `flags.csv`, `filtered.*` and `result.json` under one `p<percentile>/`
//! directory per percentile. Multi-seed sweeps nest each replicate under
//! `rep<k>/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, write_dataset, DataFormat, Dataset, Flag, LabeledSample};
use crate::dynamics::{compute_datamap, AumRecord, DataMapRecord, DynamicsOptions};
use crate::error::{Error, Result};
use crate::io::{create_dir, csv_bytes_with_header, to_json_bytes, write_bytes};
use crate::model::{argmax, evaluate};
use crate::noise::{inject_noise, score_noise_identification, NoiseMask, NoiseReport, NoiseSampling};
use crate::seed::{replicate, StageSeeds};
use crate::threshold::{check_percentile, execute_threshold_run, two_run_verdicts, ThresholdManifest, ThresholdRun, Verdicts};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    #[default]
    Sieve,
    Flip,
    None,
}

impl FromStr for ActionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sieve" => Ok(ActionKind::Sieve),
            "flip" => Ok(ActionKind::Flip),
            "none" => Ok(ActionKind::None),
            other => Err(Error::invalid(format!("unknown action `{other}`"))),
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ActionKind::Sieve => "sieve",
            ActionKind::Flip => "flip",
            ActionKind::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterAction {
    pub kind: ActionKind,
    pub flagged_ids: BTreeSet<String>,
    pub percentile_used: f64,
}

/// Drops flagged samples. Returns the kept dataset and the removed samples,
/// each marked `sieved`, for an audit sidecar.
pub fn sieve(dataset: &Dataset, flagged: &BTreeSet<String>) -> Result<(Dataset, Vec<LabeledSample>)> {
    dataset.check_ids(flagged)?;
    let (removed, kept): (Vec<LabeledSample>, Vec<LabeledSample>) =
        dataset.iter().cloned().partition(|s| flagged.contains(&s.id));
    if kept.is_empty() && !removed.is_empty() {
        log::warn!("sieving removed every sample of split `{}`", dataset.split_name());
    }
    let audit = removed
        .into_iter()
        .map(|mut s| {
            s.flags.insert(Flag::Sieved);
            s
        })
        .collect();
    Ok((dataset.with_samples(kept)?, audit))
}

/// Binary label rectification: flagged labels become `1 − y`.
pub fn flip(dataset: &Dataset, flagged: &BTreeSet<String>) -> Result<Dataset> {
    if !dataset.label_space().is_binary() {
        return Err(Error::invalid(
            "flipping needs a binary label space; use flip_multiclass for more classes",
        ));
    }
    relabel(dataset, flagged, |s| Ok(1 - s.label))
}

/// Multi-class extension of [`flip`]: each flagged sample moves to the
/// non-assigned real class with the highest mean logit over epochs.
pub fn flip_multiclass(
    dataset: &Dataset,
    flagged: &BTreeSet<String>,
    mean_logits: &BTreeMap<String, Vec<f64>>,
) -> Result<Dataset> {
    let c = dataset.label_space().num_classes();
    relabel(dataset, flagged, |s| {
        let z = mean_logits.get(&s.id).ok_or_else(|| Error::UnknownId(s.id.clone()))?;
        if z.len() < c {
            return Err(Error::invalid(format!("sample `{}` has {} mean logits", s.id, z.len())));
        }
        let mut real: Vec<f64> = z[..c].to_vec();
        real[s.label] = f64::NEG_INFINITY;
        Ok(argmax(&real))
    })
}

fn relabel(
    dataset: &Dataset,
    flagged: &BTreeSet<String>,
    new_label: impl Fn(&LabeledSample) -> Result<usize>,
) -> Result<Dataset> {
    dataset.check_ids(flagged)?;
    let samples = dataset
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if flagged.contains(&s.id) {
                s.label = new_label(&s)?;
                s.flags.insert(Flag::Flipped);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.with_samples(samples)
}

/// Experiment settings. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_path: Option<PathBuf>,
    pub validation_path: Option<PathBuf>,
    /// Overrides the format inferred from the file extension.
    pub format: Option<String>,
    pub num_classes: Option<usize>,
    pub noise_rate: f64,
    pub stratified_noise: bool,
    pub master_seed: u64,
    pub action: ActionKind,
    pub percentile: f64,
    pub percentiles: Vec<f64>,
    pub fake_fraction: Option<f64>,
    pub num_seeds: usize,
    /// Enables [`flip_multiclass`] when the label space has more than two classes.
    pub multiclass_flip: bool,
    pub output_dir: Option<PathBuf>,
    pub output_format: String,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_path: None,
            validation_path: None,
            format: None,
            num_classes: None,
            noise_rate: 0.0,
            stratified_noise: false,
            master_seed: 0,
            action: ActionKind::Sieve,
            percentile: 99.0,
            percentiles: vec![1.0, 10.0, 50.0, 90.0],
            fake_fraction: None,
            num_seeds: 1,
            multiclass_flip: false,
            output_dir: None,
            output_format: "jsonl".into(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML. Relative dataset and output paths are resolved against
    /// `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("experiment config: {e}")))?;
        if let Some(base) = base_dir {
            for p in [&mut cfg.train_path, &mut cfg.validation_path, &mut cfg.output_dir]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        check_percentile(self.percentile)?;
        for &p in &self.percentiles {
            check_percentile(p)?;
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::invalid(format!("noise rate {} outside [0, 1)", self.noise_rate)));
        }
        if self.num_seeds == 0 {
            return Err(Error::invalid("num_seeds must be at least 1"));
        }
        self.output_format.parse::<DataFormat>()?;
        Ok(())
    }

    pub fn output_format(&self) -> Result<DataFormat> {
        self.output_format.parse()
    }

    fn noise_sampling(&self) -> NoiseSampling {
        if self.stratified_noise {
            NoiseSampling::Stratified
        } else {
            NoiseSampling::Uniform
        }
    }

    /// Loads the training and validation splits named in the config.
    pub fn load_splits(&self) -> Result<(Dataset, Dataset)> {
        let load = |path: &Option<PathBuf>, what: &str, split: &str| -> Result<Dataset> {
            let path = path
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("config does not name a {what} path")))?;
            let format = match &self.format {
                Some(f) => f.parse()?,
                None => DataFormat::from_path(path)?,
            };
            Ok(load_dataset(path, format, self.num_classes)?.with_split_name(split))
        };
        let train = load(&self.train_path, "train", "train")?;
        let validation = load(&self.validation_path, "validation", "validation")?;
        if train.label_space().num_classes() != validation.label_space().num_classes() {
            return Err(Error::invalid(format!(
                "train has {} classes, validation has {}; set num_classes",
                train.label_space().num_classes(),
                validation.label_space().num_classes()
            )));
        }
        Ok((train, validation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub action: ActionKind,
    pub percentile: f64,
    pub acc_unfiltered: f64,
    pub acc_filtered: f64,
    pub num_flagged: usize,
    pub num_sieved_or_flipped: usize,
    pub threshold_run1: f64,
    pub threshold_run2: f64,
    pub noise_report: Option<NoiseReport>,
    pub num_train: usize,
    pub num_validation: usize,
    pub noise_rate: f64,
    pub seeds: StageSeeds,
    pub train_config: TrainConfig,
}

/// Everything computed before the percentile is applied. Shared by all rows
/// of a sweep.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub seeds: StageSeeds,
    pub train: Dataset,
    pub mask: Option<NoiseMask>,
    pub run1: ThresholdRun,
    pub run2: ThresholdRun,
    pub acc_unfiltered: f64,
}

pub fn prepare_experiment(train_split: &Dataset, validation: &Dataset, config: &ExperimentConfig) -> Result<PreparedExperiment> {
    prepare_with_master(train_split, validation, config, config.master_seed)
}

fn prepare_with_master(
    train_split: &Dataset,
    validation: &Dataset,
    config: &ExperimentConfig,
    master: u64,
) -> Result<PreparedExperiment> {
    config.validate()?;
    let seeds = StageSeeds::from_master(master);
    let (train_set, mask) = if config.noise_rate > 0.0 {
        let (noisy, mask) = inject_noise(train_split, config.noise_rate, seeds.inject, config.noise_sampling())?;
        (noisy, Some(mask))
    } else {
        (train_split.clone(), None)
    };
    let run1 = execute_threshold_run(&train_set, 1, None, seeds.run1, config.fake_fraction, &config.train)?;
    let run2 = execute_threshold_run(
        &train_set,
        2,
        Some(&run1.scores.plan),
        seeds.run2,
        config.fake_fraction,
        &config.train,
    )?;
    let (baseline, _) = train(&train_set, &config.train.with_seed(seeds.retrain))?;
    let acc_unfiltered = evaluate(&baseline, validation)?;
    Ok(PreparedExperiment {
        seeds,
        train: train_set,
        mask,
        run1,
        run2,
        acc_unfiltered,
    })
}

/// One percentile applied to a prepared experiment.
#[derive(Debug, Clone)]
pub struct PercentileOutcome {
    pub result: ExperimentResult,
    pub verdicts: Verdicts,
    pub filtered: Dataset,
    pub sieved: Vec<LabeledSample>,
}

impl PreparedExperiment {
    /// Verdicts at `percentile`, then the filter action, a fresh retrain and
    /// validation accuracy.
    pub fn apply(
        &self,
        validation: &Dataset,
        config: &ExperimentConfig,
        percentile: f64,
    ) -> Result<PercentileOutcome> {
        check_percentile(percentile)?;
        let verdicts = two_run_verdicts(&self.run1.scores, &self.run2.scores, percentile)?;
        let action = FilterAction {
            kind: config.action,
            flagged_ids: verdicts.flagged.clone(),
            percentile_used: percentile,
        };
        let (filtered, sieved) = match action.kind {
            ActionKind::None => (self.train.clone(), Vec::new()),
            ActionKind::Sieve => sieve(&self.train, &action.flagged_ids)?,
            ActionKind::Flip if self.train.label_space().is_binary() => (flip(&self.train, &action.flagged_ids)?, Vec::new()),
            ActionKind::Flip if config.multiclass_flip => {
                let means = self.governing_mean_logits(&verdicts);
                (flip_multiclass(&self.train, &action.flagged_ids, &means)?, Vec::new())
            }
            ActionKind::Flip => {
                return Err(Error::invalid(
                    "flip on a multi-class dataset needs multiclass_flip = true",
                ))
            }
        };

        let acc_filtered = match action.kind {
            ActionKind::None => self.acc_unfiltered,
            _ => {
                if filtered.is_empty() {
                    return Err(Error::Empty("filtering left no training samples".into()));
                }
                let (model, _) = train(&filtered, &config.train.with_seed(self.seeds.retrain))?;
                evaluate(&model, validation)?
            }
        };

        let noise_report = self
            .mask
            .as_ref()
            .map(|mask| score_noise_identification(&verdicts.flagged, mask, &self.governing_aums()));

        let num_sieved_or_flipped = match action.kind {
            ActionKind::None => 0,
            _ => action.flagged_ids.len(),
        };
        Ok(PercentileOutcome {
            result: ExperimentResult {
                action: action.kind,
                percentile,
                acc_unfiltered: self.acc_unfiltered,
                acc_filtered,
                num_flagged: action.flagged_ids.len(),
                num_sieved_or_flipped,
                threshold_run1: verdicts.threshold1,
                threshold_run2: verdicts.threshold2,
                noise_report,
                num_train: self.train.len(),
                num_validation: validation.len(),
                noise_rate: config.noise_rate,
                seeds: self.seeds,
                train_config: config.train.clone(),
            },
            verdicts,
            filtered,
            sieved,
        })
    }

    /// Each sample's AUM from the run in which it kept its own label.
    pub fn governing_aums(&self) -> Vec<AumRecord> {
        self.run1
            .scores
            .aums
            .iter()
            .map(|r1| {
                if self.run1.scores.plan.fake_ids.contains(&r1.sample_id) {
                    self.run2.scores.get(&r1.sample_id).cloned().unwrap_or_else(|| r1.clone())
                } else {
                    r1.clone()
                }
            })
            .collect()
    }

    /// Data-map statistics from each sample's governing run.
    pub fn governing_datamap(&self) -> Result<Vec<DataMapRecord>> {
        let c = self.train.label_space().num_classes();
        let per_run = |run: &ThresholdRun| -> Result<BTreeMap<String, DataMapRecord>> {
            let labels: BTreeMap<String, usize> = self
                .train
                .iter()
                .map(|s| {
                    let y = if run.scores.plan.fake_ids.contains(&s.id) { c } else { s.label };
                    (s.id.clone(), y)
                })
                .collect();
            Ok(compute_datamap(&run.dynamics, &labels, DynamicsOptions::default())?
                .into_iter()
                .map(|r| (r.sample_id.clone(), r))
                .collect())
        };
        let mut dm1 = per_run(&self.run1)?;
        let mut dm2 = per_run(&self.run2)?;
        let mut out = Vec::with_capacity(dm1.len());
        for id in self.train.ids() {
            let rec = if self.run1.scores.plan.fake_ids.contains(&id) {
                dm2.remove(&id)
            } else {
                dm1.remove(&id)
            };
            out.push(rec.ok_or_else(|| Error::UnknownId(id.clone()))?);
        }
        Ok(out)
    }

    fn governing_mean_logits(&self, verdicts: &Verdicts) -> BTreeMap<String, Vec<f64>> {
        verdicts
            .per_sample
            .iter()
            .filter_map(|v| {
                let run = if v.governing_run == 1 { &self.run1 } else { &self.run2 };
                run.dynamics.mean_logits(&v.sample_id).map(|z| (v.sample_id.clone(), z))
            })
            .collect()
    }

    /// Threshold-run manifests for a percentile.
    pub fn manifests(&self, percentile: f64) -> Result<[ThresholdManifest; 2]> {
        let t1 = self.run1.scores.threshold(percentile)?;
        let t2 = self.run2.scores.threshold(percentile)?;
        Ok([
            ThresholdManifest::new(&self.run1.scores.plan, &t1),
            ThresholdManifest::new(&self.run2.scores.plan, &t2),
        ])
    }
}

/// Full experiment on in-memory splits.
pub fn run_experiment_on(train_split: &Dataset, validation: &Dataset, config: &ExperimentConfig) -> Result<(PreparedExperiment, PercentileOutcome)> {
    let prepared = prepare_experiment(train_split, validation, config)?;
    let outcome = prepared.apply(validation, config, config.percentile)?;
    Ok((prepared, outcome))
}

/// Loads the splits named in the config, runs the experiment and writes the
/// results directory when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let (train_split, validation) = config.load_splits()?;
    let (prepared, outcome) = run_experiment_on(&train_split, &validation, config)?;
    if let Some(dir) = &config.output_dir {
        write_experiment_dir(dir, config, &prepared, &outcome)?;
    }
    Ok(outcome.result)
}

#[derive(Serialize)]
struct Manifest<'a> {
    kind: &'a str,
    master_seed: u64,
    seeds: StageSeeds,
    action: ActionKind,
    percentiles: Vec<f64>,
    noise_rate: f64,
    fake_fraction: Option<f64>,
    train_config: &'a TrainConfig,
    runs: Vec<ThresholdManifest>,
}

#[derive(Serialize)]
struct FlagRow<'a> {
    sample_id: &'a str,
    governing_run: u8,
    aum: f64,
    threshold_value: f64,
    flagged: u8,
    noise_injected: u8,
}

fn flags_csv(outcome: &PercentileOutcome, prepared: &PreparedExperiment) -> Result<Vec<u8>> {
    let rows = outcome.verdicts.per_sample.iter().map(|v| FlagRow {
        sample_id: &v.sample_id,
        governing_run: v.governing_run,
        aum: v.aum,
        threshold_value: v.threshold_value,
        flagged: u8::from(v.flagged),
        noise_injected: u8::from(prepared.mask.as_ref().is_some_and(|m| m.contains(&v.sample_id))),
    });
    csv_bytes_with_header(
        &["sample_id", "governing_run", "aum", "threshold_value", "flagged", "noise_injected"],
        rows,
    )
}

fn dataset_bytes(d: &Dataset, format: DataFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset(d, &mut buf, format)?;
    Ok(buf)
}

fn write_threshold_artifacts(dir: &Path, config: &ExperimentConfig, prepared: &PreparedExperiment, kind: &str, percentiles: &[f64]) -> Result<()> {
    create_dir(dir)?;
    let headline = percentiles.iter().copied().fold(f64::NAN, f64::max);
    let manifest = Manifest {
        kind,
        master_seed: prepared.seeds.master,
        seeds: prepared.seeds,
        action: config.action,
        percentiles: percentiles.to_vec(),
        noise_rate: config.noise_rate,
        fake_fraction: config.fake_fraction,
        train_config: &config.train,
        runs: prepared.manifests(headline)?.into(),
    };
    write_bytes(&dir.join("manifest.json"), &to_json_bytes(&manifest)?)?;
    prepared.run1.dynamics.save(&dir.join("dynamics_run1.jsonl"))?;
    prepared.run2.dynamics.save(&dir.join("dynamics_run2.jsonl"))?;
    write_bytes(&dir.join("train_input.jsonl"), &dataset_bytes(&prepared.train, DataFormat::Jsonl)?)?;
    if let Some(mask) = &prepared.mask {
        mask.save(&dir.join("noise_mask.json"))?;
    }
    Ok(())
}

fn write_percentile_artifacts(dir: &Path, config: &ExperimentConfig, prepared: &PreparedExperiment, outcome: &PercentileOutcome) -> Result<()> {
    create_dir(dir)?;
    let format = config.output_format()?;
    write_bytes(&dir.join("flags.csv"), &flags_csv(outcome, prepared)?)?;
    write_bytes(
        &dir.join(format!("filtered.{}", format.extension())),
        &dataset_bytes(&outcome.filtered, format)?,
    )?;
    if config.action == ActionKind::Sieve {
        let audit = Dataset::new(outcome.sieved.clone(), prepared.train.label_space().clone(), "sieved")?;
        write_bytes(&dir.join("sieved_audit.jsonl"), &dataset_bytes(&audit, DataFormat::Jsonl)?)?;
    }
    write_bytes(&dir.join("result.json"), &to_json_bytes(&outcome.result)?)
}

pub fn write_experiment_dir(dir: &Path, config: &ExperimentConfig, prepared: &PreparedExperiment, outcome: &PercentileOutcome) -> Result<()> {
    write_threshold_artifacts(dir, config, prepared, "experiment", &[outcome.result.percentile])?;
    write_percentile_artifacts(dir, config, prepared, outcome)
}

/// One aggregated sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub percentile: f64,
    pub num_seeds: usize,
    pub num_flagged_mean: f64,
    pub acc_unfiltered_mean: f64,
    pub acc_unfiltered_sd: Option<f64>,
    pub acc_filtered_mean: f64,
    pub acc_filtered_sd: Option<f64>,
    pub recall_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// `results[k][i]` is replicate `k` at `percentiles[i]`.
    pub results: Vec<Vec<ExperimentResult>>,
    pub rows: Vec<SweepRow>,
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, sd)
}

/// Runs the threshold stage once per replicate seed and applies every
/// percentile to it. Replicate 0 uses the master seed, so a single-seed
/// sweep row at `p` matches [`run_experiment_on`] at `p`.
pub fn percentile_sweep_on(
    train_split: &Dataset,
    validation: &Dataset,
    config: &ExperimentConfig,
    percentiles: &[f64],
    out_dir: Option<&Path>,
) -> Result<SweepOutcome> {
    if percentiles.is_empty() {
        return Err(Error::invalid("sweep needs at least one percentile"));
    }
    for &p in percentiles {
        check_percentile(p)?;
    }
    let mut results = Vec::with_capacity(config.num_seeds);
    for k in 0..config.num_seeds {
        let prepared = prepare_with_master(train_split, validation, config, replicate(config.master_seed, k))?;
        let rep_dir = out_dir.map(|d| if config.num_seeds == 1 { d.to_path_buf() } else { d.join(format!("rep{k}")) });
        if let Some(dir) = &rep_dir {
            write_threshold_artifacts(dir, config, &prepared, "sweep", percentiles)?;
        }
        let mut row = Vec::with_capacity(percentiles.len());
        for &p in percentiles {
            let outcome = prepared.apply(validation, config, p)?;
            if let Some(dir) = &rep_dir {
                write_percentile_artifacts(&dir.join(format!("p{p}")), config, &prepared, &outcome)?;
            }
            row.push(outcome.result);
        }
        results.push(row);
    }

    let rows: Vec<SweepRow> = percentiles
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let col: Vec<&ExperimentResult> = results.iter().map(|r| &r[i]).collect();
            let (acc_unfiltered_mean, acc_unfiltered_sd) = mean_sd(&col.iter().map(|r| r.acc_unfiltered).collect::<Vec<_>>());
            let (acc_filtered_mean, acc_filtered_sd) = mean_sd(&col.iter().map(|r| r.acc_filtered).collect::<Vec<_>>());
            let recalls: Vec<f64> = col
                .iter()
                .filter_map(|r| r.noise_report.as_ref().and_then(|n| n.recall))
                .collect();
            SweepRow {
                percentile: p,
                num_seeds: col.len(),
                num_flagged_mean: col.iter().map(|r| r.num_flagged as f64).sum::<f64>() / col.len() as f64,
                acc_unfiltered_mean,
                acc_unfiltered_sd,
                acc_filtered_mean,
                acc_filtered_sd,
                recall_mean: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
            }
        })
        .collect();

    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_bytes(&dir.join("sweep.csv"), &sweep_csv(&rows)?)?;
    }
    Ok(SweepOutcome { results, rows })
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    csv_bytes_with_header(
        &[
            "percentile",
            "num_seeds",
            "num_flagged_mean",
            "acc_unfiltered_mean",
            "acc_unfiltered_sd",
            "acc_filtered_mean",
            "acc_filtered_sd",
            "recall_mean",
        ],
        rows,
    )
}

/// Loads the splits named in the config and sweeps `percentiles` (or the
/// config's own list when empty).
pub fn percentile_sweep(config: &ExperimentConfig, percentiles: &[f64]) -> Result<SweepOutcome> {
    let (train_split, validation) = config.load_splits()?;
    let ps = if percentiles.is_empty() { &config.percentiles[..] } else { percentiles };
    percentile_sweep_on(&train_split, &validation, config, ps, config.output_dir.as_deref())
}
