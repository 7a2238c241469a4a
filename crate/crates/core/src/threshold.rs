//! Fake-class threshold runs.
//!
//! A threshold run relabels an equal number of samples from every real class
//! to an extra class with index `c`, trains on that augmented view and scores
//! every sample. The fake-class samples are mislabelled by construction, so
//! their AUM distribution gives the cutoff below which real samples are
//! flagged. A second run picks a disjoint fake set so the samples hidden in
//! the first run's fake class are judged under their own labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Flag};
use crate::dynamics::{compute_aum, AumRecord, DynamicsOptions, DynamicsTable};
use crate::error::{Error, Result};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdRunPlan {
    pub run_index: u8,
    pub fake_ids: BTreeSet<String>,
    /// Original class → number of its samples moved to the fake class.
    pub per_class_counts: BTreeMap<usize, usize>,
    pub seed: u64,
}

/// Samples taken from each class for the fake class.
///
/// `None` uses `⌊N / (c(c+1))⌋`, which makes the fake class as large as an
/// average real class. `Some(f)` takes `⌊f·N / c⌋` per class.
pub fn fake_quota(n: usize, num_classes: usize, fake_fraction: Option<f64>) -> Result<usize> {
    let quota = match fake_fraction {
        None => n / (num_classes * (num_classes + 1)),
        Some(f) if f > 0.0 && f < 1.0 => ((f * n as f64) / num_classes as f64).floor() as usize,
        Some(f) => return Err(Error::invalid(format!("fake fraction {f} outside (0, 1)"))),
    };
    if quota == 0 {
        return Err(Error::invalid(format!(
            "{n} samples over {num_classes} classes leave the fake class empty"
        )));
    }
    Ok(quota)
}

/// Builds the augmented view for one threshold run.
///
/// The returned dataset carries the fake class in its label space; selected
/// samples have label `c` and a `fake_assigned_run{1,2}` flag. The input is
/// not modified.
pub fn build_threshold_run(
    dataset: &Dataset,
    run_index: u8,
    prior_plan: Option<&ThresholdRunPlan>,
    seed: u64,
    fake_fraction: Option<f64>,
) -> Result<(Dataset, ThresholdRunPlan)> {
    let excluded: BTreeSet<String> = match (run_index, prior_plan) {
        (1, None) => BTreeSet::new(),
        (1, Some(_)) => return Err(Error::invalid("run 1 does not take a prior plan")),
        (2, Some(p)) => p.fake_ids.clone(),
        (2, None) => return Err(Error::invalid("run 2 needs the plan of run 1")),
        (r, _) => return Err(Error::invalid(format!("run index {r} is not 1 or 2"))),
    };
    let space = dataset.label_space();
    if space.fake_class_active() {
        return Err(Error::invalid("dataset already carries a fake class"));
    }
    let c = space.num_classes();
    let quota = fake_quota(dataset.len(), c, fake_fraction)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: BTreeSet<String> = BTreeSet::new();
    let mut per_class_counts = BTreeMap::new();
    for class in 0..c {
        let eligible: Vec<&str> = dataset
            .iter()
            .filter(|s| s.label == class && !excluded.contains(&s.id))
            .map(|s| s.id.as_str())
            .collect();
        if eligible.len() < quota {
            return Err(Error::InsufficientClass {
                class,
                available: eligible.len(),
                needed: quota,
            });
        }
        for i in sample_indices(&mut rng, eligible.len(), quota) {
            chosen.insert(eligible[i].to_string());
        }
        per_class_counts.insert(class, quota);
    }

    let flag = if run_index == 1 {
        Flag::FakeAssignedRun1
    } else {
        Flag::FakeAssignedRun2
    };
    let samples = dataset
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if chosen.contains(&s.id) {
                s.label = c;
                s.flags.insert(flag);
            }
            s
        })
        .collect();
    let augmented = Dataset::augmented(samples, space.with_fake_class(), dataset.split_name())?;
    Ok((
        augmented,
        ThresholdRunPlan {
            run_index,
            fake_ids: chosen,
            per_class_counts,
            seed,
        },
    ))
}

/// Nearest-rank percentile: the element at index `⌈p/100 · n⌉ − 1` of the
/// ascending sort.
pub fn compute_threshold(fake_aums: &[f64], percentile: f64) -> Result<f64> {
    if fake_aums.is_empty() {
        return Err(Error::Empty("no fake-class AUM values".into()));
    }
    check_percentile(percentile)?;
    let mut sorted = fake_aums.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // the epsilon keeps exact integer ranks from rounding up
    let rank = ((percentile * n as f64) / 100.0 - 1e-9).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

pub fn check_percentile(percentile: f64) -> Result<()> {
    if percentile > 0.0 && percentile <= 100.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("percentile {percentile} outside (0, 100]")))
    }
}

/// Ids whose AUM is strictly below `threshold_value`, minus `exclude`.
pub fn flag_mislabelled(aums: &[AumRecord], threshold_value: f64, exclude: &BTreeSet<String>) -> BTreeSet<String> {
    aums.iter()
        .filter(|r| r.aum < threshold_value && !exclude.contains(&r.sample_id))
        .map(|r| r.sample_id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub percentile: f64,
    pub threshold_value: f64,
    pub flagged_ids: BTreeSet<String>,
    pub fake_aums: Vec<f64>,
}

/// Scores of one completed threshold run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub plan: ThresholdRunPlan,
    /// AUM against the augmented labels, ordered by sample id.
    pub aums: Vec<AumRecord>,
}

impl RunScores {
    pub fn fake_aums(&self) -> Vec<f64> {
        self.aums
            .iter()
            .filter(|r| self.plan.fake_ids.contains(&r.sample_id))
            .map(|r| r.aum)
            .collect()
    }

    pub fn threshold(&self, percentile: f64) -> Result<ThresholdResult> {
        let fake_aums = self.fake_aums();
        let threshold_value = compute_threshold(&fake_aums, percentile)?;
        Ok(ThresholdResult {
            percentile,
            threshold_value,
            flagged_ids: flag_mislabelled(&self.aums, threshold_value, &self.plan.fake_ids),
            fake_aums,
        })
    }

    pub fn get(&self, id: &str) -> Option<&AumRecord> {
        self.aums
            .binary_search_by(|r| r.sample_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.aums[i])
    }
}

/// A completed threshold run: plan, dynamics and scores.
#[derive(Debug, Clone)]
pub struct ThresholdRun {
    pub scores: RunScores,
    pub dynamics: DynamicsTable,
}

/// Builds the augmented view, trains on it from scratch and scores every
/// sample against its augmented label.
pub fn execute_threshold_run(
    dataset: &Dataset,
    run_index: u8,
    prior_plan: Option<&ThresholdRunPlan>,
    seed: u64,
    fake_fraction: Option<f64>,
    train_config: &TrainConfig,
) -> Result<ThresholdRun> {
    let (augmented, plan) = build_threshold_run(dataset, run_index, prior_plan, seed, fake_fraction)?;
    let (_, dynamics) = train(&augmented, &train_config.with_seed(seed))?;
    let aums = compute_aum(&dynamics, &augmented.labels(), DynamicsOptions::default())?;
    Ok(ThresholdRun {
        scores: RunScores { plan, aums },
        dynamics,
    })
}

/// Which run judged a sample and what it decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub sample_id: String,
    pub governing_run: u8,
    pub aum: f64,
    pub threshold_value: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdicts {
    /// One verdict per original sample, ordered by id.
    pub per_sample: Vec<Verdict>,
    pub flagged: BTreeSet<String>,
    pub threshold1: f64,
    pub threshold2: f64,
}

/// Merges two runs so each sample is judged by the run where it kept its
/// own label: run-1 fake samples by run 2, everything else by run 1.
pub fn two_run_verdicts(run1: &RunScores, run2: &RunScores, percentile: f64) -> Result<Verdicts> {
    if let Some(id) = run1.plan.fake_ids.intersection(&run2.plan.fake_ids).next() {
        return Err(Error::OverlappingFakeSets(id.clone()));
    }
    let t1 = run1.threshold(percentile)?.threshold_value;
    let t2 = run2.threshold(percentile)?.threshold_value;
    let mut per_sample = Vec::with_capacity(run1.aums.len());
    for r1 in &run1.aums {
        let id = &r1.sample_id;
        let (run, rec, threshold) = if run1.plan.fake_ids.contains(id) {
            let r2 = run2.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            (2, r2, t2)
        } else {
            (1, r1, t1)
        };
        per_sample.push(Verdict {
            sample_id: id.clone(),
            governing_run: run,
            aum: rec.aum,
            threshold_value: threshold,
            flagged: rec.aum < threshold,
        });
    }
    let flagged = per_sample
        .iter()
        .filter(|v| v.flagged)
        .map(|v| v.sample_id.clone())
        .collect();
    Ok(Verdicts {
        per_sample,
        flagged,
        threshold1: t1,
        threshold2: t2,
    })
}

/// Persisted description of one threshold run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdManifest {
    pub run_index: u8,
    pub seed: u64,
    pub fake_ids: BTreeSet<String>,
    pub percentile: f64,
    pub threshold_value: f64,
}

impl ThresholdManifest {
    pub fn new(plan: &ThresholdRunPlan, result: &ThresholdResult) -> Self {
        Self {
            run_index: plan.run_index,
            seed: plan.seed,
            fake_ids: plan.fake_ids.clone(),
            percentile: result.percentile,
            threshold_value: result.threshold_value,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}
