#![allow(dead_code)]

use std::collections::BTreeSet;

use aum_core::noise::{generate_corpus, CorpusSpec};
use aum_core::pipeline::{ActionKind, ExperimentConfig};
use aum_core::{Dataset, DynamicsTable, LabelSpace, LabeledSample, TrainConfig};

/// Training settings for the synthetic noise benchmark.
pub fn benchmark_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.02,
        ..TrainConfig::default()
    }
}

/// The 2,000-sample binary benchmark corpus and its validation split.
pub fn benchmark_corpus(seed: u64) -> (Dataset, Dataset) {
    generate_corpus(&CorpusSpec {
        num_train: 2000,
        num_validation: 1000,
        seed,
        ..CorpusSpec::default()
    })
    .unwrap()
}

pub fn benchmark_config(noise_rate: f64, seed: u64, action: ActionKind, percentile: f64) -> ExperimentConfig {
    ExperimentConfig {
        noise_rate,
        master_seed: seed,
        action,
        percentile,
        train: benchmark_train_config(),
        ..ExperimentConfig::default()
    }
}

pub fn binary_dataset(labels: &[usize]) -> Dataset {
    dataset(labels, 2)
}

pub fn dataset(labels: &[usize], c: usize) -> Dataset {
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| LabeledSample::new(format!("s{i:04}"), format!("w{} w{}", i % 7, y), y))
        .collect();
    Dataset::new(samples, LabelSpace::new(c).unwrap(), "train").unwrap()
}

/// Builds a table from `(id, per-epoch logits)` rows.
pub fn table(rows: &[(&str, Vec<Vec<f64>>)]) -> DynamicsTable {
    let k = rows[0].1[0].len();
    let mut t = DynamicsTable::new(k);
    for (id, epochs) in rows {
        for (e, z) in epochs.iter().enumerate() {
            t.record(id, e, z.clone()).unwrap();
        }
    }
    t
}

/// Margin by explicit scan: gold logit minus the largest other logit.
pub fn oracle_margin(z: &[f64], gold: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (k, &v) in z.iter().enumerate() {
        if k != gold && v > best {
            best = v;
        }
    }
    z[gold] - best
}

/// ROC-AUC by counting every (noise, clean) pair; ties count one half.
pub fn oracle_auc(noise_scores: &[f64], clean_scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in noise_scores {
        for &q in clean_scores {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (noise_scores.len() * clean_scores.len()) as f64
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn ids(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}
