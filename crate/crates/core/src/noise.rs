//! Synthetic label noise, noise-identification scoring, and seeded corpus
//! generators.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Flag, LabelSpace, LabeledSample};
use crate::dynamics::AumRecord;
use crate::error::{Error, Result};

/// Ground truth of an injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMask {
    pub seed: u64,
    pub rate: f64,
    pub flipped_ids: BTreeSet<String>,
}

impl NoiseMask {
    pub fn len(&self) -> usize {
        self.flipped_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.flipped_ids.contains(id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NoiseSampling {
    /// Uniform over all samples regardless of class.
    #[default]
    Uniform,
    /// Per-class counts proportional to class sizes (largest remainder).
    Stratified,
}

/// `⌊rate · n⌋`, tolerant of decimal rates that are not exact in binary.
pub fn noise_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 1e-9).floor() as usize
}

/// Flips the labels of `⌊rate · N⌋` samples drawn without replacement.
///
/// Binary labels become `1 − y`; with more classes the new label is drawn
/// uniformly from the other `c − 1` real classes.
pub fn inject_noise(dataset: &Dataset, rate: f64, seed: u64, sampling: NoiseSampling) -> Result<(Dataset, NoiseMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("noise rate {rate} outside [0, 1)")));
    }
    let n = dataset.len();
    let count = noise_count(rate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = match sampling {
        NoiseSampling::Uniform => sample_indices(&mut rng, n, count).into_vec(),
        NoiseSampling::Stratified => stratified_pick(dataset, count, &mut rng),
    };
    let chosen: BTreeSet<usize> = chosen.into_iter().collect();
    let c = dataset.label_space().num_classes();

    let mut samples = dataset.samples().to_vec();
    let mut flipped_ids = BTreeSet::new();
    for &i in &chosen {
        let s = &mut samples[i];
        s.label = if c == 2 {
            1 - s.label
        } else {
            let r = rng.gen_range(0..c - 1);
            if r >= s.label {
                r + 1
            } else {
                r
            }
        };
        if s.label == s.original_label {
            s.flags.remove(&Flag::NoiseInjected);
        } else {
            s.flags.insert(Flag::NoiseInjected);
        }
        flipped_ids.insert(s.id.clone());
    }
    Ok((dataset.with_samples(samples)?, NoiseMask { seed, rate, flipped_ids }))
}

fn stratified_pick(dataset: &Dataset, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dataset.len();
    let c = dataset.label_space().num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, s) in dataset.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let exact: Vec<f64> = by_class.iter().map(|m| count as f64 * m.len() as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut missing = count - quotas.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quotas[k] < by_class[k].len() {
            quotas[k] += 1;
            missing -= 1;
        }
    }
    let mut out = Vec::with_capacity(count);
    for (members, q) in by_class.iter().zip(quotas) {
        out.extend(sample_indices(rng, members.len(), q).into_iter().map(|i| members[i]));
    }
    out
}

/// Flagged-versus-mask scores. Metrics that are undefined for the inputs are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub num_flagged: usize,
    pub num_noise: usize,
    pub true_positives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Area under the ROC curve of `−AUM` as a noise score.
    pub roc_auc: Option<f64>,
    pub mean_aum_noise: Option<f64>,
    pub mean_aum_clean: Option<f64>,
}

pub fn score_noise_identification(flagged: &BTreeSet<String>, mask: &NoiseMask, aums: &[AumRecord]) -> NoiseReport {
    let tp = flagged.intersection(&mask.flipped_ids).count();
    let precision = match (flagged.is_empty(), mask.is_empty()) {
        (true, true) => Some(1.0),
        (true, false) => None,
        (false, _) => Some(tp as f64 / flagged.len() as f64),
    };
    let recall = (!mask.is_empty()).then(|| tp as f64 / mask.len() as f64);
    let f1 = match (precision, recall) {
        (_, Some(r)) if tp == 0 => Some(r),
        (Some(p), Some(r)) => Some(2.0 * p * r / (p + r)),
        _ => None,
    };

    let (noise, clean): (Vec<&AumRecord>, Vec<&AumRecord>) =
        aums.iter().partition(|r| mask.contains(&r.sample_id));
    let mean = |v: &[&AumRecord]| (!v.is_empty()).then(|| v.iter().map(|r| r.aum).sum::<f64>() / v.len() as f64);
    let scores: Vec<(f64, bool)> = aums.iter().map(|r| (-r.aum, mask.contains(&r.sample_id))).collect();

    NoiseReport {
        num_flagged: flagged.len(),
        num_noise: mask.len(),
        true_positives: tp,
        precision,
        recall,
        f1,
        roc_auc: roc_auc(&scores),
        mean_aum_noise: mean(&noise),
        mean_aum_clean: mean(&clean),
    }
}

/// Mann–Whitney estimate of ROC-AUC with tied scores sharing their average
/// rank. `None` when either class is empty.
pub fn roc_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let pos = scored.iter().filter(|(_, p)| *p).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted: Vec<&(f64, bool)> = scored.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * sorted[i..=j].iter().filter(|(_, p)| *p).count() as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

// Deterministic pronounceable pseudo-words, distinct for distinct indices.
fn pseudo_word(mut index: usize) -> String {
    const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
    const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
    let mut word = String::new();
    loop {
        let syl = index % (ONSETS.len() * VOWELS.len());
        word.push_str(ONSETS[syl / VOWELS.len()]);
        word.push_str(VOWELS[syl % VOWELS.len()]);
        index /= ONSETS.len() * VOWELS.len();
        if index == 0 {
            break;
        }
        index -= 1;
    }
    word
}

/// Parameters for the cluster generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSpec {
    pub num_clusters: usize,
    pub cluster_size: usize,
    /// Share of each cluster carrying the cluster's dominant label.
    pub dominant_fraction: f64,
    /// Probability that a word is drawn from the cluster's template pool
    /// rather than the shared pool.
    pub vocab_overlap: f64,
    pub words_per_sample: usize,
    pub template_words: usize,
    pub shared_words: usize,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            num_clusters: 10,
            cluster_size: 12,
            dominant_fraction: 0.75,
            vocab_overlap: 0.9,
            words_per_sample: 10,
            template_words: 12,
            shared_words: 200,
            seed: 0,
        }
    }
}

impl ClusterSpec {
    /// Members per cluster carrying the dominant label.
    pub fn dominant_count(&self) -> usize {
        (self.dominant_fraction * self.cluster_size as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 || self.cluster_size == 0 {
            return Err(Error::invalid("cluster spec needs at least one cluster of one sample"));
        }
        if !(self.dominant_fraction > 0.5 && self.dominant_fraction <= 1.0) {
            return Err(Error::invalid("dominant_fraction must lie in (0.5, 1]"));
        }
        if !(0.0..=1.0).contains(&self.vocab_overlap) {
            return Err(Error::invalid("vocab_overlap must lie in [0, 1]"));
        }
        let dom = self.dominant_count();
        if dom < 1 || 2 * dom <= self.cluster_size {
            return Err(Error::invalid(format!(
                "{} × {} does not give a strict majority of at least one sample",
                self.cluster_size, self.dominant_fraction
            )));
        }
        if self.words_per_sample == 0 || self.template_words == 0 || self.shared_words == 0 {
            return Err(Error::invalid("word counts must be positive"));
        }
        Ok(())
    }
}

/// Builds lexically clustered binary data. Cluster `k` has dominant class
/// `k mod 2`; its first `dominant_count()` members (in id order) carry that
/// label and the rest carry the other one. Every sample records its cluster.
pub fn generate_clustered_dataset(spec: &ClusterSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dom = spec.dominant_count();
    let mut samples = Vec::with_capacity(spec.num_clusters * spec.cluster_size);
    for k in 0..spec.num_clusters {
        let dominant = k % 2;
        let template_base = spec.shared_words + k * spec.template_words;
        for i in 0..spec.cluster_size {
            let words: Vec<String> = (0..spec.words_per_sample)
                .map(|_| {
                    if rng.gen_bool(spec.vocab_overlap) {
                        pseudo_word(template_base + rng.gen_range(0..spec.template_words))
                    } else {
                        pseudo_word(rng.gen_range(0..spec.shared_words))
                    }
                })
                .collect();
            let label = if i < dom { dominant } else { 1 - dominant };
            let mut s = LabeledSample::new(format!("c{k:03}-{i:03}"), words.join(" "), label);
            s.cluster_id = Some(k as u32);
            samples.push(s);
        }
    }
    Dataset::new(samples, LabelSpace::binary(), "train")
}

/// Parameters for the two-class topical corpus used by the noise benchmarks.
///
/// Each word comes from the sample's class pool with probability
/// `signal_fraction`, otherwise from a pool shared by both classes, so most
/// samples are separable by a linear model and a few carry no class words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub num_train: usize,
    pub num_validation: usize,
    pub words_per_sample: usize,
    pub class_words: usize,
    pub shared_words: usize,
    pub signal_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_train: 2000,
            num_validation: 1000,
            words_per_sample: 8,
            class_words: 40,
            shared_words: 400,
            signal_fraction: 0.6,
            seed: 0,
        }
    }
}

/// Returns `(train, validation)` with balanced labels.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&spec.signal_fraction) {
        return Err(Error::invalid("signal_fraction must lie in [0, 1]"));
    }
    if spec.words_per_sample == 0 || spec.class_words == 0 || spec.shared_words == 0 {
        return Err(Error::invalid("word counts must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut make = |prefix: &str, n: usize| {
        (0..n)
            .map(|i| {
                let y = i % 2;
                let words: Vec<String> = (0..spec.words_per_sample)
                    .map(|_| {
                        if rng.gen_bool(spec.signal_fraction) {
                            pseudo_word(spec.shared_words + y * spec.class_words + rng.gen_range(0..spec.class_words))
                        } else {
                            pseudo_word(rng.gen_range(0..spec.shared_words))
                        }
                    })
                    .collect();
                LabeledSample::new(format!("{prefix}{i:05}"), words.join(" "), y)
            })
            .collect::<Vec<_>>()
    };
    let train = make("t", spec.num_train);
    let validation = make("v", spec.num_validation);
    Ok((
        Dataset::new(train, LabelSpace::binary(), "train")?,
        Dataset::new(validation, LabelSpace::binary(), "validation")?,
    ))
}

/// Per-cluster AUM aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster_id: u32,
    pub dominant_class: usize,
    pub n_dominant: usize,
    pub n_non_dominant: usize,
    pub mean_aum_dominant: Option<f64>,
    pub mean_aum_non_dominant: Option<f64>,
    pub flagged_dominant: usize,
    pub flagged_non_dominant: usize,
    /// Non-dominant samples without injected noise that fall below the threshold.
    pub flagged_non_dominant_clean: usize,
}

/// Groups AUMs by cluster. The dominant class is the majority current label
/// in the cluster (lowest class on ties). With a threshold, samples strictly
/// below it are counted as flagged.
pub fn dominant_class_report(aums: &[AumRecord], dataset: &Dataset, threshold: Option<f64>) -> Result<Vec<ClusterRow>> {
    let by_id: BTreeMap<&str, &LabeledSample> = dataset.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut groups: BTreeMap<u32, Vec<(&LabeledSample, f64)>> = BTreeMap::new();
    for r in aums {
        let s = by_id
            .get(r.sample_id.as_str())
            .ok_or_else(|| Error::UnknownId(r.sample_id.clone()))?;
        let cluster = s.cluster_id.ok_or_else(|| Error::UnknownCluster(r.sample_id.clone()))?;
        groups.entry(cluster).or_default().push((s, r.aum));
    }
    let c = dataset.label_space().num_classes();
    Ok(groups
        .into_iter()
        .map(|(cluster_id, members)| {
            let mut counts = vec![0usize; c];
            for (s, _) in &members {
                counts[s.label] += 1;
            }
            let dominant_class = (0..c).fold(0, |best, k| if counts[k] > counts[best] { k } else { best });
            let below = |a: f64| threshold.is_some_and(|t| a < t);
            let (dom, non): (Vec<_>, Vec<_>) = members.iter().partition(|(s, _)| s.label == dominant_class);
            let mean = |v: &[&(&LabeledSample, f64)]| {
                (!v.is_empty()).then(|| v.iter().map(|(_, a)| a).sum::<f64>() / v.len() as f64)
            };
            ClusterRow {
                cluster_id,
                dominant_class,
                n_dominant: dom.len(),
                n_non_dominant: non.len(),
                mean_aum_dominant: mean(&dom),
                mean_aum_non_dominant: mean(&non),
                flagged_dominant: dom.iter().filter(|(_, a)| below(*a)).count(),
                flagged_non_dominant: non.iter().filter(|(_, a)| below(*a)).count(),
                flagged_non_dominant_clean: non
                    .iter()
                    .filter(|(s, a)| below(*a) && !s.has_flag(Flag::NoiseInjected))
                    .count(),
            }
        })
        .collect())
}
