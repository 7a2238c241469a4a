//! Hashed bag-of-n-grams featurization.
//!
//! Text is lowercased and split on Unicode whitespace. Each word n-gram (words
//! joined by a single space) is hashed with 64-bit FNV-1a and reduced modulo
//! the feature dimension, which is a power of two, so the index is
//! `hash & (dim - 1)`. The hash depends only on the UTF-8 bytes, so indices
//! are identical across processes and platforms.

use std::collections::BTreeMap;

use crate::trainer::TrainConfig;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Sparse feature vector with strictly increasing indices and positive values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl FeatureVector {
    /// Builds a vector from unsorted (index, value) pairs. Duplicate indices
    /// are summed, non-positive totals dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v > 0.0).unzip();
        Self { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn featurize(text: &str, config: &TrainConfig) -> FeatureVector {
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().collect();
    let mask = config.feature_dim - 1;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut gram = String::new();
    for &n in &config.ngram_orders {
        let n = usize::from(n);
        if n == 0 || words.len() < n {
            continue;
        }
        for window in words.windows(n) {
            gram.clear();
            for (i, w) in window.iter().enumerate() {
                if i > 0 {
                    gram.push(' ');
                }
                gram.push_str(w);
            }
            let idx = (fnv1a64(gram.as_bytes()) as usize) & mask;
            *counts.entry(idx).or_insert(0.0) += 1.0;
        }
    }
    let (indices, values) = counts.into_iter().unzip();
    FeatureVector { indices, values }
}
