mod common;

use std::collections::BTreeSet;

use aum_core::threshold::{
    build_threshold_run, compute_threshold, fake_quota, flag_mislabelled, two_run_verdicts, RunScores, ThresholdManifest,
    ThresholdRunPlan,
};
use aum_core::{AumRecord, Error, Flag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn rec(id: &str, aum: f64, label: usize) -> AumRecord {
    AumRecord {
        sample_id: id.into(),
        margins: vec![aum],
        aum,
        label_used: label,
        ragged: false,
    }
}

fn random_scores(n: usize, fakes: &BTreeSet<String>, run_index: u8, seed: u64) -> RunScores {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aums: Vec<AumRecord> = (0..n)
        .map(|i| rec(&format!("s{i:04}"), rng.gen_range(-3.0..3.0), 0))
        .collect();
    aums.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    RunScores {
        plan: ThresholdRunPlan {
            run_index,
            fake_ids: fakes.clone(),
            per_class_counts: Default::default(),
            seed,
        },
        aums,
    }
}

/// Nearest-rank percentile by counting: the smallest value with at least
/// p% of the sample at or below it.
fn oracle_threshold(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    *sorted
        .iter()
        .find(|&&v| sorted.iter().filter(|&&w| w <= v).count() as f64 >= p / 100.0 * n - 1e-9)
        .unwrap()
}

#[test]
fn threshold_trivial_cases() {
    let v = [0.5, -1.0, 2.0, 0.0];
    assert_eq!(compute_threshold(&v, 100.0).unwrap(), 2.0);
    assert_eq!(compute_threshold(&v, 50.0).unwrap(), 0.0);
    assert_eq!(compute_threshold(&v, 1.0).unwrap(), -1.0);
    assert_eq!(compute_threshold(&[7.0], 99.0).unwrap(), 7.0);
    assert!(compute_threshold(&[], 99.0).is_err());
    assert!(compute_threshold(&v, 0.0).is_err());
    assert!(compute_threshold(&v, 100.5).is_err());
}

#[test]
fn quota_rules() {
    assert_eq!(fake_quota(120, 2, None).unwrap(), 20);
    assert_eq!(fake_quota(2000, 2, None).unwrap(), 333);
    assert_eq!(fake_quota(100, 2, Some(0.1)).unwrap(), 5);
    assert!(fake_quota(5, 2, None).is_err());
    assert!(fake_quota(100, 2, Some(1.5)).is_err());
}

#[test]
fn strictly_below_threshold_is_flagged_and_fakes_never_are() {
    let aums = [rec("a", -1.0, 0), rec("b", 0.0, 0), rec("c", 1.0, 0), rec("f", -5.0, 2)];
    let flagged = flag_mislabelled(&aums, 0.0, &ids(&["f"]));
    assert_eq!(flagged, ids(&["a"]));
}

#[test]
fn run_plans_are_balanced_and_disjoint() {
    let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
    let data = dataset(&labels, 3);
    let (aug1, p1) = build_threshold_run(&data, 1, None, 5, None).unwrap();
    let (aug2, p2) = build_threshold_run(&data, 2, Some(&p1), 6, None).unwrap();
    assert_eq!(p1.fake_ids.len(), 3 * 7);
    assert!(p1.per_class_counts.values().all(|&q| q == 7));
    assert!(p1.fake_ids.is_disjoint(&p2.fake_ids));
    assert_eq!(aug1.label_space().effective_classes(), 4);
    for s in aug1.iter() {
        assert_eq!(p1.fake_ids.contains(&s.id), s.label == 3);
        assert_eq!(p1.fake_ids.contains(&s.id), s.has_flag(Flag::FakeAssignedRun1));
    }
    assert!(aug2.iter().all(|s| !s.has_flag(Flag::FakeAssignedRun1)));
    assert!(data.iter().all(|s| s.label < 3));
    assert!(build_threshold_run(&data, 2, None, 6, None).is_err());
    assert!(build_threshold_run(&data, 1, Some(&p1), 6, None).is_err());

    let skewed = binary_dataset(&[0; 30].iter().chain(&[1; 2]).copied().collect::<Vec<_>>());
    assert!(matches!(
        build_threshold_run(&skewed, 1, None, 0, None),
        Err(Error::InsufficientClass { class: 1, .. })
    ));
}

#[test]
fn overlapping_plans_are_rejected() {
    let fakes = ids(&["s0000"]);
    let r1 = random_scores(10, &fakes, 1, 1);
    let r2 = random_scores(10, &fakes, 2, 2);
    assert!(matches!(two_run_verdicts(&r1, &r2, 99.0), Err(Error::OverlappingFakeSets(_))));
}

#[test]
fn manifest_round_trip() {
    let m = ThresholdManifest {
        run_index: 2,
        seed: 99,
        fake_ids: ids(&["a", "b"]),
        percentile: 99.0,
        threshold_value: -0.125,
    };
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    m.save(&p).unwrap();
    assert_eq!(ThresholdManifest::load(&p).unwrap(), m);
    let text = std::fs::read_to_string(&p).unwrap();
    for key in ["run_index", "seed", "fake_ids", "percentile", "threshold_value"] {
        assert!(text.contains(&format!("\"{key}\"")));
    }
}

proptest! {
    #[test]
    fn threshold_matches_counting_oracle(v in proptest::collection::vec(-10.0f64..10.0, 1..60), p in 0.5f64..=100.0) {
        prop_assert_eq!(compute_threshold(&v, p).unwrap(), oracle_threshold(&v, p));
    }

    #[test]
    fn flagged_sets_nest_as_percentile_grows(n in 20usize..120, seed in any::<u64>(), mut ps in proptest::collection::vec(1.0f64..=100.0, 2..6)) {
        let f1: BTreeSet<String> = (0..n).step_by(5).map(|i| format!("s{i:04}")).collect();
        let f2: BTreeSet<String> = (2..n).step_by(5).map(|i| format!("s{i:04}")).collect();
        let r1 = random_scores(n, &f1, 1, seed);
        let r2 = random_scores(n, &f2, 2, seed ^ 0xff);
        ps.sort_by(f64::total_cmp);
        let mut prev: Option<BTreeSet<String>> = None;
        for p in ps {
            let v = two_run_verdicts(&r1, &r2, p).unwrap();
            if let Some(prev) = &prev {
                prop_assert!(prev.is_subset(&v.flagged));
            }
            prev = Some(v.flagged);
        }
    }

    #[test]
    fn routing_matches_oracle(n in 10usize..100, seed in any::<u64>(), p in 1.0f64..=100.0) {
        let f1: BTreeSet<String> = (0..n).step_by(4).map(|i| format!("s{i:04}")).collect();
        let f2: BTreeSet<String> = (1..n).step_by(4).map(|i| format!("s{i:04}")).collect();
        let r1 = random_scores(n, &f1, 1, seed);
        let r2 = random_scores(n, &f2, 2, seed.wrapping_add(1));
        let v = two_run_verdicts(&r1, &r2, p).unwrap();

        let fake_values = |r: &RunScores, f: &BTreeSet<String>| -> Vec<f64> {
            r.aums.iter().filter(|x| f.contains(&x.sample_id)).map(|x| x.aum).collect()
        };
        let t1 = oracle_threshold(&fake_values(&r1, &f1), p);
        let t2 = oracle_threshold(&fake_values(&r2, &f2), p);
        prop_assert_eq!((v.threshold1, v.threshold2), (t1, t2));
        for (i, verdict) in v.per_sample.iter().enumerate() {
            let id = format!("s{i:04}");
            prop_assert_eq!(&verdict.sample_id, &id);
            let (run, aum, t) = if f1.contains(&id) { (2, r2.aums[i].aum, t2) } else { (1, r1.aums[i].aum, t1) };
            prop_assert_eq!(verdict.governing_run, run);
            prop_assert_eq!(verdict.aum, aum);
            prop_assert_eq!(verdict.flagged, aum < t);
        }
        // a sample with the lowest AUM of its governing run is flagged unless
        // every fake value ties with it
        let lowest = v.per_sample.iter().filter(|x| x.governing_run == 1).min_by(|a, b| a.aum.total_cmp(&b.aum)).unwrap();
        prop_assert_eq!(lowest.flagged, lowest.aum < t1);
    }
}
