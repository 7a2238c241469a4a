mod common;

use std::collections::BTreeMap;

use aum_core::dynamics::{compute_datamap, DynamicsOptions};
use aum_core::model::softmax;
use aum_core::{compute_aum, ingest_dynamics, train, DynamicsTable, Error, TrainConfig};
use proptest::prelude::*;

use common::*;

fn logit_tables() -> impl Strategy<Value = (usize, Vec<(Vec<Vec<f64>>, usize)>)> {
    (2usize..5, 1usize..6).prop_flat_map(|(k, t)| {
        let row = (
            proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, k), t),
            0..k,
        );
        (Just(k), proptest::collection::vec(row, 1..8))
    })
}

fn build(k: usize, rows: &[(Vec<Vec<f64>>, usize)]) -> (DynamicsTable, BTreeMap<String, usize>) {
    let mut t = DynamicsTable::new(k);
    let mut labels = BTreeMap::new();
    for (i, (epochs, y)) in rows.iter().enumerate() {
        let id = format!("x{i}");
        for (e, z) in epochs.iter().enumerate() {
            t.record(&id, e, z.clone()).unwrap();
        }
        labels.insert(id, *y);
    }
    (t, labels)
}

proptest! {
    #[test]
    fn shift_invariance((k, rows) in logit_tables(), delta in -1e3f64..1e3) {
        let (t, labels) = build(k, &rows);
        let shifted: Vec<_> = rows
            .iter()
            .map(|(epochs, y)| (epochs.iter().map(|z| z.iter().map(|v| v + delta).collect()).collect(), *y))
            .collect();
        let (s, _) = build(k, &shifted);
        let a = compute_aum(&t, &labels, DynamicsOptions::default()).unwrap();
        let b = compute_aum(&s, &labels, DynamicsOptions::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.aum - y.aum).abs() <= 1e-9);
        }
    }

    #[test]
    fn binary_antisymmetry(rows in proptest::collection::vec(
        (proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, 2), 1..6), 0usize..2), 1..8)) {
        let t_len = rows[0].0.len();
        let rows: Vec<_> = rows.into_iter().map(|(mut e, y)| { e.resize(t_len, vec![0.0, 0.0]); (e, y) }).collect();
        let (t, labels) = build(2, &rows);
        let other: BTreeMap<String, usize> = labels.iter().map(|(k, v)| (k.clone(), 1 - v)).collect();
        let a = compute_aum(&t, &labels, DynamicsOptions::default()).unwrap();
        let b = compute_aum(&t, &other, DynamicsOptions::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.aum + y.aum).abs() <= 1e-9);
        }
    }

    #[test]
    fn aum_matches_oracle_mean((k, rows) in logit_tables()) {
        let (t, labels) = build(k, &rows);
        let a = compute_aum(&t, &labels, DynamicsOptions::default()).unwrap();
        for (rec, (epochs, y)) in a.iter().zip(&rows) {
            let oracle = epochs.iter().map(|z| oracle_margin(z, *y)).sum::<f64>() / epochs.len() as f64;
            prop_assert!((rec.aum - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
            prop_assert_eq!(rec.label_used, *y);
        }
    }

    #[test]
    fn datamap_bounds_and_oracle((k, rows) in logit_tables()) {
        let (t, labels) = build(k, &rows);
        let d = compute_datamap(&t, &labels, DynamicsOptions::default()).unwrap();
        for (rec, (epochs, y)) in d.iter().zip(&rows) {
            let probs: Vec<f64> = epochs
                .iter()
                .map(|z| {
                    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
                    e[*y] / e.iter().sum::<f64>()
                })
                .collect();
            let n = probs.len() as f64;
            let mean = probs.iter().sum::<f64>() / n;
            let sd = (probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((rec.confidence - mean).abs() < 1e-9);
            prop_assert!((rec.variability - sd).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&rec.confidence));
            prop_assert!((0.0..=0.5).contains(&rec.variability));
            prop_assert!((0.0..=1.0).contains(&rec.correctness));
        }
    }

    #[test]
    fn softmax_normalizes(z in proptest::collection::vec(-700.0f64..700.0, 1..10)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn log_line_order_is_irrelevant((k, rows) in logit_tables(), seed in any::<u64>()) {
        let (t, labels) = build(k, &rows);
        let mut lines = t.lines();
        let mut state = seed;
        for i in (1..lines.len()).rev() {
            state = aum_core::seed::splitmix64(state);
            lines.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shuffled.jsonl");
        let body: String = lines.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect();
        std::fs::write(&path, body).unwrap();
        let back = ingest_dynamics(&path, false).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(
            compute_aum(&back, &labels, DynamicsOptions::default()).unwrap(),
            compute_aum(&t, &labels, DynamicsOptions::default()).unwrap()
        );
        prop_assert_eq!(
            compute_datamap(&back, &labels, DynamicsOptions::default()).unwrap(),
            compute_datamap(&t, &labels, DynamicsOptions::default()).unwrap()
        );
    }
}

#[test]
fn trained_dynamics_survive_emit_and_ingest() {
    let data = binary_dataset(&[0, 1, 0, 1, 1, 0, 0, 1]);
    let config = TrainConfig {
        epochs: 4,
        feature_dim: 1 << 10,
        ..TrainConfig::default()
    };
    let (_, table) = train(&data, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    table.save(&path).unwrap();
    let back = ingest_dynamics(&path, false).unwrap();
    assert_eq!(back, table);
    let again = dir.path().join("e.jsonl");
    back.save(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn ingest_contract_cases() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let ok = write(
        "ok.jsonl",
        &(0..3)
            .flat_map(|e| ["a", "b"].map(|id| format!("{{\"sample_id\":\"{id}\",\"epoch\":{e},\"logits\":[0.5,-0.5]}}\n")))
            .collect::<String>(),
    );
    let t = ingest_dynamics(&ok, false).unwrap();
    assert_eq!((t.len(), t.num_epochs(), t.logit_len()), (2, 3, 2));

    let gap = write(
        "gap.jsonl",
        "{\"sample_id\":\"a\",\"epoch\":0,\"logits\":[1,0]}\n{\"sample_id\":\"a\",\"epoch\":2,\"logits\":[1,0]}\n",
    );
    match ingest_dynamics(&gap, false) {
        Err(Error::MissingEpoch { id, epoch }) => assert_eq!((id.as_str(), epoch), ("a", 1)),
        other => panic!("unexpected {other:?}"),
    }
    let ragged = ingest_dynamics(&gap, true).unwrap();
    let aum = compute_aum(&ragged, &[("a".to_string(), 0)].into(), DynamicsOptions { allow_ragged: true }).unwrap();
    assert!(aum[0].ragged);
    assert_eq!(aum[0].aum, 1.0);

    let dup = write(
        "dup.jsonl",
        "{\"sample_id\":\"a\",\"epoch\":0,\"logits\":[1,0]}\n{\"sample_id\":\"a\",\"epoch\":0,\"logits\":[1,0]}\n",
    );
    assert!(ingest_dynamics(&dup, false).is_err());
    let len = write(
        "len.jsonl",
        "{\"sample_id\":\"a\",\"epoch\":0,\"logits\":[1,0]}\n{\"sample_id\":\"b\",\"epoch\":0,\"logits\":[1,0,2]}\n",
    );
    assert!(ingest_dynamics(&len, false).is_err());
    let missing_label = compute_aum(&t, &[("a".to_string(), 0)].into(), DynamicsOptions::default());
    assert!(matches!(missing_label, Err(Error::MissingLabel(id)) if id == "b"));
}

#[test]
fn datamap_trivial_examples() {
    let t = table(&[("a", vec![vec![0.0, 0.0]; 3])]);
    let d = compute_datamap(&t, &[("a".to_string(), 0)].into(), DynamicsOptions::default()).unwrap();
    assert!((d[0].confidence - 0.5).abs() < 1e-15);
    assert_eq!(d[0].variability, 0.0);

    // logit gaps whose softmax gives p = 0.9, 0.8 and (nearly) 1.0
    let gap = |p: f64| (p / (1.0 - p)).ln();
    let t = table(&[("a", vec![vec![gap(0.9), 0.0], vec![gap(0.8), 0.0], vec![60.0, 0.0]])]);
    let d = compute_datamap(&t, &[("a".to_string(), 0)].into(), DynamicsOptions::default()).unwrap();
    assert!((d[0].confidence - 0.9).abs() < 1e-12);
    assert!((d[0].variability - (0.02f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(d[0].correctness, 1.0);
}
