mod common;

use std::collections::BTreeSet;

use aum_core::corpus::write_dataset;
use aum_core::{load_dataset, save_dataset, DataFormat, Dataset, Error, Flag, LabelSpace, LabeledSample};
use proptest::prelude::*;

fn sample_strategy(text: &'static str) -> impl Strategy<Value = (String, usize, usize, Vec<Flag>, Option<u32>)> {
    (
        text,
        0usize..3,
        0usize..3,
        proptest::collection::vec(
            prop_oneof![
                Just(Flag::NoiseInjected),
                Just(Flag::FakeAssignedRun1),
                Just(Flag::FakeAssignedRun2),
                Just(Flag::Flipped),
                Just(Flag::Sieved),
            ],
            0..3,
        ),
        proptest::option::of(0u32..50),
    )
}

fn build(rows: Vec<(String, usize, usize, Vec<Flag>, Option<u32>)>) -> Dataset {
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (text, label, original, flags, cluster))| {
            let mut s = LabeledSample::new(format!("id-{i}"), text, label);
            s.original_label = original;
            s.flags = flags.into_iter().collect();
            s.cluster_id = cluster;
            s
        })
        .collect();
    Dataset::new(samples, LabelSpace::new(3).unwrap(), "train").unwrap()
}

fn bytes(d: &Dataset, format: DataFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(d, &mut buf, format).unwrap();
    buf
}

proptest! {
    #[test]
    fn jsonl_round_trip_keeps_everything(rows in proptest::collection::vec(sample_strategy("\\PC{0,30}"), 1..40)) {
        let d = build(rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&d, &path, DataFormat::Jsonl).unwrap();
        let back = load_dataset(&path, DataFormat::Jsonl, Some(3)).unwrap();
        prop_assert_eq!(back.samples(), d.samples());
        prop_assert_eq!(bytes(&back, DataFormat::Jsonl), std::fs::read(&path).unwrap());
    }

    #[test]
    fn tsv_round_trip_keeps_ids_text_labels(rows in proptest::collection::vec(sample_strategy("[a-zA-Z0-9 ,.!?'\"é-]{0,30}"), 1..40)) {
        let d = build(rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        save_dataset(&d, &path, DataFormat::Tsv).unwrap();
        let back = load_dataset(&path, DataFormat::Tsv, Some(3)).unwrap();
        prop_assert_eq!(back.len(), d.len());
        for (a, b) in back.iter().zip(d.iter()) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(&a.text, &b.text);
            prop_assert_eq!(a.label, b.label);
        }
        prop_assert_eq!(bytes(&back, DataFormat::Tsv), std::fs::read(&path).unwrap());
    }
}

#[test]
fn save_load_save_is_byte_stable() {
    let (train, _) = aum_core::noise::generate_corpus(&aum_core::noise::CorpusSpec {
        num_train: 50,
        num_validation: 10,
        ..Default::default()
    })
    .unwrap();
    let (noisy, _) = aum_core::noise::inject_noise(&train, 0.3, 1, Default::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [DataFormat::Jsonl, DataFormat::Tsv] {
        let p1 = dir.path().join(format!("a.{}", format.extension()));
        let p2 = dir.path().join(format!("b.{}", format.extension()));
        save_dataset(&noisy, &p1, format).unwrap();
        save_dataset(&load_dataset(&p1, format, None).unwrap(), &p2, format).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}

#[test]
fn jsonl_field_names() {
    let mut s = LabeledSample::new("x1", "some text", 1);
    s.original_label = 0;
    s.flags.insert(Flag::NoiseInjected);
    s.cluster_id = Some(4);
    let d = Dataset::new(vec![s], LabelSpace::binary(), "train").unwrap();
    let line = String::from_utf8(bytes(&d, DataFormat::Jsonl)).unwrap();
    assert_eq!(
        line,
        "{\"id\":\"x1\",\"text\":\"some text\",\"label\":1,\"original_label\":0,\"flags\":[\"noise_injected\"],\"cluster_id\":4}\n"
    );
}

#[test]
fn loader_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, usize); 4] = [
        ("bad.tsv", "id\ttext\tlabel\na\tx\t0\nb\ty\n", 3),
        ("neg.tsv", "id\ttext\tlabel\na\tx\t-1\n", 2),
        ("dup.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{\"id\":\"a\",\"text\":\"y\",\"label\":1}\n", 2),
        ("junk.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\nnot json\n", 2),
    ];
    for (name, body, expected) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        match load_dataset(&path, DataFormat::from_path(&path).unwrap(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{name}"),
            other => panic!("{name}: unexpected {other:?}"),
        }
    }
    let path = dir.path().join("range.jsonl");
    std::fs::write(&path, "{\"id\":\"a\",\"text\":\"x\",\"label\":5}\n").unwrap();
    assert!(matches!(load_dataset(&path, DataFormat::Jsonl, Some(2)), Err(Error::Parse { line: 1, .. })));
    let missing = dir.path().join("nope.tsv");
    assert!(load_dataset(&missing, DataFormat::Tsv, None).unwrap_err().is_io());
}

#[test]
fn duplicate_ids_and_labels_rejected_in_memory() {
    let dup = vec![LabeledSample::new("a", "x", 0), LabeledSample::new("a", "y", 1)];
    assert!(matches!(Dataset::new(dup, LabelSpace::binary(), "t"), Err(Error::DuplicateId(_))));
    let out = vec![LabeledSample::new("a", "x", 2)];
    assert!(matches!(
        Dataset::new(out, LabelSpace::binary(), "t"),
        Err(Error::LabelOutOfRange { label: 2, .. })
    ));
    let ok = common::binary_dataset(&[0, 1, 1]);
    assert_eq!(ok.class_counts(), vec![1, 2]);
    assert_eq!(ok.ids(), ["s0000", "s0001", "s0002"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>());
}
