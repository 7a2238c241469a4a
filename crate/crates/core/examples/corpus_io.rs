//! Build a small dataset in memory, write it as TSV and JSONL, and read it
//! back.

use aum_core::{load_dataset, save_dataset, DataFormat, Dataset, LabelSpace, LabeledSample};

fn main() -> aum_core::Result<()> {
    let space = LabelSpace::binary().with_class_names(vec!["negative".into(), "positive".into()])?;
    let samples = vec![
        LabeledSample::new("r1", "a gripping and tender film", 1),
        LabeledSample::new("r2", "flat characters and a tired plot", 0),
        LabeledSample::new("r3", "the cast is wonderful", 1),
    ];
    let dataset = Dataset::new(samples, space, "train")?;
    println!("{} samples, class counts {:?}", dataset.len(), dataset.class_counts());

    let dir = tempfile::tempdir().map_err(|e| aum_core::Error::io("tempdir", e))?;
    for format in [DataFormat::Tsv, DataFormat::Jsonl] {
        let path = dir.path().join(format!("reviews.{}", format.extension()));
        save_dataset(&dataset, &path, format)?;
        let back = load_dataset(&path, format, Some(2))?;
        println!("--- {format} ---");
        print!("{}", std::fs::read_to_string(&path).unwrap());
        assert_eq!(back.labels(), dataset.labels());
    }
    Ok(())
}
