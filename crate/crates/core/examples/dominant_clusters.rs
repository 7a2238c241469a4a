//! Lexical clusters with a dominant label: correctly labelled minority
//! members look like noise to AUM and fall below the cutoff.

use aum_core::noise::{dominant_class_report, generate_clustered_dataset, ClusterSpec};
use aum_core::pipeline::{prepare_experiment, ExperimentConfig};
use aum_core::TrainConfig;

fn main() -> aum_core::Result<()> {
    let data = generate_clustered_dataset(&ClusterSpec::default())?;
    let config = ExperimentConfig {
        train: TrainConfig {
            batch_size: 8,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let prepared = prepare_experiment(&data, &data, &config)?;
    let outcome = prepared.apply(&data, &config, 99.0)?;
    let rows = dominant_class_report(&prepared.governing_aums(), &prepared.train, None)?;

    println!("{:>7} {:>5} {:>12} {:>12} {:>14}", "cluster", "class", "aum_dominant", "aum_minority", "minority_flagged");
    for row in &rows {
        let flagged = data
            .iter()
            .filter(|s| s.cluster_id == Some(row.cluster_id) && s.label != row.dominant_class)
            .filter(|s| outcome.verdicts.flagged.contains(&s.id))
            .count();
        println!(
            "{:>7} {:>5} {:>12.3} {:>12.3} {:>10}/{}",
            row.cluster_id,
            row.dominant_class,
            row.mean_aum_dominant.unwrap_or(f64::NAN),
            row.mean_aum_non_dominant.unwrap_or(f64::NAN),
            flagged,
            row.n_non_dominant
        );
    }
    Ok(())
}
