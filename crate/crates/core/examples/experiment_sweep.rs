//! The full loop: inject noise, run both threshold runs, sieve or flip the
//! flagged samples, retrain, and compare validation accuracy across
//! percentiles. Results directories are written to a temporary folder.

use aum_core::noise::{generate_corpus, CorpusSpec};
use aum_core::pipeline::{percentile_sweep_on, run_experiment_on, write_experiment_dir, ActionKind, ExperimentConfig};
use aum_core::TrainConfig;

fn main() -> aum_core::Result<()> {
    let (train, validation) = generate_corpus(&CorpusSpec {
        num_train: 800,
        num_validation: 400,
        ..CorpusSpec::default()
    })?;
    let dir = tempfile::tempdir().map_err(|e| aum_core::Error::io("tempdir", e))?;

    for action in [ActionKind::Sieve, ActionKind::Flip] {
        let config = ExperimentConfig {
            noise_rate: 0.4,
            action,
            percentile: 90.0,
            master_seed: 3,
            train: TrainConfig {
                learning_rate: 0.02,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let (prepared, outcome) = run_experiment_on(&train, &validation, &config)?;
        let out = dir.path().join(action.to_string());
        write_experiment_dir(&out, &config, &prepared, &outcome)?;
        let r = &outcome.result;
        println!(
            "{action:>5}: {} flagged, accuracy {:.3} -> {:.3}",
            r.num_flagged, r.acc_unfiltered, r.acc_filtered
        );
    }

    let config = ExperimentConfig {
        noise_rate: 0.2,
        num_seeds: 2,
        train: TrainConfig {
            learning_rate: 0.02,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let sweep = percentile_sweep_on(&train, &validation, &config, &[1.0, 10.0, 50.0, 90.0], Some(&dir.path().join("sweep")))?;
    print!("{}", String::from_utf8_lossy(&aum_core::pipeline::sweep_csv(&sweep.rows)?));
    Ok(())
}
