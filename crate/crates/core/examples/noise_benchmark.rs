//! Inject label noise at several rates and measure how well AUM separates
//! flipped samples from clean ones.

use aum_core::noise::{generate_corpus, CorpusSpec};
use aum_core::pipeline::{prepare_experiment, ExperimentConfig};
use aum_core::TrainConfig;

fn main() -> aum_core::Result<()> {
    let (train, validation) = generate_corpus(&CorpusSpec {
        num_train: 800,
        num_validation: 300,
        ..CorpusSpec::default()
    })?;
    println!("{:>5} {:>7} {:>9} {:>10} {:>8} {:>9}", "rate", "auc", "aum_noise", "aum_clean", "recall", "precision");
    for rate in [0.1, 0.2, 0.3, 0.4] {
        let config = ExperimentConfig {
            noise_rate: rate,
            master_seed: 5,
            train: TrainConfig {
                learning_rate: 0.02,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let prepared = prepare_experiment(&train, &validation, &config)?;
        let outcome = prepared.apply(&validation, &config, 90.0)?;
        let r = outcome.result.noise_report.expect("noise was injected");
        println!(
            "{rate:>5} {:>7.3} {:>9.3} {:>10.3} {:>8.3} {:>9.3}",
            r.roc_auc.unwrap_or(f64::NAN),
            r.mean_aum_noise.unwrap_or(f64::NAN),
            r.mean_aum_clean.unwrap_or(f64::NAN),
            r.recall.unwrap_or(f64::NAN),
            r.precision.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
