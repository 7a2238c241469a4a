//! Train the reference classifier on a synthetic corpus, look at the loss
//! curve, and save the per-epoch logits as a dynamics log.

use aum_core::noise::{generate_corpus, CorpusSpec};
use aum_core::trainer::train_with_history;
use aum_core::{evaluate, TrainConfig};

fn main() -> aum_core::Result<()> {
    let spec = CorpusSpec {
        num_train: 400,
        num_validation: 200,
        ..CorpusSpec::default()
    };
    let (train, validation) = generate_corpus(&spec)?;
    let config = TrainConfig {
        epochs: 10,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let outcome = train_with_history(&train, &config)?;
    for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
        println!("epoch {epoch:2}  loss {loss:.4}");
    }
    println!("validation accuracy {:.3}", evaluate(&outcome.model, &validation)?);

    let dir = tempfile::tempdir().map_err(|e| aum_core::Error::io("tempdir", e))?;
    let path = dir.path().join("dynamics.jsonl");
    outcome.dynamics.save(&path)?;
    let first = std::fs::read_to_string(&path).unwrap();
    println!("{} records, first: {}", outcome.dynamics.len() * outcome.dynamics.num_epochs(), first.lines().next().unwrap());
    Ok(())
}
