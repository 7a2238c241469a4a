//! Calibrate the AUM cutoff with a fake class. Two runs with disjoint fake
//! sets give every sample a verdict from a run in which it kept its label.

use aum_core::noise::{generate_corpus, inject_noise, CorpusSpec, NoiseSampling};
use aum_core::seed::StageSeeds;
use aum_core::threshold::{execute_threshold_run, two_run_verdicts};
use aum_core::TrainConfig;

fn main() -> aum_core::Result<()> {
    let (clean, _) = generate_corpus(&CorpusSpec {
        num_train: 600,
        num_validation: 10,
        ..CorpusSpec::default()
    })?;
    let seeds = StageSeeds::from_master(11);
    let (noisy, mask) = inject_noise(&clean, 0.2, seeds.inject, NoiseSampling::Uniform)?;
    let config = TrainConfig {
        learning_rate: 0.02,
        ..TrainConfig::default()
    };

    let run1 = execute_threshold_run(&noisy, 1, None, seeds.run1, None, &config)?;
    let run2 = execute_threshold_run(&noisy, 2, Some(&run1.scores.plan), seeds.run2, None, &config)?;
    println!(
        "fake class: {} samples in run 1, {} in run 2, overlap {}",
        run1.scores.plan.fake_ids.len(),
        run2.scores.plan.fake_ids.len(),
        run1.scores.plan.fake_ids.intersection(&run2.scores.plan.fake_ids).count()
    );

    println!("{:>10} {:>10} {:>10} {:>8} {:>8}", "percentile", "cutoff1", "cutoff2", "flagged", "noisy");
    for p in [1.0, 10.0, 50.0, 90.0, 99.0] {
        let v = two_run_verdicts(&run1.scores, &run2.scores, p)?;
        let hits = v.flagged.iter().filter(|id| mask.contains(id)).count();
        println!("{p:>10} {:>10.3} {:>10.3} {:>8} {:>8}", v.threshold1, v.threshold2, v.flagged.len(), hits);
    }
    println!("{} labels were flipped in total", mask.len());
    Ok(())
}
