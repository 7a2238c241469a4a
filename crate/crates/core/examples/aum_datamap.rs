//! Score every sample of a noisy training set by its area under the margin
//! and by its data-map statistics, then list the lowest scores.

use aum_core::noise::{generate_corpus, inject_noise, CorpusSpec, NoiseSampling};
use aum_core::report::spearman;
use aum_core::{compute_aum, compute_datamap, train, TrainConfig};

fn main() -> aum_core::Result<()> {
    let (clean, _) = generate_corpus(&CorpusSpec {
        num_train: 600,
        num_validation: 10,
        ..CorpusSpec::default()
    })?;
    let (noisy, mask) = inject_noise(&clean, 0.15, 7, NoiseSampling::Uniform)?;
    let config = TrainConfig {
        learning_rate: 0.02,
        ..TrainConfig::default()
    };
    let (_, dynamics) = train(&noisy, &config)?;
    let labels = noisy.labels();
    let aums = compute_aum(&dynamics, &labels, Default::default())?;
    let datamap = compute_datamap(&dynamics, &labels, Default::default())?;

    let mut order: Vec<usize> = (0..aums.len()).collect();
    order.sort_by(|&a, &b| aums[a].aum.total_cmp(&aums[b].aum));
    println!("{:<8} {:>8} {:>10} {:>11} {:>6}", "id", "aum", "confidence", "variability", "noisy");
    for &i in order.iter().take(12) {
        let (a, d) = (&aums[i], &datamap[i]);
        println!(
            "{:<8} {:>8.3} {:>10.3} {:>11.3} {:>6}",
            a.sample_id,
            a.aum,
            d.confidence,
            d.variability,
            mask.contains(&a.sample_id)
        );
    }
    let a: Vec<f64> = aums.iter().map(|r| r.aum).collect();
    let c: Vec<f64> = datamap.iter().map(|r| r.confidence).collect();
    println!("spearman(aum, confidence) = {:.3}", spearman(&a, &c).unwrap_or(f64::NAN));
    Ok(())
}
