//! Figure data from a results directory: an AUM histogram split into noisy
//! and clean samples (CSV and SVG) and a data-map table joined with AUM.

use aum_core::noise::{generate_corpus, CorpusSpec};
use aum_core::pipeline::{run_experiment_on, write_experiment_dir, ExperimentConfig};
use aum_core::report::{report_from_results, HistogramRange, HistogramSpec};
use aum_core::TrainConfig;

fn main() -> aum_core::Result<()> {
    let (train, validation) = generate_corpus(&CorpusSpec {
        num_train: 600,
        num_validation: 200,
        ..CorpusSpec::default()
    })?;
    let config = ExperimentConfig {
        noise_rate: 0.2,
        percentile: 90.0,
        train: TrainConfig {
            learning_rate: 0.02,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let (prepared, outcome) = run_experiment_on(&train, &validation, &config)?;
    let dir = tempfile::tempdir().map_err(|e| aum_core::Error::io("tempdir", e))?;
    write_experiment_dir(dir.path(), &config, &prepared, &outcome)?;

    let spec = HistogramSpec {
        bin_count: 12,
        range: HistogramRange::Auto,
    };
    let report = report_from_results(dir.path(), None, &spec)?;
    print!("{}", String::from_utf8_lossy(&report.histogram_csv));
    let svg_path = dir.path().join("aum_histogram.svg");
    std::fs::write(&svg_path, &report.histogram_svg).map_err(|e| aum_core::Error::io(&svg_path, e))?;
    let datamap = String::from_utf8_lossy(&report.datamap_csv);
    for line in datamap.lines().take(4) {
        println!("{line}");
    }
    println!("... {} data-map rows", datamap.lines().count() - 1);
    Ok(())
}
