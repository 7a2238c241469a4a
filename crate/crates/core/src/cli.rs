//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; data goes to files or stdout and diagnostics go to stderr.
//!
//! Exit codes: 0 on success, 1 for usage and contract errors, 2 for I/O
//! failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{load_dataset, save_dataset, DataFormat, Dataset};
use crate::dynamics::{compute_aum, compute_datamap, ingest_dynamics, DynamicsOptions, DynamicsTable};
use crate::error::{Error, Result};
use crate::io::{create_dir, csv_bytes_with_header, to_json_bytes, write_bytes};
use crate::model::evaluate;
use crate::noise::{generate_clustered_dataset, generate_corpus, inject_noise, ClusterSpec, CorpusSpec, NoiseSampling};
use crate::pipeline::{flip, percentile_sweep, run_experiment, sieve, ExperimentConfig};
use crate::report::{read_flagged, report_from_results, HistogramRange, HistogramSpec};
use crate::seed::{derive, RUN1, RUN2};
use crate::threshold::{execute_threshold_run, two_run_verdicts, RunScores, ThresholdManifest, ThresholdRunPlan};
use crate::trainer::{train_with_history, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "aum", version, about = "Find mislabelled samples with the area under the margin")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the one in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config (a training config, an experiment config, or a generator
    /// spec, depending on the subcommand).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset file (.tsv or .jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the format inferred from the extension.
    #[arg(long)]
    pub format: Option<DataFormat>,
    #[arg(long)]
    pub num_classes: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_any(&self.data, self.format, self.num_classes)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flip a fixed fraction of labels and record which ones.
    InjectNoise {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        rate: f64,
        /// Spread flips over classes in proportion to their size.
        #[arg(long)]
        stratified: bool,
        /// Where to write the noise mask; defaults next to the output.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Train the reference classifier and write its per-epoch logits.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Optional held-out split; its accuracy is printed.
        #[arg(long)]
        eval: Option<PathBuf>,
    },
    /// Validate an external dynamics log and write it in canonical order.
    Ingest {
        #[arg(long)]
        dynamics: PathBuf,
        #[arg(long)]
        allow_ragged: bool,
    },
    /// Score samples by area under the margin.
    Aum {
        #[arg(long)]
        dynamics: PathBuf,
        /// Dataset providing the label of every logged sample.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        allow_ragged: bool,
    },
    /// Confidence, variability and correctness per sample.
    Datamap {
        #[arg(long)]
        dynamics: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        allow_ragged: bool,
    },
    /// One fake-class threshold run, written to a directory.
    ThresholdRun {
        #[command(flatten)]
        data: DataArgs,
        /// 1 or 2.
        #[arg(long, default_value_t = 1)]
        run_index: u8,
        /// Directory of the run-1 output, required for run 2.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, default_value_t = 99.0)]
        percentile: f64,
        #[arg(long)]
        fake_fraction: Option<f64>,
    },
    /// Merge two threshold runs into one verdict per sample.
    Flag {
        #[arg(long)]
        run1: PathBuf,
        #[arg(long)]
        run2: PathBuf,
        #[arg(long, default_value_t = 99.0)]
        percentile: f64,
    },
    /// Drop flagged samples.
    Sieve {
        #[command(flatten)]
        data: DataArgs,
        /// Flags CSV with `sample_id` and `flagged` columns.
        #[arg(long)]
        flags: PathBuf,
        /// Where to write the removed samples.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Flip the labels of flagged samples (binary data).
    Flip {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        flags: PathBuf,
    },
    /// Noise injection, both threshold runs, filtering and retraining.
    RunExperiment,
    /// Run the experiment at several percentiles.
    Sweep {
        /// Comma-separated percentiles; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        percentiles: Vec<f64>,
    },
    /// Generate the lexically clustered binary dataset.
    SynthClusters,
    /// Generate a two-class topical corpus as train and validation files.
    SynthCorpus,
    /// Histogram, data-map and cluster tables from a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Flags CSV to use instead of the directory's own.
        #[arg(long)]
        flags: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, requires = "max")]
        min: Option<f64>,
        #[arg(long, requires = "min")]
        max: Option<f64>,
        /// Also render the histogram as SVG.
        #[arg(long)]
        svg: bool,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::InjectNoise {
            data,
            rate,
            stratified,
            mask,
        } => {
            let out = require_out(g)?;
            let dataset = data.load()?;
            let sampling = if *stratified {
                NoiseSampling::Stratified
            } else {
                NoiseSampling::Uniform
            };
            let (noisy, noise) = inject_noise(&dataset, *rate, g.seed.unwrap_or(0), sampling)?;
            save_dataset(&noisy, out, format_for(out, data.format)?)?;
            let mask_path = mask.clone().unwrap_or_else(|| out.with_extension("mask.json"));
            noise.save(&mask_path)?;
            log::info!("flipped {} of {} labels", noise.len(), dataset.len());
            Ok(())
        }
        Command::Train { data, eval } => {
            let out = require_out(g)?;
            let mut config = load_train_config(g)?;
            if let Some(seed) = g.seed {
                config.seed = seed;
            }
            let dataset = data.load()?;
            let outcome = train_with_history(&dataset, &config)?;
            outcome.dynamics.save(out)?;
            if let Some(path) = eval {
                let held_out = load_any(path, None, Some(dataset.label_space().num_classes()))?;
                println!("accuracy\t{}", evaluate(&outcome.model, &held_out)?);
            }
            if let Some(loss) = outcome.epoch_losses.last() {
                log::info!("final training loss {loss}");
            }
            Ok(())
        }
        Command::Ingest { dynamics, allow_ragged } => {
            let table = ingest_dynamics(dynamics, *allow_ragged)?;
            println!("samples\t{}\nepochs\t{}\nlogit_len\t{}", table.len(), table.num_epochs(), table.logit_len());
            if let Some(out) = &g.out {
                table.save(out)?;
            }
            Ok(())
        }
        Command::Aum {
            dynamics,
            labels,
            allow_ragged,
        } => {
            let out = require_out(g)?;
            let (table, labels) = dynamics_and_labels(dynamics, labels, *allow_ragged)?;
            let records = compute_aum(&table, &labels, options(*allow_ragged))?;
            #[derive(Serialize)]
            struct Row<'a> {
                sample_id: &'a str,
                aum: f64,
            }
            let rows = records.iter().map(|r| Row {
                sample_id: &r.sample_id,
                aum: r.aum,
            });
            write_bytes(out, &csv_bytes_with_header(&["sample_id", "aum"], rows)?)
        }
        Command::Datamap {
            dynamics,
            labels,
            allow_ragged,
        } => {
            let out = require_out(g)?;
            let (table, labels) = dynamics_and_labels(dynamics, labels, *allow_ragged)?;
            let records = compute_datamap(&table, &labels, options(*allow_ragged))?;
            write_bytes(
                out,
                &csv_bytes_with_header(&["sample_id", "confidence", "variability", "correctness"], &records)?,
            )
        }
        Command::ThresholdRun {
            data,
            run_index,
            prior,
            percentile,
            fake_fraction,
        } => {
            let out = require_out(g)?;
            let config = load_train_config(g)?;
            let dataset = data.load()?;
            let prior_plan = match prior {
                Some(dir) => Some(plan_from_manifest(&ThresholdManifest::load(&dir.join("manifest.json"))?)),
                None => None,
            };
            let master = g.seed.unwrap_or(0);
            let seed = match run_index {
                2 => derive(master, RUN2),
                _ => derive(master, RUN1),
            };
            let run = execute_threshold_run(&dataset, *run_index, prior_plan.as_ref(), seed, *fake_fraction, &config)?;
            let result = run.scores.threshold(*percentile)?;
            create_dir(out)?;
            ThresholdManifest::new(&run.scores.plan, &result).save(&out.join("manifest.json"))?;
            run.dynamics.save(&out.join("dynamics.jsonl"))?;
            #[derive(Serialize)]
            struct Row<'a> {
                sample_id: &'a str,
                aum: f64,
                label_used: usize,
            }
            let rows = run.scores.aums.iter().map(|r| Row {
                sample_id: &r.sample_id,
                aum: r.aum,
                label_used: r.label_used,
            });
            write_bytes(&out.join("aum.csv"), &csv_bytes_with_header(&["sample_id", "aum", "label_used"], rows)?)
        }
        Command::Flag { run1, run2, percentile } => {
            let out = require_out(g)?;
            let s1 = load_run_scores(run1)?;
            let s2 = load_run_scores(run2)?;
            let verdicts = two_run_verdicts(&s1, &s2, *percentile)?;
            #[derive(Serialize)]
            struct Row<'a> {
                sample_id: &'a str,
                governing_run: u8,
                aum: f64,
                threshold_value: f64,
                flagged: u8,
            }
            let rows = verdicts.per_sample.iter().map(|v| Row {
                sample_id: &v.sample_id,
                governing_run: v.governing_run,
                aum: v.aum,
                threshold_value: v.threshold_value,
                flagged: u8::from(v.flagged),
            });
            log::info!("flagged {} of {}", verdicts.flagged.len(), verdicts.per_sample.len());
            write_bytes(
                out,
                &csv_bytes_with_header(&["sample_id", "governing_run", "aum", "threshold_value", "flagged"], rows)?,
            )
        }
        Command::Sieve { data, flags, audit } => {
            let out = require_out(g)?;
            let dataset = data.load()?;
            let flagged = read_flagged(flags)?;
            let (kept, removed) = sieve(&dataset, &flagged)?;
            save_dataset(&kept, out, format_for(out, data.format)?)?;
            if let Some(path) = audit {
                let removed = Dataset::new(removed, dataset.label_space().clone(), "sieved")?;
                save_dataset(&removed, path, DataFormat::from_path(path)?)?;
            }
            Ok(())
        }
        Command::Flip { data, flags } => {
            let out = require_out(g)?;
            let dataset = data.load()?;
            let flipped = flip(&dataset, &read_flagged(flags)?)?;
            save_dataset(&flipped, out, format_for(out, data.format)?)
        }
        Command::RunExperiment => {
            let config = experiment_config(g)?;
            let result = run_experiment(&config)?;
            print_json(&result)
        }
        Command::Sweep { percentiles } => {
            let config = experiment_config(g)?;
            if config.output_dir.is_none() {
                return Err(Error::invalid("sweep needs --out or output_dir in the config"));
            }
            let outcome = percentile_sweep(&config, percentiles)?;
            print_json(&outcome.rows)
        }
        Command::SynthClusters => {
            let out = require_out(g)?;
            let mut spec: ClusterSpec = load_spec(g)?;
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            let dataset = generate_clustered_dataset(&spec)?;
            save_dataset(&dataset, out, DataFormat::from_path(out)?)
        }
        Command::SynthCorpus => {
            let out = require_out(g)?;
            let mut spec: CorpusSpec = load_spec(g)?;
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            let (train, validation) = generate_corpus(&spec)?;
            create_dir(out)?;
            save_dataset(&train, &out.join("train.jsonl"), DataFormat::Jsonl)?;
            save_dataset(&validation, &out.join("validation.jsonl"), DataFormat::Jsonl)
        }
        Command::Report {
            results,
            flags,
            bins,
            min,
            max,
            svg,
        } => {
            let out = require_out(g)?;
            let range = match (min, max) {
                (Some(min), Some(max)) => HistogramRange::Fixed { min: *min, max: *max },
                _ => HistogramRange::Auto,
            };
            let spec = HistogramSpec {
                bin_count: *bins,
                range,
            };
            let report = report_from_results(results, flags.as_deref(), &spec)?;
            create_dir(out)?;
            write_bytes(&out.join("aum_histogram.csv"), &report.histogram_csv)?;
            if *svg {
                write_bytes(&out.join("aum_histogram.svg"), report.histogram_svg.as_bytes())?;
            }
            write_bytes(&out.join("datamap.csv"), &report.datamap_csv)?;
            if let Some(clusters) = &report.clusters_csv {
                write_bytes(&out.join("clusters.csv"), clusters)?;
            }
            Ok(())
        }
    }
}

fn require_out(g: &GlobalArgs) -> Result<&Path> {
    g.out
        .as_deref()
        .ok_or_else(|| Error::invalid("this subcommand needs --out"))
}

fn load_any(path: &Path, format: Option<DataFormat>, num_classes: Option<usize>) -> Result<Dataset> {
    let format = match format {
        Some(f) => f,
        None => DataFormat::from_path(path)?,
    };
    load_dataset(path, format, num_classes)
}

fn format_for(out: &Path, fallback: Option<DataFormat>) -> Result<DataFormat> {
    match (DataFormat::from_path(out), fallback) {
        (Ok(f), _) => Ok(f),
        (Err(_), Some(f)) => Ok(f),
        (Err(e), None) => Err(e),
    }
}

fn options(allow_ragged: bool) -> DynamicsOptions {
    DynamicsOptions { allow_ragged }
}

fn dynamics_and_labels(
    dynamics: &Path,
    labels: &Path,
    allow_ragged: bool,
) -> Result<(DynamicsTable, BTreeMap<String, usize>)> {
    let table = ingest_dynamics(dynamics, allow_ragged)?;
    let dataset = load_any(labels, None, None)?;
    Ok((table, dataset.labels()))
}

fn read_config_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A training config file, or the `[train]` table of an experiment config.
fn load_train_config(g: &GlobalArgs) -> Result<TrainConfig> {
    let Some(path) = &g.config else {
        return Ok(TrainConfig::default());
    };
    let text = read_config_text(path)?;
    match toml::from_str::<TrainConfig>(&text) {
        Ok(config) => Ok(config),
        Err(first) => ExperimentConfig::from_toml(&text, path.parent())
            .map(|e| e.train)
            .map_err(|_| Error::invalid(format!("{}: {first}", path.display()))),
    }
}

fn load_spec<T: serde::de::DeserializeOwned + Default>(g: &GlobalArgs) -> Result<T> {
    match &g.config {
        Some(path) => toml::from_str(&read_config_text(path)?)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display()))),
        None => Ok(T::default()),
    }
}

fn experiment_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| Error::invalid("this subcommand needs --config"))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &g.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn plan_from_manifest(manifest: &ThresholdManifest) -> ThresholdRunPlan {
    ThresholdRunPlan {
        run_index: manifest.run_index,
        fake_ids: manifest.fake_ids.clone(),
        per_class_counts: Default::default(),
        seed: manifest.seed,
    }
}

/// Scores of a threshold-run directory, recomputed from its dynamics and
/// the fake assignment in its manifest.
fn load_run_scores(dir: &Path) -> Result<RunScores> {
    let manifest = ThresholdManifest::load(&dir.join("manifest.json"))?;
    let table = ingest_dynamics(&dir.join("dynamics.jsonl"), false)?;
    let labels = read_aum_labels(&dir.join("aum.csv"))?;
    let aums = compute_aum(&table, &labels, DynamicsOptions::default())?;
    for id in &manifest.fake_ids {
        if !table.contains(id) {
            return Err(Error::UnknownId(id.clone()));
        }
    }
    Ok(RunScores {
        plan: plan_from_manifest(&manifest),
        aums,
    })
}

fn read_aum_labels(path: &Path) -> Result<BTreeMap<String, usize>> {
    #[derive(serde::Deserialize)]
    struct Row {
        sample_id: String,
        label_used: usize,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    })?;
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            row.map(|r| (r.sample_id, r.label_used))
                .map_err(|e| Error::parse(path, i + 2, e.to_string()))
        })
        .collect()
}

fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<()> {
    use std::io::Write;
    let bytes = to_json_bytes(value)?;
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| Error::io("<stdout>", e))
}
