//! Area-under-the-margin (AUM) tooling for finding mislabelled samples in
//! classification datasets.
//!
//! The crate covers the whole loop: load a dataset, optionally inject label
//! noise, train a small reference classifier that logs per-epoch logits,
//! score every sample by its average margin, calibrate a cutoff with a fake
//! class over two disjoint runs, and then sieve (drop) or flip the flagged
//! samples before retraining.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod noise;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod threshold;
pub mod trainer;

pub use corpus::{load_dataset, save_dataset, DataFormat, Dataset, Flag, LabelSpace, LabeledSample};
pub use dynamics::{compute_aum, compute_datamap, ingest_dynamics, margin, AumRecord, DataMapRecord, DynamicsTable};
pub use error::{Error, Result};
pub use model::{evaluate, LinearModel};
pub use trainer::{train, TrainConfig};
