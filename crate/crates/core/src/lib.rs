//! Bayesian finite mixture clustering of mixed continuous and categorical data
//! with spike-and-slab variable weights and detection-limit censoring.

pub mod data;
pub mod distributions;
pub mod error;
pub mod matrix;
pub mod pipeline;
pub mod relabel;
pub mod sampler;
pub mod simulate;
pub mod summary;

pub use data::{load_dataset, read_labels, write_dataset, write_labels, CensorFlag, ColumnKind, ColumnSchema, Dataset, TrueLabels};
pub use distributions::{Rng, TruncationBounds};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use pipeline::{fit, replicate, FitOutput, ReplicateReport, ReplicateSpec};
pub use relabel::{apply_relabeling, run_relabel, PermutationTable, RelabelOutcome};
pub use sampler::{run_chain, ChainOutput, Hyperparameters, McmcConfig, Parameters, RunConfig};
pub use simulate::{apply_censoring, generate, naive_fill, CensorSpec, NormalParam, ScenarioId, ScenarioSpec};
pub use summary::{adjusted_rand_index, summarize_chain, PosteriorSummary};
