//! Benchmark harness: dataset ingestion, split protocols, the experiment
//! runner and report writing.

pub mod dataset;
pub mod experiment;
pub mod report;
pub mod split;

pub use dataset::{load_dataset, Dataset, DatasetLayout, Sample};
pub use experiment::{
    compute_descriptors, run_experiment, run_experiment_with, run_on_descriptors, sweep_steps,
    ExperimentReport, RunOptions, RunSnapshot,
};
pub use report::{read_accuracy_csv, read_confusion_csv, write_report};
pub use split::{make_splits, repetition_seed, Split, SplitProtocol};
