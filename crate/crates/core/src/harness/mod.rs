//! Scenario definitions, synthetic data, scoring and report emission.

pub mod config;
pub mod experiment;
pub mod io;
pub mod scoring;
pub mod synth;

pub use config::{Difficulty, ExperimentConfig, LayoutSpec, NoiseSpec, SampleSpec, Scenario, TruthSpec};
pub use experiment::{probe_count, run_experiment, run_trial, trial_samples, trial_seed, ExperimentReport, TrialRow};
pub use io::{read_observations_file, write_outputs, EigenmatrixExport};
pub use scoring::{match_and_score, Score};
pub use synth::{add_noise, derive_seed, Stream, generate_samples, spike_layout, synthesize};
