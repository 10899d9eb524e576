//! Center recovery for mixtures of identical spherical Gaussians.
//!
//! The pipeline: split far-apart clusters on a proximity graph, reduce
//! dimension (PCA to k, then a random frame to dbar ~ log k), estimate the
//! deconvolved mixture density pointwise from the empirical characteristic
//! function by Monte-Carlo integration over a frequency ball, locate its
//! spikes with a derivative-free maximizer, aggregate runs by consensus,
//! patch the projected centers back to full dimension, and polish with
//! fixed-weight EM.

pub mod config;
pub mod deconv;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod projection;
pub mod report;
pub mod rng;
pub mod spikes;
mod trig;

pub use config::{ConstantsConfig, SeparationSpec};
pub use deconv::{
    draw_frequencies, ecf, exact_cf, exact_smoothed, kernel_fidelity_bound, kernel_peak,
    oracle_eval, s_hat, theory_budgets, unit_ball_volume, DeconvKernel, FrequencyDraw,
    OracleEstimate,
};
pub use error::{Error, Result};
pub use metrics::{dist, hausdorff, min_separation};
pub use model::{sample_mixture, MixtureParams, SampleSet};
pub use pipeline::{
    boost, boost_tolerance, learn_mixture, mixture_nll, refine, BudgetEcho, ComponentReport,
    LearnConfig, LearnResult, RunDiagnostics, RunOutput,
};
pub use preprocess::{
    coverage_sample_size, pca_reduce, proximity_threshold, split_clusters, BoundingBall,
    ProximityDecomposition,
};
pub use projection::{patch_centers, project, random_frame, reduced_dim, ProjectionFrame};
pub use report::{
    config_hash, emit_report, probe_oracle, report_to_csv, report_to_json, run_experiment,
    ExperimentConfig, GeneratorSpec, MixtureSource, Mode, OracleProbe, Report, ReportFormat,
    StageRecord, WeightScheme,
};
pub use spikes::{
    dedup, enumerate_lattice, filter_candidates, find_spikes, maximize_in_ball, BallMax,
    FindSpikesConfig, LatticeScale, LatticeSpec, OracleSource, SeedMode, SpikeCandidate, SpikeRun,
};
