//! Metrics, classifiers and the experiment drivers built on them.

pub mod classifier;
pub mod experiments;
pub mod metrics;
pub mod report;

pub use classifier::{fit_classifier, fit_ovr, lambda_grid, select_lambda, stratified_split, ClassifierModel, ClassifierReport};
pub use experiments::{
    beta_grid, classification_benchmark, corrupt, group_of, homoclinic_divergence, landscape_check, noise_sweep, recon_table,
    resolution_study, sparsity_point, sparsity_sweep, ClassificationBenchmark, HomoclinicConfig, HomoclinicReport,
    LandscapeReport, NoiseRow, NoiseSweep, Reconstructor, Representation, ResolutionConfig, ResolutionRow,
    SparsityPoint,
};
pub use metrics::{f1_macro, mean_std, parameter_error, sparsity_ratio, spearman, F1Scores};
pub use report::{config_hash, GroupSummary, MetricsReport, SampleRecord, Stat, ALL_GROUPS};
