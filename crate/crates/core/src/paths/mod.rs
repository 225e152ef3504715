//! Function-valued GP samples and the feature maps behind them.

pub mod features;
pub mod halton;
pub mod sampler;
pub mod studies;

pub use features::{build_hilbert, build_mercer_se, build_qmc, build_rff, FeatureKind, FeatureMap};
pub use sampler::{
    draw_path_batch, draw_pathwise_path, draw_prior_path, draw_weight_space_path, draw_weight_space_path_with,
    exhaustive_sample, path_moments, wasserstein2, PathBatch, PathKind, PcUpdate, SamplePath, WeightSampler,
};
