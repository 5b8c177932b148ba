//! Monte-Carlo dropout sampling and the statistics of the sampled paths.

mod distribution;
mod stats;

pub use distribution::{
    covariance_profile, distribution_stats, mc_sample, mc_sample_batch, Axis, CovarianceStep, StepStats,
    TrajectoryDistribution, DOMINANCE_RATIO,
};
pub use stats::{fit_bivariate_gaussian, GaussianState};
