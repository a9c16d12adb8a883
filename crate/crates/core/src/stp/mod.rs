//! Student-t and Gaussian process regression of the model mismatch.

mod channel;
mod dataset;
mod fit;
mod kernel;
mod regression;

pub use channel::{ChannelModel, MismatchModels, Normalization, MODEL_FORMAT, MODEL_VERSION};
pub use dataset::{
    farthest_point_indices, Channel, Features, MismatchDataset, MismatchSample, DEFAULT_M_MAX, FEATURE_DIM,
    FEATURE_NAMES,
};
pub use fit::{fit_process, FitOptions, FitReport, HyperBounds, Process, RestartReport, RestartStatus};
pub use kernel::{gram, kernel_matrix, matern52_ard, matern52_gradient, Gram, KernelHyper};
pub use regression::{moment_match_gaussian, Posterior, StpModel, NU_MAX, NU_MIN};
