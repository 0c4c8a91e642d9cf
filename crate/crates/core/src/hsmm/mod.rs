//! Sticky-free hierarchical Dirichlet process hidden semi-Markov model with
//! Gaussian emissions and shifted-Poisson durations, fit by weak-limit
//! blocked Gibbs sampling.

mod dist;
mod fit;
mod messages;
mod model;

pub use fit::{fit_segment, fit_segment_with, GibbsDiagnostics, HsmmFit};
pub use messages::{
    frame_labels, hsmm_backward_messages, label_runs, sample_states, segmentation_log_posterior,
    BackwardMessages, LogModel, Segment, LOG_LIK_FLOOR,
};
pub use model::{
    duration_log_pmf, duration_pmf, log_joint, resample_emissions, resample_params,
    truncated_duration_pmf, Gaussian, HdpHsmmHyper, HsmmConfig, HsmmState,
};
