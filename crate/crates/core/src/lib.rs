//! Unsupervised multimodal temporal segmentation of long videos.
//!
//! The pipeline consumes per-second visual and language embeddings, learns
//! correlated nonlinear transforms of both views, derives optimal-transport
//! and correlation signals, and segments the fused observations with an
//! HDP-HSMM fitted by weak-limit Gibbs sampling. Segment boundaries are
//! scored against references with a tolerance-interval protocol.

pub mod baseline_hca;
pub mod config;
pub mod datamodel;
pub mod dcca;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod hsmm;
pub mod linalg;
pub mod ot;
pub mod pipeline;
pub mod postprocess;
pub mod synth;

pub use error::{Error, Result};
