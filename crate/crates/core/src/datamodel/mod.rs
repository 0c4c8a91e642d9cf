//! Core domain types shared by every stage of the pipeline.
//!
//! Feature sequences are sampled at one frame per second; frame `t` covers the
//! half-open interval `[t, t + 1)` seconds.

mod io;
mod manifest;
mod segmentation;
mod transcript;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_feature_file, read_feature_matrix, write_feature_file, write_feature_matrix};
pub use manifest::{LoadedVideo, Manifest};
pub use segmentation::{Segmentation, SegmentationFile, SEGMENTATION_FORMAT_VERSION};
pub use transcript::{
    align_transcript, clean_text, clean_transcript, AlignedTranscript, AlignmentReport, Sentence,
};

/// Frames per second of every feature sequence.
pub const FPS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Language,
}

/// A per-second embedding matrix for one modality (rows are frames).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: DMatrix<f64>,
    modality: Modality,
}

impl FeatureSequence {
    pub fn new(data: DMatrix<f64>, modality: Modality) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "feature sequence must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for c in 0..data.ncols() {
            for r in 0..data.nrows() {
                if !data[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self { data, modality })
    }

    /// Number of frames.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Embedding dimension.
    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn fps(&self) -> f64 {
        FPS
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Duration covered by the sequence, in seconds.
    pub fn duration(&self) -> f64 {
        self.n() as f64 / FPS
    }
}
