use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version written into every segmentation file.
pub const SEGMENTATION_FORMAT_VERSION: u32 = 1;

/// An ordered partition of `[0, duration)` described by its interior boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    duration: f64,
    boundaries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

impl Segmentation {
    pub fn new(duration: f64, boundaries: Vec<f64>) -> Result<Self> {
        Self::build(duration, boundaries, None)
    }

    pub fn with_labels(duration: f64, boundaries: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::build(duration, boundaries, Some(labels))
    }

    /// A single segment spanning the whole duration.
    pub fn whole(duration: f64) -> Result<Self> {
        Self::new(duration, Vec::new())
    }

    fn build(duration: f64, boundaries: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidSegmentation(format!(
                "duration must be positive, got {duration}"
            )));
        }
        for (i, &b) in boundaries.iter().enumerate() {
            if !(b.is_finite() && b > 0.0 && b < duration) {
                return Err(Error::InvalidSegmentation(format!(
                    "boundary {b} outside the open interval (0, {duration})"
                )));
            }
            if i > 0 && b <= boundaries[i - 1] {
                return Err(Error::InvalidSegmentation(format!(
                    "boundaries not strictly increasing at index {i}"
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != boundaries.len() + 1 {
                return Err(Error::InvalidSegmentation(format!(
                    "{} labels for {} segments",
                    l.len(),
                    boundaries.len() + 1
                )));
            }
        }
        Ok(Self {
            duration,
            boundaries,
            labels,
        })
    }

    /// Builds a segmentation from per-frame labels, placing a boundary at
    /// every frame where the label changes.
    pub fn from_frame_labels(labels: &[usize], fps: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSegmentation("no frames".into()));
        }
        let mut boundaries = Vec::new();
        let mut seg_labels = vec![labels[0]];
        for t in 1..labels.len() {
            if labels[t] != labels[t - 1] {
                boundaries.push(t as f64 / fps);
                seg_labels.push(labels[t]);
            }
        }
        Self::with_labels(labels.len() as f64 / fps, boundaries, seg_labels)
    }

    /// Re-validates after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::build(self.duration, self.boundaries, self.labels)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_segments(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// `(start, end)` of every segment in seconds.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut edges = Vec::with_capacity(self.boundaries.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(&self.boundaries);
        edges.push(self.duration);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Drops the labels, e.g. after merging segments.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }
}

/// On-disk form of a segmentation, shared by predictions and references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationFile {
    pub format_version: u32,
    pub video_id: String,
    pub duration_s: f64,
    pub boundaries_s: Vec<f64>,
    /// One label per segment, or empty when unlabelled.
    #[serde(default)]
    pub labels: Vec<usize>,
}

impl SegmentationFile {
    pub fn new(video_id: impl Into<String>, seg: &Segmentation) -> Self {
        Self {
            format_version: SEGMENTATION_FORMAT_VERSION,
            video_id: video_id.into(),
            duration_s: seg.duration(),
            boundaries_s: seg.boundaries().to_vec(),
            labels: seg.labels().map(<[usize]>::to_vec).unwrap_or_default(),
        }
    }

    pub fn to_segmentation(&self) -> Result<Segmentation> {
        if self.format_version != SEGMENTATION_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported segmentation format_version {}",
                self.format_version
            )));
        }
        if self.labels.is_empty() {
            Segmentation::new(self.duration_s, self.boundaries_s.clone())
        } else {
            Segmentation::with_labels(
                self.duration_s,
                self.boundaries_s.clone(),
                self.labels.clone(),
            )
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        file.to_segmentation()?;
        Ok(file)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
