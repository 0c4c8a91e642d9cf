use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_feature_file, FeatureSequence, Modality, Sentence};
use crate::error::{Error, Result};

/// Per-video input description exchanged with the feature extractor.
///
/// Relative feature paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub video_id: String,
    pub visual_path: PathBuf,
    pub language_path: PathBuf,
    #[serde(default)]
    pub sentences: Vec<Sentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_boundaries: Option<Vec<f64>>,
}

fn default_version() -> u32 {
    1
}

/// A manifest together with its loaded feature sequences.
#[derive(Debug, Clone)]
pub struct LoadedVideo {
    pub manifest: Manifest,
    pub visual: FeatureSequence,
    pub language: FeatureSequence,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        if m.format_version != 1 {
            return Err(Error::Format(format!(
                "unsupported manifest format_version {}",
                m.format_version
            )));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if m.visual_path.is_relative() {
            m.visual_path = base.join(&m.visual_path);
        }
        if m.language_path.is_relative() {
            m.language_path = base.join(&m.language_path);
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads both feature files and checks that they agree on the frame count.
    pub fn load(self) -> Result<LoadedVideo> {
        let visual = load_feature_file(&self.visual_path, Modality::Visual)?;
        let language = load_feature_file(&self.language_path, Modality::Language)?;
        if visual.n() != language.n() {
            return Err(Error::Dimension(format!(
                "visual has {} frames but language has {}",
                visual.n(),
                language.n()
            )));
        }
        for s in &self.sentences {
            s.validate()?;
        }
        Ok(LoadedVideo {
            manifest: self,
            visual,
            language,
        })
    }
}
