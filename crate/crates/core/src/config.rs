//! The single JSON run configuration grouping every module's settings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline_hca::HcaConfig;
use crate::dcca::DccaConfig;
use crate::error::{Error, Result};
use crate::hsmm::HsmmConfig;
use crate::ot::OtConfig;
use crate::postprocess::MergeConfig;
use crate::synth::SynthConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Seeds network initialization and the sampler. Overrides `dcca.seed`.
    pub seed: u64,
    pub dcca: DccaConfig,
    /// Ridge of the linear CCA fitted on the transformed features.
    pub cca_reg: f64,
    /// Canonical directions used by the correlation signal; all when unset.
    pub cca_k: Option<usize>,
    pub ot: OtConfig,
    /// Half-width of the signal windows, in frames.
    pub window: usize,
    /// Dimension of the fused observations (clamped to the channel count).
    pub d_obs: usize,
    pub hsmm: HsmmConfig,
    pub merge: MergeConfig,
    pub hca: HcaConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 0,
            dcca: DccaConfig::default(),
            cca_reg: 1e-4,
            cca_k: None,
            ot: OtConfig::default(),
            window: 10,
            d_obs: 10,
            hsmm: HsmmConfig::default(),
            merge: MergeConfig::default(),
            hca: HcaConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults with the reduced network widths suited to 64/32-d inputs.
    pub fn desk_scale() -> Self {
        Self {
            dcca: DccaConfig::desk_scale(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported config format_version {}",
                self.format_version
            )));
        }
        self.dcca.validate()?;
        self.ot.validate()?;
        self.hsmm.validate()?;
        self.merge.validate()?;
        self.hca.validate()?;
        self.synth.validate()?;
        if !(self.cca_reg.is_finite() && self.cca_reg > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cca_reg must be positive, got {}",
                self.cca_reg
            )));
        }
        if self.cca_k == Some(0) || self.window == 0 || self.d_obs == 0 {
            return Err(Error::InvalidArgument(
                "cca_k, window and d_obs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Parses and validates a JSON configuration; absent fields take defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
