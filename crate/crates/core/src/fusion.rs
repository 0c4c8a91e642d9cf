//! Builds the observation vectors the HSMM segments: selected feature and
//! signal channels, z-scored per column, then projected onto their leading
//! principal components.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datamodel::FeatureSequence;
use crate::error::{Error, Result};
use crate::linalg::{cross_covariance, sorted_sym_eigen};
pub use crate::ot::SignalSeries;

/// Which channels enter the fused observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSet {
    /// Transformed visual features.
    pub visual: bool,
    /// Transformed language features.
    pub language: bool,
    pub wd_v: bool,
    pub wd_l: bool,
    pub gwd: bool,
    pub cca: bool,
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::all()
    }
}

impl ChannelSet {
    pub const NAMES: [&'static str; 6] = ["visual", "language", "wd_v", "wd_l", "gwd", "cca"];

    pub fn all() -> Self {
        Self {
            visual: true,
            language: true,
            wd_v: true,
            wd_l: true,
            gwd: true,
            cca: true,
        }
    }

    pub fn none() -> Self {
        Self {
            visual: false,
            language: false,
            wd_v: false,
            wd_l: false,
            gwd: false,
            cca: false,
        }
    }

    /// Visual features and the visual Wasserstein channel.
    pub fn visual_only() -> Self {
        Self {
            visual: true,
            wd_v: true,
            ..Self::none()
        }
    }

    /// Language features and the language Wasserstein channel.
    pub fn language_only() -> Self {
        Self {
            language: true,
            wd_l: true,
            ..Self::none()
        }
    }

    pub fn gwd_only() -> Self {
        Self {
            gwd: true,
            ..Self::none()
        }
    }

    pub fn cca_only() -> Self {
        Self {
            cca: true,
            ..Self::none()
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::none()
    }

    fn flags(&self) -> [bool; 6] {
        [
            self.visual,
            self.language,
            self.wd_v,
            self.wd_l,
            self.gwd,
            self.cca,
        ]
    }

    /// Number of fused columns for the given feature widths.
    pub fn raw_dim(&self, d_visual: usize, d_language: usize) -> usize {
        let f = self.flags();
        f[0] as usize * d_visual
            + f[1] as usize * d_language
            + f[2..].iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.flags())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    /// Parses a comma-separated list of channel names, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Self::all());
        }
        let mut set = Self::none();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "visual" => set.visual = true,
                "language" => set.language = true,
                "wd_v" => set.wd_v = true,
                "wd_l" => set.wd_l = true,
                "gwd" => set.gwd = true,
                "cca" => set.cca = true,
                other => return Err(Error::InvalidArgument(format!("unknown channel '{other}'"))),
            }
        }
        if set.is_empty() {
            return Err(Error::InvalidArgument("no channels selected".into()));
        }
        Ok(set)
    }
}

/// Fused, standardized and projected observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    /// `n x d_obs`.
    pub data: DMatrix<f64>,
    pub channels: ChannelSet,
    /// Per-column mean of the raw fused matrix.
    pub means: DVector<f64>,
    /// Per-column sample standard deviation (0 for constant columns).
    pub stds: DVector<f64>,
    /// `raw_dim x d_obs` principal directions.
    pub basis: DMatrix<f64>,
    /// Fraction of the standardized variance kept by the projection.
    pub energy_retained: f64,
}

impl ObservationSequence {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Concatenates the selected channels into an `n x raw_dim` matrix.
pub fn fuse_channels(
    v2: &FeatureSequence,
    l2: &FeatureSequence,
    signals: &SignalSeries,
    channels: ChannelSet,
) -> Result<DMatrix<f64>> {
    let n = v2.n();
    if l2.n() != n || signals.len() != n {
        return Err(Error::Dimension(format!(
            "inputs disagree on length: visual {n}, language {}, signals {}",
            l2.n(),
            signals.len()
        )));
    }
    if channels.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one channel must be selected".into(),
        ));
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if channels.visual {
        cols.extend(v2.data().column_iter().map(|c| c.into_owned()));
    }
    if channels.language {
        cols.extend(l2.data().column_iter().map(|c| c.into_owned()));
    }
    for (on, values) in [
        (channels.wd_v, &signals.wd_v),
        (channels.wd_l, &signals.wd_l),
        (channels.gwd, &signals.gwd),
        (channels.cca, &signals.cca),
    ] {
        if on {
            cols.push(DVector::from_column_slice(values));
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Z-scores every column; constant columns become all zeros.
pub fn standardize(raw: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = raw.nrows();
    let mut z = raw.clone();
    let mut means = DVector::zeros(raw.ncols());
    let mut stds = DVector::zeros(raw.ncols());
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let var = if n > 1 {
            col.norm_squared() / (n - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        // Relative guard: columns whose spread is pure rounding count as constant.
        if std > 1e-12 * mean.abs().max(1.0) {
            col /= std;
            stds[j] = std;
        } else {
            col.fill(0.0);
        }
        means[j] = mean;
    }
    (z, means, stds)
}

/// Selected channels, standardized and projected onto `d_obs` principal components.
pub fn ablation_select(
    v2: &FeatureSequence,
    l2: &FeatureSequence,
    signals: &SignalSeries,
    channels: ChannelSet,
    d_obs: usize,
) -> Result<ObservationSequence> {
    let raw = fuse_channels(v2, l2, signals, channels)?;
    let raw_dim = raw.ncols();
    if d_obs == 0 || d_obs > raw_dim {
        return Err(Error::InvalidArgument(format!(
            "d_obs = {d_obs} must be in 1..={raw_dim}"
        )));
    }
    let (z, means, stds) = standardize(&raw);
    let cov = cross_covariance(&z, &z);
    let (vals, vecs) = sorted_sym_eigen(&cov);
    let mut basis = vecs.columns(0, d_obs).into_owned();
    for mut col in basis.column_iter_mut() {
        let pivot = col.iter().copied().fold(
            0.0f64,
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let kept: f64 = vals.iter().take(d_obs).map(|v| v.max(0.0)).sum();
    let energy_retained = if total > 0.0 { kept / total } else { 0.0 };
    let data = &z * &basis;
    Ok(ObservationSequence {
        data,
        channels,
        means,
        stds,
        basis,
        energy_retained,
    })
}

/// All channels fused and projected onto `d_obs` principal components.
pub fn build_observations(
    v2: &FeatureSequence,
    l2: &FeatureSequence,
    signals: &SignalSeries,
    d_obs: usize,
) -> Result<ObservationSequence> {
    ablation_select(v2, l2, signals, ChannelSet::all(), d_obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Modality;

    fn seq(m: DMatrix<f64>, modality: Modality) -> FeatureSequence {
        FeatureSequence::new(m, modality).unwrap()
    }

    fn signals(n: usize, f: impl Fn(usize) -> f64) -> SignalSeries {
        let v: Vec<f64> = (0..n).map(&f).collect();
        SignalSeries::new(
            v.clone(),
            v.clone(),
            v.clone(),
            v.iter().map(|x| x.tanh()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_inputs_give_zero_observations() {
        let v = seq(DMatrix::from_element(20, 3, 2.0), Modality::Visual);
        let l = seq(DMatrix::from_element(20, 2, -1.0), Modality::Language);
        let o = build_observations(&v, &l, &signals(20, |_| 0.5), 4).unwrap();
        assert!(o.data.iter().all(|&x| x == 0.0));
        assert_eq!(o.energy_retained, 0.0);
    }

    #[test]
    fn channel_parsing() {
        let c: ChannelSet = "visual,wd_v".parse().unwrap();
        assert_eq!(c, ChannelSet::visual_only());
        assert_eq!(c.to_string(), "visual,wd_v");
        assert!("".parse::<ChannelSet>().is_err());
        assert!("bogus".parse::<ChannelSet>().is_err());
        assert_eq!("all".parse::<ChannelSet>().unwrap(), ChannelSet::all());
    }

    #[test]
    fn visual_selection_drops_language_columns() {
        let v = seq(
            DMatrix::from_fn(10, 3, |r, c| (r * c) as f64),
            Modality::Visual,
        );
        let l = seq(
            DMatrix::from_fn(10, 5, |r, c| (r + c) as f64),
            Modality::Language,
        );
        let s = signals(10, |t| t as f64);
        let raw = fuse_channels(&v, &l, &s, ChannelSet::visual_only()).unwrap();
        assert_eq!(raw.ncols(), 4);
        assert_eq!(ChannelSet::visual_only().raw_dim(3, 5), 4);
        assert!(ablation_select(&v, &l, &s, ChannelSet::none(), 1).is_err());
    }

    #[test]
    fn length_mismatch() {
        let v = seq(DMatrix::zeros(10, 3), Modality::Visual);
        let l = seq(DMatrix::zeros(9, 3), Modality::Language);
        assert!(build_observations(&v, &l, &signals(10, |_| 0.0), 2).is_err());
    }
}
