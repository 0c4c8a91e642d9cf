//! End-to-end segmentation of one video.
//!
//! [`prepare`] runs everything that does not depend on the channel selection
//! (transcript alignment, transforms, signals), so several channel sets can be
//! segmented from the same intermediate state.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::datamodel::{
    align_transcript, clean_transcript, AlignmentReport, FeatureSequence, LoadedVideo, Modality,
    Segmentation, Sentence,
};
use crate::dcca::{dcca_train, linear_cca_fit, CcaModel, DccaConfig, DccaModel};
use crate::error::{Error, Result, StageContext};
use crate::fusion::{ablation_select, standardize, ChannelSet, ObservationSequence};
use crate::hsmm::{fit_segment, GibbsDiagnostics, HdpHsmmHyper};
use crate::ot::{temporal_signals, SignalSeries};
use crate::postprocess::merge_short_segments;

/// Which views feed the segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Visual,
    Language,
    Multimodal,
}

impl InputMode {
    pub fn channels(self) -> ChannelSet {
        match self {
            Self::Visual => ChannelSet::visual_only(),
            Self::Language => ChannelSet::language_only(),
            Self::Multimodal => ChannelSet::all(),
        }
    }
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visual" => Ok(Self::Visual),
            "language" => Ok(Self::Language),
            "multimodal" => Ok(Self::Multimodal),
            other => Err(Error::InvalidArgument(format!(
                "unknown modality '{other}'"
            ))),
        }
    }
}

/// Channel-independent intermediate results for one video.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub video_id: String,
    pub duration: f64,
    pub alignment: AlignmentReport,
    pub dcca: DccaModel,
    /// Total correlation after each training epoch; empty for a supplied model.
    pub dcca_trace: Vec<f64>,
    pub cca: CcaModel,
    pub v2: FeatureSequence,
    pub l2: FeatureSequence,
    pub signals: SignalSeries,
}

#[derive(Debug, Clone)]
pub struct SegmentResult {
    /// Final segmentation after short-segment merging.
    pub segmentation: Segmentation,
    /// Sampler output before merging.
    pub raw: Segmentation,
    pub observations: ObservationSequence,
    pub diagnostics: GibbsDiagnostics,
}

/// Run metadata written next to each segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub format_version: u32,
    pub video_id: String,
    pub channels: String,
    pub seed: u64,
    pub d_obs: usize,
    pub energy_retained: f64,
    pub dcca_trace: Vec<f64>,
    pub canonical_correlations: Vec<f64>,
    pub dropped_sentences: Vec<usize>,
    pub empty_frames: usize,
    pub raw_boundaries_s: Vec<f64>,
    pub gibbs: GibbsDiagnostics,
}

impl RunDiagnostics {
    pub fn new(prepared: &Prepared, result: &SegmentResult, seed: u64) -> Self {
        Self {
            format_version: 1,
            video_id: prepared.video_id.clone(),
            channels: result.observations.channels.to_string(),
            seed,
            d_obs: result.observations.dim(),
            energy_retained: result.observations.energy_retained,
            dcca_trace: prepared.dcca_trace.clone(),
            canonical_correlations: prepared.cca.rho.clone(),
            dropped_sentences: prepared.alignment.dropped.clone(),
            empty_frames: prepared.alignment.empty_frames,
            raw_boundaries_s: result.raw.boundaries().to_vec(),
            gibbs: result.diagnostics.clone(),
        }
    }
}

fn zscored(x: &FeatureSequence) -> Result<FeatureSequence> {
    FeatureSequence::new(standardize(x.data()).0, x.modality())
}

/// Trains the transforms on one video with the run's seed.
pub fn train_transforms(
    visual: &FeatureSequence,
    language: &FeatureSequence,
    cfg: &RunConfig,
) -> Result<(DccaModel, Vec<f64>)> {
    train_transforms_on(&[(visual, language)], cfg)
}

/// Trains one pair of transforms on several videos. Each video is z-scored on
/// its own, as at inference time, before the frames are pooled.
pub fn train_transforms_on(
    videos: &[(&FeatureSequence, &FeatureSequence)],
    cfg: &RunConfig,
) -> Result<(DccaModel, Vec<f64>)> {
    if videos.is_empty() {
        return Err(Error::InvalidArgument("no videos to train on".into())).stage("dcca");
    }
    let mut vs = Vec::with_capacity(videos.len());
    let mut ls = Vec::with_capacity(videos.len());
    for (v, l) in videos {
        vs.push(zscored(v)?.into_data());
        ls.push(zscored(l)?.into_data());
    }
    let stack = |parts: &[DMatrix<f64>]| -> Result<DMatrix<f64>> {
        let d = parts[0].ncols();
        if parts.iter().any(|p| p.ncols() != d) {
            return Err(Error::Dimension(
                "videos disagree on feature dimension".into(),
            ));
        }
        let rows: Vec<_> = parts.iter().flat_map(|p| p.row_iter()).collect();
        Ok(DMatrix::from_rows(&rows))
    };
    let (x, y) = (stack(&vs).stage("dcca")?, stack(&ls).stage("dcca")?);
    let dcca_cfg = DccaConfig {
        seed: cfg.seed,
        ..cfg.dcca.clone()
    };
    let trained = dcca_train(&x, &y, &dcca_cfg).stage("dcca")?;
    Ok((trained.model, trained.trace))
}

/// Aligns the transcript, applies (or trains) the transforms, fits linear CCA
/// on the transformed views and computes the temporal signals.
pub fn prepare(
    video_id: &str,
    visual: &FeatureSequence,
    language: &FeatureSequence,
    sentences: &[Sentence],
    cfg: &RunConfig,
    model: Option<&DccaModel>,
) -> Result<Prepared> {
    cfg.validate().stage("config")?;
    let n = visual.n();
    if language.n() != n {
        return Err(Error::Dimension(format!(
            "visual has {n} frames, language has {}",
            language.n()
        )))
        .stage("load");
    }
    let cleaned = clean_transcript(sentences);
    let (_, alignment) = align_transcript(n, &cleaned).stage("align")?;

    let (dcca, dcca_trace) = match model {
        Some(m) => (m.clone(), Vec::new()),
        None => train_transforms(visual, language, cfg)?,
    };
    let (v2, l2) = dcca
        .transform(zscored(visual)?.data(), zscored(language)?.data())
        .stage("dcca")?;
    let v2 = FeatureSequence::new(v2, Modality::Visual).stage("dcca")?;
    let l2 = FeatureSequence::new(l2, Modality::Language).stage("dcca")?;

    let k = cfg.cca_k.unwrap_or(usize::MAX).min(v2.d()).min(l2.d());
    let cca = linear_cca_fit(v2.data(), l2.data(), k, cfg.cca_reg).stage("cca")?;
    let signals = temporal_signals(&v2, &l2, &cca, cfg.window, &cfg.ot).stage("signals")?;
    Ok(Prepared {
        video_id: video_id.to_string(),
        duration: n as f64 / visual.fps(),
        alignment,
        dcca,
        dcca_trace,
        cca,
        v2,
        l2,
        signals,
    })
}

/// Fuses the selected channels, fits the HSMM and merges short segments.
pub fn segment_prepared(
    prepared: &Prepared,
    channels: ChannelSet,
    cfg: &RunConfig,
) -> Result<SegmentResult> {
    let raw_dim = channels.raw_dim(prepared.v2.d(), prepared.l2.d());
    let d_obs = cfg.d_obs.min(raw_dim);
    let observations = ablation_select(
        &prepared.v2,
        &prepared.l2,
        &prepared.signals,
        channels,
        d_obs,
    )
    .stage("fusion")?;
    let hyper = HdpHsmmHyper::from_data(&cfg.hsmm, &observations.data).stage("hsmm")?;
    let fit = fit_segment(&observations.data, &hyper, cfg.hsmm.sweeps, cfg.seed).stage("hsmm")?;
    let raw = Segmentation::from_frame_labels(&fit.labels, prepared.v2.fps()).stage("hsmm")?;
    let segmentation =
        merge_short_segments(&raw, &prepared.v2, &prepared.l2, &cfg.merge).stage("merge")?;
    Ok(SegmentResult {
        segmentation,
        raw,
        observations,
        diagnostics: fit.diagnostics,
    })
}

/// Full pipeline on a loaded video.
pub fn segment_video(
    video: &LoadedVideo,
    channels: ChannelSet,
    cfg: &RunConfig,
    model: Option<&DccaModel>,
) -> Result<(Prepared, SegmentResult)> {
    let prepared = prepare(
        &video.manifest.video_id,
        &video.visual,
        &video.language,
        &video.manifest.sentences,
        cfg,
        model,
    )?;
    let result = segment_prepared(&prepared, channels, cfg)?;
    Ok((prepared, result))
}
