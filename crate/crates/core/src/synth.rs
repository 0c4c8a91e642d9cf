//! Synthetic two-view sequences with known segment boundaries.
//!
//! Each segment has its own visual mean; frames scatter around it with
//! isotropic noise and a fraction are replaced by far outliers. The language
//! view is a saturating random projection of the outlier-free visual signal
//! plus its own noise, so it shares the segment structure but not the spikes.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    write_feature_file, FeatureSequence, Manifest, Modality, Segmentation, SegmentationFile,
    Sentence, FPS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of frames.
    pub t: usize,
    /// Number of segments.
    pub k: usize,
    pub d_v: usize,
    pub d_l: usize,
    /// Expected Euclidean distance between two segment means.
    pub sep: f64,
    /// Per-coordinate visual noise standard deviation.
    pub noise: f64,
    /// Per-coordinate language noise standard deviation.
    pub lang_noise: f64,
    /// Gain of the visual-to-language projection, in units of the spread of
    /// the segment means.
    pub coupling: f64,
    /// Probability that a frame is replaced by a visual outlier.
    pub spike_rate: f64,
    /// Outlier distance from the origin, in multiples of `sep`.
    pub spike_scale: f64,
    /// Minimum segment length in frames.
    pub min_len: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            t: 1800,
            k: 8,
            d_v: 64,
            d_l: 32,
            sep: 5.0,
            noise: 1.0,
            lang_noise: 0.5,
            coupling: 1.0,
            spike_rate: 0.02,
            spike_scale: 3.0,
            min_len: 120,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.min_len == 0 || self.d_v == 0 || self.d_l == 0 {
            return Err(Error::InvalidArgument(
                "k, min_len, d_v and d_l must be at least 1".into(),
            ));
        }
        if self.t < self.k * self.min_len {
            return Err(Error::InvalidArgument(format!(
                "{} segments of at least {} frames do not fit in {} frames",
                self.k, self.min_len, self.t
            )));
        }
        for (name, v) in [
            ("sep", self.sep),
            ("noise", self.noise),
            ("lang_noise", self.lang_noise),
            ("coupling", self.coupling),
            ("spike_scale", self.spike_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.spike_rate) {
            return Err(Error::InvalidArgument(format!(
                "spike_rate must lie in [0, 1], got {}",
                self.spike_rate
            )));
        }
        Ok(())
    }
}

/// A generated video with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub video_id: String,
    pub visual: FeatureSequence,
    pub language: FeatureSequence,
    pub sentences: Vec<Sentence>,
    /// Reference segmentation; label `k` marks the k-th segment.
    pub truth: Segmentation,
    /// Segment index of every frame.
    pub frame_segments: Vec<usize>,
    /// Indices of frames replaced by outliers.
    pub spikes: Vec<usize>,
    /// Segment means, one row per segment.
    pub means: DMatrix<f64>,
}

const FILLER: [&str; 8] = ["the", "and", "so", "we", "now", "this", "okay", "right"];

fn segment_lengths(cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<usize> {
    let extra = cfg.t - cfg.k * cfg.min_len;
    let gamma = Gamma::new(4.0, 1.0).expect("valid shape");
    let raw: Vec<f64> = (0..cfg.k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let shares: Vec<f64> = raw.iter().map(|r| r / total * extra as f64).collect();
    let mut alloc: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut left = extra - alloc.iter().sum::<usize>();
    // largest remainders first, earlier segments win ties
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| {
        (shares[b] - shares[b].floor())
            .total_cmp(&(shares[a] - shares[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    alloc.into_iter().map(|a| a + cfg.min_len).collect()
}

fn gaussian_vec(d: usize, std: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

fn sentence_for(segment: usize, t: usize, rng: &mut impl Rng) -> Sentence {
    let words = rng.random_range(4..=8);
    let text: Vec<String> = (0..words)
        .map(|_| {
            if rng.random::<f64>() < 0.8 {
                format!("topic{segment}word{}", rng.random_range(0..12))
            } else {
                FILLER.choose(rng).expect("non-empty").to_string()
            }
        })
        .collect();
    Sentence::new(text.join(" "), t as f64, 1.0)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthVideo> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lengths = segment_lengths(cfg, &mut rng);

    // E||mu_a - mu_b||^2 = sep^2
    let mean_std = cfg.sep / (2.0 * cfg.d_v as f64).sqrt();
    let means = DMatrix::from_fn(cfg.k, cfg.d_v, |_, _| {
        mean_std * rng.sample::<f64, _>(StandardNormal)
    });
    // A·mu has per-coordinate std `coupling`, so language carries the topic
    let spread = if mean_std > 0.0 {
        mean_std
    } else {
        cfg.noise.max(f64::MIN_POSITIVE)
    };
    let a_std = cfg.coupling / (spread * (cfg.d_v as f64).sqrt());
    let a = DMatrix::from_fn(cfg.d_l, cfg.d_v, |_, _| {
        a_std * rng.sample::<f64, _>(StandardNormal)
    });

    let mut frame_segments = Vec::with_capacity(cfg.t);
    for (k, &len) in lengths.iter().enumerate() {
        frame_segments.extend(std::iter::repeat_n(k, len));
    }
    let mut visual = DMatrix::zeros(cfg.t, cfg.d_v);
    let mut language = DMatrix::zeros(cfg.t, cfg.d_l);
    let mut spikes = Vec::new();
    let mut sentences = Vec::with_capacity(cfg.t);
    let spike_std = cfg.spike_scale * cfg.sep / (cfg.d_v as f64).sqrt();
    for (t, &k) in frame_segments.iter().enumerate() {
        let clean = means.row(k).transpose() + gaussian_vec(cfg.d_v, cfg.noise, &mut rng);
        let lang = (&a * &clean).map(f64::tanh) + gaussian_vec(cfg.d_l, cfg.lang_noise, &mut rng);
        let seen = if rng.random::<f64>() < cfg.spike_rate {
            spikes.push(t);
            gaussian_vec(cfg.d_v, spike_std, &mut rng)
        } else {
            clean
        };
        visual.set_row(t, &seen.transpose());
        language.set_row(t, &lang.transpose());
        sentences.push(sentence_for(k, t, &mut rng));
    }

    let mut boundaries = Vec::with_capacity(cfg.k - 1);
    let mut acc = 0;
    for len in &lengths[..cfg.k - 1] {
        acc += len;
        boundaries.push(acc as f64 / FPS);
    }
    let truth = Segmentation::with_labels(cfg.t as f64 / FPS, boundaries, (0..cfg.k).collect())?;
    Ok(SynthVideo {
        video_id: format!("synth-{}", cfg.seed),
        visual: FeatureSequence::new(visual, Modality::Visual)?,
        language: FeatureSequence::new(language, Modality::Language)?,
        sentences,
        truth,
        frame_segments,
        spikes,
        means,
    })
}

impl SynthVideo {
    /// Writes `visual.lsg`, `language.lsg`, `truth.json` and `manifest.json`
    /// into `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_feature_file(dir.join("visual.lsg"), &self.visual)?;
        write_feature_file(dir.join("language.lsg"), &self.language)?;
        SegmentationFile::new(&self.video_id, &self.truth).write(dir.join("truth.json"))?;
        let manifest = Manifest {
            format_version: 1,
            video_id: self.video_id.clone(),
            visual_path: "visual.lsg".into(),
            language_path: "language.lsg".into(),
            sentences: self.sentences.clone(),
            reference_boundaries: Some(self.truth.boundaries().to_vec()),
        };
        manifest.write(dir.join("manifest.json"))?;
        Ok(manifest)
    }
}
