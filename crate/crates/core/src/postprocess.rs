//! Merging of segments shorter than a minimum length into their most similar
//! neighbor.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::datamodel::{FeatureSequence, Segmentation};
use crate::error::{Error, Result};
use crate::linalg::cosine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    /// Minimum segment length in seconds.
    pub l_s: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { l_s: 60.0 }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_s.is_finite() && self.l_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "l_s must be positive, got {}",
                self.l_s
            )));
        }
        Ok(())
    }
}

fn segment_mean(x: &FeatureSequence, start: f64, end: f64) -> DVector<f64> {
    let n = x.n();
    let a = ((start * x.fps()).round() as usize).min(n);
    let b = ((end * x.fps()).round() as usize).clamp(a, n);
    if a == b {
        return DVector::zeros(x.d());
    }
    let rows = x.data().rows(a, b - a);
    DVector::from_iterator(x.d(), rows.column_iter().map(|c| c.sum() / (b - a) as f64))
}

struct Piece {
    start: f64,
    end: f64,
    label: Option<usize>,
    v: DVector<f64>,
    l: DVector<f64>,
}

impl Piece {
    fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Repeatedly absorbs the shortest segment below `l_s` into the adjacent
/// segment whose mean transformed features are most similar (sum of visual
/// and language cosines). Ties go to the earlier neighbor. Merged segments
/// keep the label of the absorbing neighbor, and neighbors that end up with
/// the same label are joined, since a boundary only exists where the label
/// changes.
pub fn merge_short_segments(
    seg: &Segmentation,
    v2: &FeatureSequence,
    l2: &FeatureSequence,
    cfg: &MergeConfig,
) -> Result<Segmentation> {
    cfg.validate()?;
    if v2.n() != l2.n() {
        return Err(Error::Dimension(format!(
            "visual has {} frames, language has {}",
            v2.n(),
            l2.n()
        )));
    }
    let covered = v2.n() as f64 / v2.fps();
    if seg.duration() > covered + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "segmentation spans {} s but features cover {covered} s",
            seg.duration()
        )));
    }
    let labels = seg.labels();
    let mut pieces: Vec<Piece> = seg
        .segments()
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| Piece {
            start,
            end,
            label: labels.map(|l| l[i]),
            v: segment_mean(v2, start, end),
            l: segment_mean(l2, start, end),
        })
        .collect();

    while pieces.len() > 1 {
        let Some(idx) = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.len() < cfg.l_s)
            .min_by(|(_, a), (_, b)| a.len().total_cmp(&b.len()))
            .map(|(i, _)| i)
        else {
            break;
        };
        let sim = |j: usize| {
            cosine(pieces[idx].v.as_slice(), pieces[j].v.as_slice())
                + cosine(pieces[idx].l.as_slice(), pieces[j].l.as_slice())
        };
        let target = match (
            idx.checked_sub(1),
            (idx + 1 < pieces.len()).then_some(idx + 1),
        ) {
            (Some(left), Some(right)) => {
                if sim(right) > sim(left) {
                    right
                } else {
                    left
                }
            }
            (Some(left), None) => left,
            (None, Some(right)) => right,
            (None, None) => unreachable!("more than one piece"),
        };
        let (mut lo, mut hi) = (idx.min(target), idx.max(target));
        let label = pieces[target].label;
        if label.is_some() {
            while lo > 0 && pieces[lo - 1].label == label {
                lo -= 1;
            }
            while hi + 1 < pieces.len() && pieces[hi + 1].label == label {
                hi += 1;
            }
        }
        let (start, end) = (pieces[lo].start, pieces[hi].end);
        pieces.drain(lo + 1..=hi);
        let merged = &mut pieces[lo];
        merged.start = start;
        merged.end = end;
        merged.label = label;
        merged.v = segment_mean(v2, start, end);
        merged.l = segment_mean(l2, start, end);
    }

    let boundaries: Vec<f64> = pieces.iter().skip(1).map(|p| p.start).collect();
    match labels {
        Some(_) => Segmentation::with_labels(
            seg.duration(),
            boundaries,
            pieces.iter().map(|p| p.label.unwrap_or(0)).collect(),
        ),
        None => Segmentation::new(seg.duration(), boundaries),
    }
}
