//! Hierarchical clustering baseline with a time-weighted frame distance and a
//! similarity-threshold dendrogram cut.

use kodama::{linkage, Method};
use serde::{Deserialize, Serialize};

use crate::datamodel::{FeatureSequence, Segmentation};
use crate::error::{Error, Result};
use crate::linalg::{cosine, row_vec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcaConfig {
    /// Weight of the temporal term; `1 - alpha_b` weighs the feature term.
    pub alpha_b: f64,
    /// Merges whose similarity `1 - distance` falls below this are cut.
    pub beta_b: f64,
}

impl Default for HcaConfig {
    fn default() -> Self {
        Self {
            alpha_b: 0.5,
            beta_b: 0.7,
        }
    }
}

impl HcaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_b", self.alpha_b), ("beta_b", self.beta_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One agglomeration step: the members of the new cluster and the
/// average-linkage distance at which it formed.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub members: Vec<usize>,
    pub distance: f64,
}

/// `alpha_b |i - j| / n + (1 - alpha_b) (1 - cos(x_i, x_j)) / 2`.
pub fn frame_distance(x: &FeatureSequence, i: usize, j: usize, alpha_b: f64) -> f64 {
    let dt = (i as f64 - j as f64).abs() / x.n() as f64;
    let df = (1.0 - cosine(&row_vec(x.data(), i), &row_vec(x.data(), j))) / 2.0;
    alpha_b * dt + (1.0 - alpha_b) * df
}

/// Average-linkage dendrogram in merge order.
pub fn hca_linkage(v1: &FeatureSequence, cfg: &HcaConfig) -> Result<Vec<Merge>> {
    cfg.validate()?;
    let n = v1.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "clustering needs at least two frames".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row_vec(v1.data(), i)).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let cos = if norms[i] > 0.0 && norms[j] > 0.0 {
                (rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / (norms[i] * norms[j]))
                    .clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let dt = (j - i) as f64 / n as f64;
            condensed.push(cfg.alpha_b * dt + (1.0 - cfg.alpha_b) * (1.0 - cos) / 2.0);
        }
    }
    let dendrogram = linkage(&mut condensed, n, Method::Average);
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in dendrogram.steps() {
        let mut members = clusters[step.cluster1].clone();
        members.extend_from_slice(&clusters[step.cluster2]);
        members.sort_unstable();
        clusters.push(members.clone());
        merges.push(Merge {
            members,
            distance: step.dissimilarity,
        });
    }
    Ok(merges)
}

/// Cluster label per frame after applying every merge with similarity at
/// least `beta_b`. Labels are numbered by first appearance.
pub fn hca_labels(v1: &FeatureSequence, cfg: &HcaConfig) -> Result<Vec<usize>> {
    let n = v1.n();
    let merges = hca_linkage(v1, cfg)?;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in merges.iter().filter(|m| 1.0 - m.distance >= cfg.beta_b) {
        let root = find(&mut parent, m.members[0]);
        for &k in &m.members[1..] {
            let r = find(&mut parent, k);
            parent[r] = root;
        }
    }
    let mut ids = std::collections::HashMap::new();
    Ok((0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = ids.len();
            *ids.entry(r).or_insert(next)
        })
        .collect())
}

/// Segments `v1` with boundaries wherever the cut cluster label changes.
pub fn hca_segment(v1: &FeatureSequence, cfg: &HcaConfig) -> Result<Segmentation> {
    let labels = hca_labels(v1, cfg)?;
    Segmentation::from_frame_labels(&labels, v1.fps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Modality;
    use nalgebra::DMatrix;

    fn blocks(n: usize, split: usize) -> FeatureSequence {
        let m = DMatrix::from_fn(n, 2, |r, c| if (r < split) == (c == 0) { 1.0 } else { 0.0 });
        FeatureSequence::new(m, Modality::Visual).unwrap()
    }

    #[test]
    fn zero_threshold_keeps_one_cluster() {
        let x = blocks(12, 5);
        let seg = hca_segment(
            &x,
            &HcaConfig {
                alpha_b: 0.3,
                beta_b: 0.0,
            },
        )
        .unwrap();
        assert!(seg.boundaries().is_empty());
    }

    #[test]
    fn two_blocks_split_once() {
        let x = blocks(12, 5);
        let seg = hca_segment(
            &x,
            &HcaConfig {
                alpha_b: 0.0,
                beta_b: 0.9,
            },
        )
        .unwrap();
        assert_eq!(seg.boundaries(), &[5.0]);
    }

    #[test]
    fn pure_time_splits_near_the_middle() {
        // equal spacing makes ties merge in dyadic blocks, so use a power of two
        let x = blocks(16, 7);
        let merges = hca_linkage(
            &x,
            &HcaConfig {
                alpha_b: 1.0,
                beta_b: 0.0,
            },
        )
        .unwrap();
        // the threshold between the last two merge heights leaves two clusters
        let cut =
            1.0 - 0.5 * (merges[merges.len() - 1].distance + merges[merges.len() - 2].distance);
        let seg = hca_segment(
            &x,
            &HcaConfig {
                alpha_b: 1.0,
                beta_b: cut,
            },
        )
        .unwrap();
        assert_eq!(seg.boundaries().len(), 1);
        assert!(
            (seg.boundaries()[0] - 8.0).abs() <= 1.0,
            "{:?}",
            seg.boundaries()
        );
    }

    #[test]
    fn direct_distance_matches_condensed() {
        let x = blocks(6, 2);
        let merges = hca_linkage(
            &x,
            &HcaConfig {
                alpha_b: 0.4,
                beta_b: 0.0,
            },
        )
        .unwrap();
        assert_eq!(merges.len(), 5);
        assert!((frame_distance(&x, 0, 1, 0.4) - 0.4 / 6.0).abs() < 1e-15);
        assert!(hca_linkage(&blocks(1, 0), &HcaConfig::default()).is_err());
    }
}
