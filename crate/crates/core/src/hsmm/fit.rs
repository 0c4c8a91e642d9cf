//! Blocked Gibbs sampling driver.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::messages::{frame_labels, hsmm_backward_messages, sample_states};
use super::model::{log_joint, resample_emissions, resample_params, HdpHsmmHyper, HsmmState};
use crate::error::{Error, Result};
use crate::linalg::squared_distance;

/// Per-sweep diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsDiagnostics {
    pub log_joint: Vec<f64>,
    pub occupied_states: Vec<usize>,
    /// Sweep whose sample is returned.
    pub accepted_sweep: usize,
}

#[derive(Debug, Clone)]
pub struct HsmmFit {
    /// State label per frame of the highest-scoring sample.
    pub labels: Vec<usize>,
    /// Parameters that accompanied those labels.
    pub state: HsmmState,
    pub diagnostics: GibbsDiagnostics,
}

impl HsmmFit {
    /// Frame indices at which the label changes.
    pub fn boundary_frames(&self) -> Vec<usize> {
        (1..self.labels.len())
            .filter(|&t| self.labels[t] != self.labels[t - 1])
            .collect()
    }
}

/// Seeded k-means labels with `k` clusters (k-means++ seeding, Lloyd steps).
fn kmeans_labels(obs: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = obs.nrows();
    let rows: Vec<Vec<f64>> = obs
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|r| {
                centers
                    .iter()
                    .map(|c| squared_distance(r, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, w) in d2.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(rows[pick].clone());
    }
    let mut labels = vec![0usize; n];
    for _ in 0..25 {
        let mut changed = false;
        for (t, r) in rows.iter().enumerate() {
            let best = (0..centers.len())
                .min_by(|&a, &b| {
                    squared_distance(r, &centers[a]).total_cmp(&squared_distance(r, &centers[b]))
                })
                .unwrap_or(0);
            if best != labels[t] {
                labels[t] = best;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Runs the sampler, calling `on_sweep(sweep, labels, state)` after every sweep.
///
/// Initial emissions are drawn conditionally on a k-means partition into
/// `ceil(S / 2)` clusters; all other parameters start from the prior.
pub fn fit_segment_with(
    obs: &DMatrix<f64>,
    hyper: &HdpHsmmHyper,
    sweeps: usize,
    seed: u64,
    mut on_sweep: impl FnMut(usize, &[usize], &HsmmState),
) -> Result<HsmmFit> {
    if obs.ncols() != hyper.dim() {
        return Err(Error::Dimension(format!(
            "observations have {} columns, prior has {}",
            obs.ncols(),
            hyper.dim()
        )));
    }
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("observations must be finite".into()));
    }
    if sweeps == 0 {
        return Err(Error::InvalidArgument(
            "at least one sweep is required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = HsmmState::from_prior(hyper, &mut rng)?;
    let init = kmeans_labels(obs, hyper.states.div_ceil(2), &mut rng);
    resample_emissions(&mut state, &init, obs, hyper, &mut rng)?;

    let mut diag = GibbsDiagnostics {
        log_joint: Vec::with_capacity(sweeps),
        occupied_states: Vec::with_capacity(sweeps),
        accepted_sweep: 0,
    };
    let mut best: Option<(f64, Vec<usize>, HsmmState)> = None;
    for sweep in 0..sweeps {
        let ll = state.log_likelihoods(obs)?;
        let model = state.log_model(hyper.d_max);
        let msgs = hsmm_backward_messages(&ll, &model)?;
        let segments = sample_states(&model, &msgs, &mut rng)?;
        let labels = frame_labels(&segments);
        resample_params(&mut state, &labels, obs, hyper, &mut rng)?;
        let lj = log_joint(&state, &labels, obs, hyper)?;
        let mut used = labels.clone();
        used.sort_unstable();
        used.dedup();
        diag.log_joint.push(lj);
        diag.occupied_states.push(used.len());
        on_sweep(sweep, &labels, &state);
        if best.as_ref().is_none_or(|(b, _, _)| lj > *b) {
            diag.accepted_sweep = sweep;
            best = Some((lj, labels, state.clone()));
        }
        log::debug!("sweep {sweep}: log joint {lj:.3}, {} states", used.len());
    }
    let (_, labels, state) = best.expect("at least one sweep ran");
    Ok(HsmmFit {
        labels,
        state,
        diagnostics: diag,
    })
}

/// Runs the sampler and returns the sample with the highest log joint.
pub fn fit_segment(
    obs: &DMatrix<f64>,
    hyper: &HdpHsmmHyper,
    sweeps: usize,
    seed: u64,
) -> Result<HsmmFit> {
    fit_segment_with(obs, hyper, sweeps, seed, |_, _, _| {})
}
