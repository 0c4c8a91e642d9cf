//! Per-timestep within-domain and cross-domain signals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gw::entropic_gw;
use super::sinkhorn::{sinkhorn_on_costs, squared_euclidean_costs, OtConfig};
use crate::datamodel::FeatureSequence;
use crate::dcca::{cca_signal, CcaModel};
use crate::error::{Error, Result};
use crate::linalg::row_vec;

/// Scalar signal channels, one value per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub wd_v: Vec<f64>,
    pub wd_l: Vec<f64>,
    pub gwd: Vec<f64>,
    pub cca: Vec<f64>,
}

/// One row of the signal export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub t: usize,
    pub wd_v: f64,
    pub wd_l: f64,
    pub gwd: f64,
    pub cca: f64,
}

impl SignalSeries {
    pub fn new(wd_v: Vec<f64>, wd_l: Vec<f64>, gwd: Vec<f64>, cca: Vec<f64>) -> Result<Self> {
        let n = wd_v.len();
        if wd_l.len() != n || gwd.len() != n || cca.len() != n {
            return Err(Error::Dimension("signal channels differ in length".into()));
        }
        if wd_v
            .iter()
            .chain(&wd_l)
            .chain(&gwd)
            .chain(&cca)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("signal channels must be finite".into()));
        }
        Ok(Self {
            wd_v,
            wd_l,
            gwd,
            cca,
        })
    }

    pub fn len(&self) -> usize {
        self.wd_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wd_v.is_empty()
    }

    pub fn records(&self) -> Vec<SignalRecord> {
        (0..self.len())
            .map(|t| SignalRecord {
                t,
                wd_v: self.wd_v[t],
                wd_l: self.wd_l[t],
                gwd: self.gwd[t],
                cca: self.cca[t],
            })
            .collect()
    }

    /// JSON array of `{t, wd_v, wd_l, gwd, cca}` objects.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.records())?)
    }
}

fn rows(m: &DMatrix<f64>, start: usize, len: usize) -> DMatrix<f64> {
    m.rows(start, len).into_owned()
}

fn euclidean_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = squared_euclidean_costs(x, x).map(f64::sqrt);
    for i in 0..d.nrows() {
        d[(i, i)] = 0.0;
        for j in (i + 1)..d.ncols() {
            let v = d[(i, j)];
            d[(j, i)] = v;
        }
    }
    d
}

/// Window Wasserstein distance between frames `t-w+1..=t` and `t+1..=t+w`.
fn past_future_wd(x: &DMatrix<f64>, t: usize, w: usize, cfg: &OtConfig) -> f64 {
    let past = rows(x, t + 1 - w, w);
    let future = rows(x, t + 1, w);
    let weights = vec![1.0 / w as f64; w];
    let cost = squared_euclidean_costs(&past, &future);
    sinkhorn_on_costs(&cost, &weights, &weights, cfg).cost
}

/// Computes the four signal channels for window half-width `w`.
///
/// Window statistics are evaluated for `t` in `[w - 1, n - w)`; frames
/// outside that range copy the nearest computed value. The CCA channel is
/// evaluated at every frame.
pub fn temporal_signals(
    v2: &FeatureSequence,
    l2: &FeatureSequence,
    cca: &CcaModel,
    w: usize,
    cfg: &OtConfig,
) -> Result<SignalSeries> {
    cfg.validate()?;
    let n = v2.n();
    if l2.n() != n {
        return Err(Error::Dimension(format!(
            "visual has {n} frames, language has {}",
            l2.n()
        )));
    }
    if w == 0 || n < 2 * w {
        return Err(Error::InvalidArgument(format!(
            "window {w} needs 1 <= w <= n/2 with n = {n}"
        )));
    }
    let (xv, xl) = (v2.data(), l2.data());
    let first = w - 1;
    let last_excl = n - w;

    let mut wd_v = vec![0.0; n];
    let mut wd_l = vec![0.0; n];
    let mut gwd = vec![0.0; n];
    let uniform = vec![1.0 / (2 * w) as f64; 2 * w];
    for t in first..last_excl {
        wd_v[t] = past_future_wd(xv, t, w, cfg);
        wd_l[t] = past_future_wd(xl, t, w, cfg);
        let cv = euclidean_distances(&rows(xv, t + 1 - w, 2 * w));
        let cl = euclidean_distances(&rows(xl, t + 1 - w, 2 * w));
        gwd[t] = entropic_gw(&cv, &cl, &uniform, &uniform, cfg)?.cost;
    }
    for channel in [&mut wd_v, &mut wd_l, &mut gwd] {
        let (head, tail) = (channel[first], channel[last_excl - 1]);
        channel[..first].fill(head);
        channel[last_excl..].fill(tail);
    }
    let cca_values = (0..n)
        .map(|t| cca_signal(cca, &row_vec(xv, t), &row_vec(xl, t)))
        .collect::<Result<Vec<f64>>>()?;
    SignalSeries::new(wd_v, wd_l, gwd, cca_values)
}
