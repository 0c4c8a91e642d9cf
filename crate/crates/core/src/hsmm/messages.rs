//! Backward message passing and forward sampling over explicit-duration
//! segmentations.

use rand::Rng;

use super::dist::sample_log_categorical;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// Terms more than this many nats below the running maximum are skipped; their
/// total weight is below `D_max * e^-50` relative to the sum.
const NEGLIGIBLE: f64 = -50.0;

/// Frame log-likelihoods are clamped from below so that cumulative sums
/// never combine infinities.
pub const LOG_LIK_FLOOR: f64 = -1e200;

/// Log-probability tables for one segmentation pass.
#[derive(Debug, Clone)]
pub struct LogModel {
    /// Initial-state log-probabilities, length S.
    pub log_init: Vec<f64>,
    /// Row-major `S x S` transition log-probabilities.
    pub log_trans: Vec<f64>,
    /// Row-major `S x D_max` duration log-pmf, entry `d - 1` for duration `d`.
    pub log_dur: Vec<f64>,
    pub d_max: usize,
}

impl LogModel {
    pub fn states(&self) -> usize {
        self.log_init.len()
    }

    fn validate(&self) -> Result<()> {
        let s = self.states();
        if s == 0 || self.d_max == 0 {
            return Err(Error::InvalidArgument(
                "need at least one state and D_max >= 1".into(),
            ));
        }
        if self.log_trans.len() != s * s || self.log_dur.len() != s * self.d_max {
            return Err(Error::Dimension(
                "model tables disagree with the state count".into(),
            ));
        }
        Ok(())
    }
}

/// Backward messages for a fixed model and emission table.
///
/// `b[i][t]` is the log-probability of the frames `t..T` given that a segment
/// of state `i` starts at `t`; `bstar[i][t]` is the same quantity given that
/// a segment of state `i` ended just before `t`.
#[derive(Debug, Clone)]
pub struct BackwardMessages {
    t_len: usize,
    states: usize,
    /// Row `i`: cumulative emission log-likelihoods, length `T + 1`.
    cum: Vec<f64>,
    b: Vec<f64>,
    bstar: Vec<f64>,
    log_evidence: f64,
}

impl BackwardMessages {
    fn idx(&self, i: usize, t: usize) -> usize {
        i * (self.t_len + 1) + t
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    pub fn b(&self, i: usize, t: usize) -> f64 {
        self.b[self.idx(i, t)]
    }

    pub fn bstar(&self, i: usize, t: usize) -> f64 {
        self.bstar[self.idx(i, t)]
    }

    /// Log marginal likelihood of all frames.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Emission log-likelihood of frames `t0..t1` under state `i`.
    pub fn emission(&self, i: usize, t0: usize, t1: usize) -> f64 {
        self.cum[self.idx(i, t1)] - self.cum[self.idx(i, t0)]
    }
}

/// Log-sum-exp of `a[k] + b[k]`, skipping negligible terms.
fn lse_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (x, y) in a.iter().zip(b) {
        m = m.max(x + y);
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let cut = m + NEGLIGIBLE;
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let v = x + y;
        if v > cut {
            s += (v - m).exp();
        }
    }
    m + s.ln()
}

/// Computes backward messages. `log_lik` is row-major `T x S`.
pub fn hsmm_backward_messages(log_lik: &[f64], model: &LogModel) -> Result<BackwardMessages> {
    model.validate()?;
    let s = model.states();
    if log_lik.len() % s != 0 || log_lik.is_empty() {
        return Err(Error::Dimension(format!(
            "log-likelihood table of {} entries is not T x {s}",
            log_lik.len()
        )));
    }
    if log_lik.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numeric(
            "log-likelihoods must not be NaN or +inf".into(),
        ));
    }
    let t_len = log_lik.len() / s;
    let stride = t_len + 1;
    let d_max = model.d_max;

    let mut cum = vec![0.0; s * stride];
    for i in 0..s {
        let row = &mut cum[i * stride..(i + 1) * stride];
        for t in 0..t_len {
            row[t + 1] = row[t] + log_lik[t * s + i].max(LOG_LIK_FLOOR);
        }
    }

    let mut b = vec![f64::NEG_INFINITY; s * stride];
    let mut bstar = vec![f64::NEG_INFINITY; s * stride];
    // u[i][t] = cum[i][t] + bstar[i][t], so a segment [t, t+d) scores
    // log_dur[i][d-1] + u[i][t+d] - cum[i][t].
    let mut u = vec![f64::NEG_INFINITY; s * stride];
    for i in 0..s {
        bstar[i * stride + t_len] = 0.0;
        u[i * stride + t_len] = cum[i * stride + t_len];
    }
    let mut col = vec![0.0; s];
    for t in (0..t_len).rev() {
        let dm = d_max.min(t_len - t);
        for i in 0..s {
            let row = i * stride;
            let lp = &model.log_dur[i * d_max..i * d_max + dm];
            let ut = &u[row + t + 1..row + t + 1 + dm];
            b[row + t] = lse_pairs(lp, ut) - cum[row + t];
            col[i] = b[row + t];
        }
        for i in 0..s {
            let row = i * stride;
            let v = lse_pairs(&model.log_trans[i * s..(i + 1) * s], &col);
            bstar[row + t] = v;
            u[row + t] = cum[row + t] + v;
        }
    }
    let log_evidence = lse_pairs(&model.log_init, &col);
    Ok(BackwardMessages {
        t_len,
        states: s,
        cum,
        b,
        bstar,
        log_evidence,
    })
}

/// One segment of a state sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub state: usize,
    pub start: usize,
    pub len: usize,
}

fn state_logits(
    model: &LogModel,
    msgs: &BackwardMessages,
    prev: Option<usize>,
    t: usize,
) -> Vec<f64> {
    let s = msgs.states;
    (0..s)
        .map(|j| {
            let prior = match prev {
                None => model.log_init[j],
                Some(p) => model.log_trans[p * s + j],
            };
            prior + msgs.b(j, t)
        })
        .collect()
}

fn duration_logits(model: &LogModel, msgs: &BackwardMessages, i: usize, t: usize) -> Vec<f64> {
    let dm = model.d_max.min(msgs.t_len - t);
    (1..=dm)
        .map(|d| {
            model.log_dur[i * model.d_max + d - 1]
                + msgs.emission(i, t, t + d)
                + msgs.bstar(i, t + d)
        })
        .collect()
}

/// Draws a segmentation from its posterior given the backward messages.
pub fn sample_states(
    model: &LogModel,
    msgs: &BackwardMessages,
    rng: &mut impl Rng,
) -> Result<Vec<Segment>> {
    if !msgs.log_evidence.is_finite() {
        return Err(Error::Numeric(
            "no segmentation has positive probability".into(),
        ));
    }
    let mut segments = Vec::new();
    let mut t = 0;
    let mut prev = None;
    while t < msgs.t_len {
        let state = sample_log_categorical(&state_logits(model, msgs, prev, t), rng)
            .ok_or_else(|| Error::Numeric(format!("no reachable state at frame {t}")))?;
        let d = 1 + sample_log_categorical(&duration_logits(model, msgs, state, t), rng)
            .ok_or_else(|| Error::Numeric(format!("no admissible duration at frame {t}")))?;
        segments.push(Segment {
            state,
            start: t,
            len: d,
        });
        t += d;
        prev = Some(state);
    }
    Ok(segments)
}

/// Posterior log-probability of a complete segmentation, following the same
/// factorization the sampler draws from.
pub fn segmentation_log_posterior(
    model: &LogModel,
    msgs: &BackwardMessages,
    segments: &[Segment],
) -> f64 {
    let mut total = 0.0;
    let mut prev = None;
    let mut t = 0;
    for seg in segments {
        if seg.start != t || seg.len == 0 || seg.len > model.d_max || t + seg.len > msgs.t_len {
            return f64::NEG_INFINITY;
        }
        let sl = state_logits(model, msgs, prev, t);
        total += sl[seg.state] - log_sum_exp(&sl);
        let dl = duration_logits(model, msgs, seg.state, t);
        total += dl[seg.len - 1] - log_sum_exp(&dl);
        t += seg.len;
        prev = Some(seg.state);
    }
    if t != msgs.t_len {
        return f64::NEG_INFINITY;
    }
    total
}

/// Per-frame labels from segments.
pub fn frame_labels(segments: &[Segment]) -> Vec<usize> {
    segments
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.state, s.len))
        .collect()
}

/// Maximal runs of equal labels.
pub fn label_runs(labels: &[usize]) -> Vec<Segment> {
    let mut runs: Vec<Segment> = Vec::new();
    for (t, &l) in labels.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.state == l => r.len += 1,
            _ => runs.push(Segment {
                state: l,
                start: t,
                len: 1,
            }),
        }
    }
    runs
}
