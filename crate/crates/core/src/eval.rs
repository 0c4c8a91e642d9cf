//! Tolerance-interval boundary matching and precision / recall / F1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datamodel::Segmentation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    /// False alarms.
    pub fp: usize,
    /// Misses.
    pub r#fn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Metrics from raw counts. Both sets empty scores 1; exactly one empty scores 0.
    pub fn from_counts(tp: usize, fp: usize, r#fn: usize) -> Self {
        let (n_pred, n_ref) = (tp + fp, tp + r#fn);
        let (precision, recall) = match (n_pred, n_ref) {
            (0, 0) => (1.0, 1.0),
            (0, _) | (_, 0) => (0.0, 0.0),
            _ => (tp as f64 / n_pred as f64, tp as f64 / n_ref as f64),
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            r#fn,
            precision,
            recall,
            f1,
        }
    }
}

/// Size of a maximum one-to-one matching between `pred` and `refs` where a
/// pair is admissible iff the two times differ by at most `omega`.
pub fn max_matching(pred: &[f64], refs: &[f64], omega: f64) -> usize {
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| {
            (0..refs.len())
                .filter(|&j| (p - refs[j]).abs() <= omega)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; refs.len()];

    fn augment(
        i: usize,
        adj: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    let mut size = 0;
    for i in 0..pred.len() {
        let mut seen = vec![false; refs.len()];
        if augment(i, &adj, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

pub fn boundary_prf(
    pred: &Segmentation,
    reference: &Segmentation,
    omega_t: f64,
) -> Result<Metrics> {
    if !(omega_t.is_finite() && omega_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {omega_t}"
        )));
    }
    let tol = 1e-6 * reference.duration().max(1.0);
    if (pred.duration() - reference.duration()).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "prediction lasts {} s but reference lasts {} s",
            pred.duration(),
            reference.duration()
        )));
    }
    let (p, r) = (pred.boundaries(), reference.boundaries());
    let tp = max_matching(p, r, omega_t);
    Ok(Metrics::from_counts(tp, p.len() - tp, r.len() - tp))
}

pub fn sweep_tolerance(
    pred: &Segmentation,
    reference: &Segmentation,
    omegas: &[f64],
) -> Result<Vec<(f64, Metrics)>> {
    omegas
        .iter()
        .map(|&w| Ok((w, boundary_prf(pred, reference, w)?)))
        .collect()
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub video_id: String,
    pub omega_t: f64,
    pub metrics: Metrics,
}

/// Micro-averaged (pooled counts) and macro-averaged (mean of per-video
/// scores) rows for every tolerance, labelled `micro` and `macro`.
pub fn aggregate_rows(rows: &[EvalRow]) -> Vec<EvalRow> {
    let mut omegas: Vec<f64> = rows.iter().map(|r| r.omega_t).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let mut out = Vec::new();
    for w in omegas {
        let group: Vec<&Metrics> = rows
            .iter()
            .filter(|r| r.omega_t == w)
            .map(|r| &r.metrics)
            .collect();
        let (tp, fp, r#fn) = group.iter().fold((0, 0, 0), |acc, m| {
            (acc.0 + m.tp, acc.1 + m.fp, acc.2 + m.r#fn)
        });
        out.push(EvalRow {
            video_id: "micro".into(),
            omega_t: w,
            metrics: Metrics::from_counts(tp, fp, r#fn),
        });
        let k = group.len() as f64;
        out.push(EvalRow {
            video_id: "macro".into(),
            omega_t: w,
            metrics: Metrics {
                tp,
                fp,
                r#fn,
                precision: group.iter().map(|m| m.precision).sum::<f64>() / k,
                recall: group.iter().map(|m| m.recall).sum::<f64>() / k,
                f1: group.iter().map(|m| m.f1).sum::<f64>() / k,
            },
        });
    }
    out
}

/// Writes rows as CSV with columns
/// `video_id,omega_t,tp,fp,fn,precision,recall,f1`.
pub fn write_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Flat<'a> {
        video_id: &'a str,
        omega_t: f64,
        tp: usize,
        fp: usize,
        r#fn: usize,
        precision: f64,
        recall: f64,
        f1: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        let m = &r.metrics;
        let flat = Flat {
            video_id: &r.video_id,
            omega_t: r.omega_t,
            tp: m.tp,
            fp: m.fp,
            r#fn: m.r#fn,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        w.serialize(flat)
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(())
}
