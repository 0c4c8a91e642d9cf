//! Entropic Gromov-Wasserstein between two metric-measure spaces.
//!
//! Each outer iteration linearizes the quadratic square-loss objective
//! around the current coupling and re-solves the linearized problem with
//! log-domain Sinkhorn, warm-started from the previous potentials.

use nalgebra::DMatrix;

use super::sinkhorn::{sinkhorn_log, OtConfig, Potentials};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GwResult {
    /// `sum (Cx_ik - Cy_jl)^2 T_ij T_kl` for the final coupling.
    pub cost: f64,
    pub coupling: DMatrix<f64>,
    /// Whether the last inner Sinkhorn solve met the tolerance.
    pub converged: bool,
}

fn validate_metric(c: &DMatrix<f64>, name: &str) -> Result<()> {
    if c.nrows() != c.ncols() || c.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "{name} must be a non-empty square matrix"
        )));
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..c.nrows() {
        if c[(i, i)] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} has nonzero diagonal at {i}"
            )));
        }
        for j in 0..c.ncols() {
            let v = c[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} has invalid entry {v} at ({i}, {j})"
                )));
            }
            if (v - c[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Linearized square-loss cost `L(Cx, Cy) (x) T` for coupling `t`.
fn linearized_cost(
    cx2: &DMatrix<f64>,
    cy2: &DMatrix<f64>,
    cx: &DMatrix<f64>,
    cy: &DMatrix<f64>,
    t: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (m, n) = t.shape();
    let rows: Vec<f64> = (0..m).map(|i| t.row(i).sum()).collect();
    let cols: Vec<f64> = (0..n).map(|j| t.column(j).sum()).collect();
    let left: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|k| cx2[(i, k)] * rows[k]).sum())
        .collect();
    let right: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|l| cy2[(j, l)] * cols[l]).sum())
        .collect();
    let cross = cx * t * cy.transpose();
    DMatrix::from_fn(m, n, |i, j| left[i] + right[j] - 2.0 * cross[(i, j)])
}

pub fn entropic_gw(
    cx: &DMatrix<f64>,
    cy: &DMatrix<f64>,
    wx: &[f64],
    wy: &[f64],
    cfg: &OtConfig,
) -> Result<GwResult> {
    cfg.validate()?;
    validate_metric(cx, "Cx")?;
    validate_metric(cy, "Cy")?;
    let (m, n) = (cx.nrows(), cy.nrows());
    if wx.len() != m || wy.len() != n {
        return Err(Error::Dimension(
            "weight lengths do not match the distance matrices".into(),
        ));
    }
    let cx2 = cx.map(|v| v * v);
    let cy2 = cy.map(|v| v * v);

    let mut coupling = DMatrix::from_fn(m, n, |i, j| wx[i] * wy[j]);
    let mut converged = true;
    if m > 1 && n > 1 {
        // Scale the regularizer by the squared distances of both spaces.
        let off: Vec<f64> = (0..m)
            .flat_map(|i| (0..m).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| cx2[(i, k)])
            .chain(
                (0..n)
                    .flat_map(|j| (0..n).filter(move |&l| l != j).map(move |l| (j, l)))
                    .map(|(j, l)| cy2[(j, l)]),
            )
            .collect();
        let eps = cfg.epsilon_for(off);
        let mut warm: Option<Potentials> = None;
        for _ in 0..cfg.gw_outer_iter {
            let lin = linearized_cost(&cx2, &cy2, cx, cy, &coupling);
            let (next, pot, ok, _) =
                sinkhorn_log(&lin, wx, wy, eps, cfg.max_iter, cfg.tol, warm.take());
            coupling = next;
            converged = ok;
            warm = Some(pot);
        }
    }
    let lin = linearized_cost(&cx2, &cy2, cx, cy, &coupling);
    let cost = lin.component_mul(&coupling).sum().max(0.0);
    Ok(GwResult {
        cost,
        coupling,
        converged,
    })
}
