use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::squared_distance;

/// How the entropic regularizer is chosen for one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// Use this value as is.
    Fixed(f64),
    /// Multiply the median off-diagonal ground cost of the instance by this factor.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtConfig {
    pub epsilon: Epsilon,
    pub max_iter: usize,
    /// L1 marginal violation at which Sinkhorn stops.
    pub tol: f64,
    /// Outer iterations of the Gromov-Wasserstein solver.
    pub gw_outer_iter: usize,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::Relative(0.05),
            max_iter: 1000,
            tol: 1e-6,
            gw_outer_iter: 50,
        }
    }
}

impl OtConfig {
    pub fn validate(&self) -> Result<()> {
        let e = match self.epsilon {
            Epsilon::Fixed(e) | Epsilon::Relative(e) => e,
        };
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {e}"
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "tol and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the regularizer against the off-diagonal entries of `costs`.
    pub(crate) fn resolve_epsilon(&self, costs: &DMatrix<f64>) -> f64 {
        let mut off: Vec<f64> = Vec::with_capacity(costs.len());
        for j in 0..costs.ncols() {
            for i in 0..costs.nrows() {
                if i != j {
                    off.push(costs[(i, j)]);
                }
            }
        }
        if off.is_empty() {
            off.extend(costs.iter().copied());
        }
        self.epsilon_for(off)
    }

    /// Resolves the regularizer against a sample of ground-cost values.
    pub(crate) fn epsilon_for(&self, mut costs: Vec<f64>) -> f64 {
        match self.epsilon {
            Epsilon::Fixed(e) => e,
            Epsilon::Relative(f) => {
                let scale = median(&mut costs);
                let scale = if scale > 0.0 {
                    scale
                } else {
                    let pos: Vec<f64> = costs.iter().copied().filter(|&c| c > 0.0).collect();
                    if pos.is_empty() {
                        1.0
                    } else {
                        pos.iter().sum::<f64>() / pos.len() as f64
                    }
                };
                f * scale
            }
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Weighted empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "point cloud needs at least one point".into(),
            ));
        }
        if weights.len() != points.nrows() {
            return Err(Error::Dimension(format!(
                "{} weights for {} points",
                weights.len(),
                points.nrows()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let m = points.nrows().max(1);
        Self::new(points, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub plan: DMatrix<f64>,
    /// L1 distance between row sums and source weights.
    pub row_residual: f64,
    /// L1 distance between column sums and target weights.
    pub col_residual: f64,
}

impl TransportPlan {
    fn new(plan: DMatrix<f64>, a: &[f64], b: &[f64]) -> Self {
        let row_residual = (0..plan.nrows())
            .map(|i| (plan.row(i).sum() - a[i]).abs())
            .sum();
        let col_residual = (0..plan.ncols())
            .map(|j| (plan.column(j).sum() - b[j]).abs())
            .sum();
        Self {
            plan,
            row_residual,
            col_residual,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// `sum(plan * cost)`, the entropy term excluded.
    pub cost: f64,
    pub transport: TransportPlan,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) struct Potentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Squared-Euclidean ground cost between two point sets.
pub fn squared_euclidean_costs(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let pr: Vec<Vec<f64>> = (0..p.nrows())
        .map(|i| p.row(i).iter().copied().collect())
        .collect();
    let qr: Vec<Vec<f64>> = (0..q.nrows())
        .map(|j| q.row(j).iter().copied().collect())
        .collect();
    DMatrix::from_fn(p.nrows(), q.nrows(), |i, j| {
        squared_distance(&pr[i], &qr[j])
    })
}

#[inline]
fn lse_shifted(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on an arbitrary cost matrix.
pub(crate) fn sinkhorn_log(
    cost: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
    eps: f64,
    max_iter: usize,
    tol: f64,
    warm: Option<Potentials>,
) -> (DMatrix<f64>, Potentials, bool, usize) {
    let (m, n) = cost.shape();
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let Potentials { mut f, mut g } = warm.unwrap_or(Potentials {
        f: vec![0.0; m],
        g: vec![0.0; n],
    });
    // Row-major copy for cache-friendly row sweeps.
    let c_rows: Vec<f64> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| cost[(i, j)])
        .collect();
    let mut converged = false;
    let mut iterations = 0;
    let mut row_sums = vec![0.0; m];
    for it in 0..max_iter {
        iterations = it + 1;
        for i in 0..m {
            let row = &c_rows[i * n..(i + 1) * n];
            let l = lse_shifted(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
            f[i] = eps * (log_a[i] - l);
        }
        for j in 0..n {
            let l = lse_shifted((0..m).map(|i| (f[i] - c_rows[i * n + j]) / eps));
            g[j] = eps * (log_b[j] - l);
        }
        let mut err = 0.0;
        for i in 0..m {
            let row = &c_rows[i * n..(i + 1) * n];
            row_sums[i] = row
                .iter()
                .zip(&g)
                .map(|(c, gj)| ((f[i] + gj - c) / eps).exp())
                .sum::<f64>();
            err += (row_sums[i] - a[i]).abs();
        }
        if err < tol {
            converged = true;
            break;
        }
    }
    let plan = DMatrix::from_fn(m, n, |i, j| ((f[i] + g[j] - c_rows[i * n + j]) / eps).exp());
    (plan, Potentials { f, g }, converged, iterations)
}

/// Entropic OT between two point clouds under squared-Euclidean cost.
pub fn sinkhorn_wd(p: &PointCloud, q: &PointCloud, cfg: &OtConfig) -> Result<SinkhornResult> {
    cfg.validate()?;
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!(
            "clouds live in {} and {} dims",
            p.dim(),
            q.dim()
        )));
    }
    let cost = squared_euclidean_costs(p.points(), q.points());
    Ok(sinkhorn_on_costs(&cost, p.weights(), q.weights(), cfg))
}

pub(crate) fn sinkhorn_on_costs(
    cost: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
    cfg: &OtConfig,
) -> SinkhornResult {
    let (m, n) = cost.shape();
    // A single source or target point fixes the coupling.
    if m == 1 || n == 1 {
        let plan = DMatrix::from_fn(m, n, |i, j| if m == 1 { b[j] } else { a[i] });
        let total = plan.component_mul(cost).sum();
        return SinkhornResult {
            cost: total,
            transport: TransportPlan::new(plan, a, b),
            converged: true,
            iterations: 0,
        };
    }
    let eps = cfg.resolve_epsilon(cost);
    let (plan, _, converged, iterations) =
        sinkhorn_log(cost, a, b, eps, cfg.max_iter, cfg.tol, None);
    let total = plan.component_mul(cost).sum().max(0.0);
    SinkhornResult {
        cost: total,
        transport: TransportPlan::new(plan, a, b),
        converged,
        iterations,
    }
}
