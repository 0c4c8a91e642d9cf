//! Closed-form regularized canonical correlation analysis and the
//! total-correlation objective used to train the nonlinear transforms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center, cosine, cross_covariance, sym_inv_sqrt};

/// A fitted linear CCA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    pub k: usize,
    /// `d_x x k` projection for the first view.
    pub proj_x: DMatrix<f64>,
    /// `d_y x k` projection for the second view.
    pub proj_y: DMatrix<f64>,
    /// Canonical correlations, non-increasing.
    pub rho: Vec<f64>,
    pub mean_x: DVector<f64>,
    pub mean_y: DVector<f64>,
    pub reg: f64,
}

struct Whitened {
    inv_sqrt_xx: DMatrix<f64>,
    inv_sqrt_yy: DMatrix<f64>,
    t: DMatrix<f64>,
}

fn whiten(xc: &DMatrix<f64>, yc: &DMatrix<f64>, reg: f64) -> Whitened {
    let mut sxx = cross_covariance(xc, xc);
    let mut syy = cross_covariance(yc, yc);
    for i in 0..sxx.nrows() {
        sxx[(i, i)] += reg;
    }
    for i in 0..syy.nrows() {
        syy[(i, i)] += reg;
    }
    let sxy = cross_covariance(xc, yc);
    let inv_sqrt_xx = sym_inv_sqrt(&sxx);
    let inv_sqrt_yy = sym_inv_sqrt(&syy);
    let t = &inv_sqrt_xx * sxy * &inv_sqrt_yy;
    Whitened {
        inv_sqrt_xx,
        inv_sqrt_yy,
        t,
    }
}

/// Thin SVD with singular triplets sorted by decreasing singular value.
fn sorted_svd(t: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = t.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD failed to produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD failed to produce V".into()))?;
    let s = svd.singular_values;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u = DMatrix::from_columns(
        &idx.iter()
            .map(|&i| u.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    let v = DMatrix::from_columns(
        &idx.iter()
            .map(|&i| v_t.row(i).transpose())
            .collect::<Vec<_>>(),
    );
    let s = DVector::from_iterator(idx.len(), idx.iter().map(|&i| s[i]));
    Ok((u, s, v))
}

/// Fits `k` canonical directions between the rows of `x` and `y`, with both
/// auto-covariances ridge-regularized by `reg * I`.
pub fn linear_cca_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize, reg: f64) -> Result<CcaModel> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Dimension(format!(
            "views have {n} and {} rows",
            y.nrows()
        )));
    }
    if k == 0 || k > x.ncols().min(y.ncols()) {
        return Err(Error::Dimension(format!(
            "k = {k} must be in 1..={}",
            x.ncols().min(y.ncols())
        )));
    }
    if n <= k {
        return Err(Error::Dimension(format!(
            "need more than k = {k} samples, got {n}"
        )));
    }
    if !(reg > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularizer must be positive, got {reg}"
        )));
    }
    let (xc, mean_x) = center(x);
    let (yc, mean_y) = center(y);
    let w = whiten(&xc, &yc, reg);
    if w.t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "whitened cross-covariance is not finite".into(),
        ));
    }
    let (u, s, v) = sorted_svd(&w.t)?;
    let proj_x = &w.inv_sqrt_xx * u.columns(0, k);
    let proj_y = &w.inv_sqrt_yy * v.columns(0, k);
    Ok(CcaModel {
        k,
        proj_x,
        proj_y,
        rho: s.iter().take(k).map(|&r| r.max(0.0)).collect(),
        mean_x,
        mean_y,
        reg,
    })
}

impl CcaModel {
    pub fn total_correlation(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// Canonical projections of one sample from each view.
    pub fn project(&self, x: &[f64], y: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        if x.len() != self.proj_x.nrows() || y.len() != self.proj_y.nrows() {
            return Err(Error::Dimension(format!(
                "model expects dims ({}, {}), got ({}, {})",
                self.proj_x.nrows(),
                self.proj_y.nrows(),
                x.len(),
                y.len()
            )));
        }
        let xv = DVector::from_column_slice(x) - &self.mean_x;
        let yv = DVector::from_column_slice(y) - &self.mean_y;
        Ok((self.proj_x.tr_mul(&xv), self.proj_y.tr_mul(&yv)))
    }
}

/// Cosine similarity of the canonical projections of `v` and `l`; zero when
/// either projection vanishes.
pub fn cca_signal(model: &CcaModel, v: &[f64], l: &[f64]) -> Result<f64> {
    let (p, q) = model.project(v, l)?;
    Ok(cosine(p.as_slice(), q.as_slice()))
}

/// Total canonical correlation between two network outputs and its gradient
/// with respect to each output matrix.
pub(crate) struct CorrelationObjective {
    pub value: f64,
    pub grad_x: DMatrix<f64>,
    pub grad_y: DMatrix<f64>,
}

/// Sum of all singular values of `Sxx^{-1/2} Sxy Syy^{-1/2}` and its gradient.
pub(crate) fn correlation_objective(
    hx: &DMatrix<f64>,
    hy: &DMatrix<f64>,
    reg: f64,
) -> Result<CorrelationObjective> {
    let n = hx.nrows();
    let (xc, _) = center(hx);
    let (yc, _) = center(hy);
    let w = whiten(&xc, &yc, reg);
    if w.t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("correlation matrix is not finite".into()));
    }
    let (u, s, v) = sorted_svd(&w.t)?;
    let value = s.sum();

    let d = DMatrix::from_diagonal(&s);
    let g_xy = &w.inv_sqrt_xx * &u * v.transpose() * &w.inv_sqrt_yy;
    let g_xx = &w.inv_sqrt_xx * &u * &d * u.transpose() * &w.inv_sqrt_xx * -0.5;
    let g_yy = &w.inv_sqrt_yy * &v * &d * v.transpose() * &w.inv_sqrt_yy * -0.5;

    let scale = 1.0 / (n.max(2) - 1) as f64;
    let grad_x = (&xc * &g_xx * 2.0 + &yc * g_xy.transpose()) * scale;
    let grad_y = (&yc * &g_yy * 2.0 + &xc * &g_xy) * scale;
    Ok(CorrelationObjective {
        value,
        grad_x,
        grad_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn self_correlation_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(100, 4, &mut rng);
        let m = linear_cca_fit(&x, &x, 2, 1e-6).unwrap();
        assert!(m.rho.iter().all(|r| (r - 1.0).abs() < 1e-3), "{:?}", m.rho);
    }

    #[test]
    fn signal_conventions() {
        let m = CcaModel {
            k: 2,
            proj_x: DMatrix::identity(2, 2),
            proj_y: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            rho: vec![0.9, 0.5],
            mean_x: DVector::from_vec(vec![1.0, 0.0]),
            mean_y: DVector::zeros(2),
            reg: 1e-4,
        };
        // projections: x -> (x - mean), y -> (y0, y0 + y1)
        assert!((cca_signal(&m, &[2.0, 1.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cca_signal(&m, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        // p = (2, 1), q = (1, 3): cos = 5 / (sqrt(5) sqrt(10))
        let expected = 5.0 / (5f64.sqrt() * 10f64.sqrt());
        assert!((cca_signal(&m, &[3.0, 1.0], &[1.0, 2.0]).unwrap() - expected).abs() < 1e-15);
        assert!(cca_signal(&m, &[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let x = DMatrix::zeros(3, 4);
        assert!(linear_cca_fit(&x, &x, 3, 1e-3).is_err());
        assert!(linear_cca_fit(&x, &DMatrix::zeros(4, 4), 1, 1e-3).is_err());
        assert!(linear_cca_fit(&x, &x, 1, 0.0).is_err());
    }

    #[test]
    fn correlations_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn(40, 5, &mut rng);
        let y = &x.columns(0, 3).into_owned() + randn(40, 3, &mut rng) * 0.3;
        let m = linear_cca_fit(&x, &y, 3, 1e-8).unwrap();
        assert!(m.rho.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.rho.iter().all(|&r| (0.0..=1.0 + 1e-8).contains(&r)));
    }
}
