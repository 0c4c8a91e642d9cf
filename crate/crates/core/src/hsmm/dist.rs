//! Random draws and log densities used by the Gibbs sampler.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, robust_cholesky, symmetrize};

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln Γ_d(x)`, the multivariate gamma function.
pub fn ln_multigamma(x: f64, d: usize) -> f64 {
    let d_f = d as f64;
    d_f * (d_f - 1.0) / 4.0 * PI.ln() + (0..d).map(|j| ln_gamma(x - j as f64 / 2.0)).sum::<f64>()
}

/// Logarithm of a Gamma(shape, 1) draw, accurate for tiny shapes.
pub fn log_gamma_draw(shape: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return g.max(f64::MIN_POSITIVE).ln();
    }
    // G(a) = G(a + 1) * U^(1/a)
    let g = Gamma::new(shape + 1.0, 1.0)
        .expect("positive shape")
        .sample(rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    g.max(f64::MIN_POSITIVE).ln() + u.ln() / shape
}

/// Gamma draw with the given shape and rate.
pub fn gamma_draw(shape: f64, rate: f64, rng: &mut impl Rng) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("valid gamma parameters")
        .sample(rng)
}

/// Log-weights of a Dirichlet draw.
pub fn log_dirichlet_draw(alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let norm = crate::linalg::log_sum_exp(&logs);
    logs.into_iter().map(|l| l - norm).collect()
}

pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Draw from `N(mean, cov)`.
pub fn mvn_draw(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let chol = robust_cholesky(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample(StandardNormal));
    Ok(mean + chol.l() * z)
}

pub fn mvn_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let chol = robust_cholesky(cov)?;
    let diff = x - mean;
    let sol = chol
        .l()
        .solve_lower_triangular(&diff)
        .ok_or_else(|| Error::Numeric("singular factor".into()))?;
    let d = x.len() as f64;
    Ok(-0.5 * (d * (2.0 * PI).ln() + chol_log_det(&chol) + sol.norm_squared()))
}

/// Draw from the inverse Wishart `IW(dof, scale)` via the Bartlett decomposition.
pub fn inv_wishart_draw(
    dof: f64,
    scale: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if dof <= d as f64 - 1.0 {
        return Err(Error::InvalidArgument(format!(
            "IW degrees of freedom {dof} must exceed {}",
            d as f64 - 1.0
        )));
    }
    let l = robust_cholesky(scale)?.l();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64)
            .expect("positive dof")
            .sample(rng);
        a[(i, i)] = chi.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    // Sigma = L A^{-T} A^{-1} L^T
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Numeric("singular Bartlett factor".into()))?;
    let b = l * a_inv.transpose();
    let mut sigma = &b * b.transpose();
    symmetrize(&mut sigma);
    Ok(sigma)
}

pub fn inv_wishart_log_pdf(sigma: &DMatrix<f64>, dof: f64, scale: &DMatrix<f64>) -> Result<f64> {
    let d = sigma.nrows();
    let d_f = d as f64;
    let cs = robust_cholesky(sigma)?;
    let cp = robust_cholesky(scale)?;
    let sigma_inv_scale = cs.solve(scale);
    Ok(0.5 * dof * chol_log_det(&cp)
        - 0.5 * dof * d_f * 2f64.ln()
        - ln_multigamma(0.5 * dof, d)
        - 0.5 * (dof + d_f + 1.0) * chol_log_det(&cs)
        - 0.5 * sigma_inv_scale.trace())
}

/// Index drawn proportionally to `exp(logits)`.
pub fn sample_log_categorical(logits: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let weights: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last = Some(i);
            if u < *w {
                return Some(i);
            }
            u -= w;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-12);
    }

    #[test]
    fn inverse_wishart_mean() {
        // E[Sigma] = scale / (dof - d - 1)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let dof = 8.0;
        let draws = 20_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..draws {
            acc += inv_wishart_draw(dof, &scale, &mut rng).unwrap();
        }
        let mean = acc / draws as f64;
        let expected = &scale / (dof - 3.0);
        assert!((mean - expected).norm() < 0.02, "mean off");
    }

    #[test]
    fn inverse_wishart_density_normalizes_in_one_dim() {
        // 1-d IW(dof, s) is inverse-gamma(dof/2, s/2)
        let s = DMatrix::from_element(1, 1, 3.0);
        let x = DMatrix::from_element(1, 1, 0.7);
        let dof = 5.0;
        let (a, b) = (dof / 2.0, 1.5);
        let ig = a * f64::ln(b) - ln_gamma(a) - (a + 1.0) * 0.7f64.ln() - b / 0.7;
        assert!((inv_wishart_log_pdf(&x, dof, &s).unwrap() - ig).abs() < 1e-12);
    }

    #[test]
    fn tiny_dirichlet_params_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lw = log_dirichlet_draw(&[1e-8, 1e-8, 2.0], &mut rng);
        assert!(lw.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY));
        assert!((crate::linalg::log_sum_exp(&lw)).abs() < 1e-12);
    }

    #[test]
    fn categorical_skips_impossible() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(
                sample_log_categorical(&[f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY], &mut rng),
                Some(1)
            );
        }
        assert_eq!(sample_log_categorical(&[f64::NEG_INFINITY], &mut rng), None);
    }
}
