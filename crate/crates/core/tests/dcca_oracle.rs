use mmseg_core::dcca::testing::{objective, objective_and_gradient, param_mut};
use mmseg_core::dcca::{dcca_train, linear_cca_fit, DccaConfig, MlpParams};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn centered_cov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    let ma = a.row_mean();
    let mb = b.row_mean();
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for t in 0..a.nrows() {
        out += (a.row(t) - &ma).transpose() * (b.row(t) - &mb);
    }
    out / (n - 1.0)
}

/// Squared canonical correlations as the eigenvalues of
/// `L^-1 Sxy Syy^-1 Syx L^-T` with `Sxx = L L^T`.
fn generalized_eigen_rho(x: &DMatrix<f64>, y: &DMatrix<f64>, reg: f64) -> Vec<f64> {
    let sxx = centered_cov(x, x) + DMatrix::identity(x.ncols(), x.ncols()) * reg;
    let syy = centered_cov(y, y) + DMatrix::identity(y.ncols(), y.ncols()) * reg;
    let sxy = centered_cov(x, y);
    let l = sxx.cholesky().unwrap().l();
    let l_inv = l.clone().try_inverse().unwrap();
    let m = &l_inv * &sxy * syy.try_inverse().unwrap() * sxy.transpose() * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = m
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_cca_matches_generalized_eigenproblem(seed in any::<u64>(), dx in 1usize..5, dy in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let x = gaussian(&mut rng, n, dx);
        let mix = gaussian(&mut rng, dx, dy);
        let y = &x * mix * 0.7 + gaussian(&mut rng, n, dy);
        let k = dx.min(dy);
        let reg = 1e-4;
        let model = linear_cca_fit(&x, &y, k, reg).unwrap();
        let want = generalized_eigen_rho(&x, &y, reg);
        for i in 0..k {
            prop_assert!((model.rho[i] - want[i]).abs() < 1e-8, "rho[{}] {} vs {}", i, model.rho[i], want[i]);
        }
        // projections whiten each view and diagonalize the cross-covariance
        let sxx = centered_cov(&x, &x) + DMatrix::identity(dx, dx) * reg;
        let syy = centered_cov(&y, &y) + DMatrix::identity(dy, dy) * reg;
        let ax = model.proj_x.transpose() * sxx * &model.proj_x;
        let ay = model.proj_y.transpose() * syy * &model.proj_y;
        let cxy = model.proj_x.transpose() * centered_cov(&x, &y) * &model.proj_y;
        let id = DMatrix::<f64>::identity(k, k);
        prop_assert!((ax - &id).amax() < 1e-8);
        prop_assert!((ay - &id).amax() < 1e-8);
        prop_assert!((cxy - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(model.rho.clone()))).amax() < 1e-8);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gaussian(&mut rng, 10, 3);
    let y = gaussian(&mut rng, 10, 3);
    let f = MlpParams::init(&[3, 4, 2], &mut rng).unwrap();
    let g = MlpParams::init(&[3, 5, 2], &mut rng).unwrap();
    let reg = 1e-3;
    let (_, gf, gg) = objective_and_gradient(&f, &g, &x, &y, reg).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (which, grad) in [(0, &gf), (1, &gg)] {
        for i in 0..grad.len() {
            let (mut fp, mut gp) = (f.clone(), g.clone());
            let (mut fm, mut gm) = (f.clone(), g.clone());
            if which == 0 {
                *param_mut(&mut fp, i) += h;
                *param_mut(&mut fm, i) -= h;
            } else {
                *param_mut(&mut gp, i) += h;
                *param_mut(&mut gm, i) -= h;
            }
            let fd = (objective(&fp, &gp, &x, &y, reg).unwrap()
                - objective(&fm, &gm, &x, &y, reg).unwrap())
                / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

fn coupled_views(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let z = gaussian(rng, n, 3);
    let ax = gaussian(rng, 3, 6);
    let ay = gaussian(rng, 3, 4);
    let x = (&z * ax).map(|v| v.tanh()) + gaussian(rng, n, 6) * 0.01;
    let y = (&z * ay).map(|v| v + 0.2 * v * v * v) + gaussian(rng, n, 4) * 0.01;
    (x, y)
}

#[test]
fn coupled_views_reach_high_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, y) = coupled_views(&mut rng, 400);
    let cfg = DccaConfig {
        visual_hidden: vec![16],
        language_hidden: vec![16],
        k: 3,
        learning_rate: 0.05,
        epochs: 300,
        ..DccaConfig::default()
    };
    let trained = dcca_train(&x, &y, &cfg).unwrap();
    let last = *trained.trace.last().unwrap();
    assert!(
        last >= 0.9 * 3.0,
        "total correlation {last} from {}",
        trained.initial_correlation
    );
}

#[test]
fn independent_views_stay_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = gaussian(&mut rng, 1000, 6);
    let y = gaussian(&mut rng, 1000, 4);
    let cfg = DccaConfig {
        visual_hidden: vec![16],
        language_hidden: vec![16],
        k: 3,
        learning_rate: 0.05,
        epochs: 100,
        ..DccaConfig::default()
    };
    let trained = dcca_train(&x, &y, &cfg).unwrap();
    let mean_rho = trained.trace.last().unwrap() / 3.0;
    assert!(mean_rho <= 0.3, "mean canonical correlation {mean_rho}");
}
