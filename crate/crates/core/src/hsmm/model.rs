//! Hyperparameters, parameter state, and conditional parameter updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{
    gamma_draw, gamma_log_pdf, inv_wishart_draw, inv_wishart_log_pdf, ln_gamma, log_dirichlet_draw,
    mvn_draw, mvn_log_pdf,
};
use super::messages::{label_runs, LogModel, Segment};
use crate::error::{Error, Result};
use crate::linalg::{
    center, chol_log_det, cross_covariance, log_sum_exp, robust_cholesky, symmetrize,
};

/// User-facing sampler settings. Emission priors are derived from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsmmConfig {
    /// Truncation level S of the state space.
    pub states: usize,
    /// Top-level concentration.
    pub gamma: f64,
    /// Transition concentration.
    pub alpha: f64,
    /// Inverse-Wishart degrees of freedom beyond the dimension (`nu0 = d + nu0_extra`).
    pub nu0_extra: f64,
    /// Duration-rate prior shape.
    pub a_dur: f64,
    /// Duration-rate prior rate.
    pub b_dur: f64,
    pub d_max: usize,
    pub sweeps: usize,
}

impl Default for HsmmConfig {
    fn default() -> Self {
        Self {
            states: 20,
            gamma: 6.0,
            alpha: 6.0,
            nu0_extra: 2.0,
            a_dur: 3.0,
            b_dur: 0.01,
            d_max: 600,
            sweeps: 200,
        }
    }
}

impl HsmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("nu0_extra", self.nu0_extra),
            ("a_dur", self.a_dur),
            ("b_dur", self.b_dur),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.states == 0 || self.d_max == 0 || self.sweeps == 0 {
            return Err(Error::InvalidArgument(
                "states, d_max and sweeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Complete hyperparameter set for one observation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HdpHsmmHyper {
    pub states: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub mu0: DVector<f64>,
    /// Prior covariance of state means.
    pub s0: DMatrix<f64>,
    pub nu0: f64,
    /// Inverse-Wishart scale.
    pub delta0: DMatrix<f64>,
    pub a_dur: f64,
    pub b_dur: f64,
    pub d_max: usize,
}

impl HdpHsmmHyper {
    /// Empirical-Bayes emission prior: `mu0` is the data mean and both
    /// covariance hyperparameters are the data covariance plus a small ridge.
    pub fn from_data(cfg: &HsmmConfig, obs: &DMatrix<f64>) -> Result<Self> {
        cfg.validate()?;
        if obs.nrows() < 2 || obs.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "need at least two observations of positive dimension".into(),
            ));
        }
        let d = obs.ncols();
        let (centered, means) = center(obs);
        let mut cov = cross_covariance(&centered, &centered);
        symmetrize(&mut cov);
        let ridge = 1e-6 * (cov.trace() / d as f64).max(1.0);
        cov += DMatrix::identity(d, d) * ridge;
        Ok(Self {
            states: cfg.states,
            gamma: cfg.gamma,
            alpha: cfg.alpha,
            mu0: means,
            s0: cov.clone(),
            nu0: d as f64 + cfg.nu0_extra,
            delta0: cov,
            a_dur: cfg.a_dur,
            b_dur: cfg.b_dur,
            d_max: cfg.d_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }
}

/// Gaussian emission parameters of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Gaussian {
    fn from_prior(hyper: &HdpHsmmHyper, rng: &mut impl Rng) -> Result<Self> {
        let cov = inv_wishart_draw(hyper.nu0, &hyper.delta0, rng)?;
        let mean = mvn_draw(&hyper.mu0, &hyper.s0, rng)?;
        Ok(Self { mean, cov })
    }

    /// Log density of every row of `obs`.
    pub fn log_pdf_rows(&self, obs: &DMatrix<f64>) -> Result<Vec<f64>> {
        let chol = robust_cholesky(&self.cov)?;
        let d = obs.ncols() as f64;
        let norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + chol_log_det(&chol));
        let mut diff = obs.transpose();
        for mut c in diff.column_iter_mut() {
            c -= &self.mean;
        }
        let sol = chol
            .l()
            .solve_lower_triangular(&diff)
            .ok_or_else(|| Error::Numeric("singular emission covariance".into()))?;
        Ok(sol
            .column_iter()
            .map(|c| norm - 0.5 * c.norm_squared())
            .collect())
    }
}

/// Current values of all sampled parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HsmmState {
    /// Top-level state weights, in log space.
    pub log_beta: Vec<f64>,
    /// Row-major `S x S` transition log-probabilities with `-inf` diagonal.
    pub log_pi: Vec<f64>,
    pub emissions: Vec<Gaussian>,
    /// Shifted-Poisson duration rates.
    pub lambda: Vec<f64>,
}

impl HsmmState {
    pub fn states(&self) -> usize {
        self.lambda.len()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.log_beta.iter().map(|l| l.exp()).collect()
    }

    /// Transition matrix as probabilities.
    pub fn pi(&self) -> DMatrix<f64> {
        let s = self.states();
        DMatrix::from_fn(s, s, |i, j| self.log_pi[i * s + j].exp())
    }

    /// Draws every parameter from the prior.
    pub fn from_prior(hyper: &HdpHsmmHyper, rng: &mut impl Rng) -> Result<Self> {
        let s = hyper.states;
        let log_beta = log_dirichlet_draw(&vec![hyper.gamma / s as f64; s], rng);
        let log_pi = draw_transitions(hyper, &log_beta, &vec![0; s * s], rng);
        let emissions = (0..s)
            .map(|_| Gaussian::from_prior(hyper, rng))
            .collect::<Result<Vec<_>>>()?;
        let lambda = (0..s)
            .map(|_| gamma_draw(hyper.a_dur, hyper.b_dur, rng))
            .collect();
        Ok(Self {
            log_beta,
            log_pi,
            emissions,
            lambda,
        })
    }

    /// Row-major `T x S` frame log-likelihoods.
    pub fn log_likelihoods(&self, obs: &DMatrix<f64>) -> Result<Vec<f64>> {
        let s = self.states();
        let t_len = obs.nrows();
        let mut out = vec![0.0; t_len * s];
        for (i, g) in self.emissions.iter().enumerate() {
            for (t, v) in g.log_pdf_rows(obs)?.into_iter().enumerate() {
                out[t * s + i] = v;
            }
        }
        Ok(out)
    }

    /// Log-probability tables for message passing. The initial state
    /// distribution is `beta`.
    pub fn log_model(&self, d_max: usize) -> LogModel {
        LogModel {
            log_init: self.log_beta.clone(),
            log_trans: self.log_pi.clone(),
            log_dur: self
                .lambda
                .iter()
                .flat_map(|&l| duration_log_pmf(l, d_max))
                .collect(),
            d_max,
        }
    }
}

/// Shifted-Poisson duration probability `P(d) = Poisson(d - 1; lambda)`.
pub fn duration_pmf(lambda: f64, d: usize) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration rate must be positive, got {lambda}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("durations start at 1".into()));
    }
    let k = (d - 1) as f64;
    Ok((k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp())
}

/// Shifted-Poisson pmf truncated to `1..=d_max` and renormalized. Entry
/// `d - 1` holds `P(d)`.
pub fn truncated_duration_pmf(lambda: f64, d_max: usize) -> Vec<f64> {
    duration_log_pmf(lambda, d_max)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Logarithm of [`truncated_duration_pmf`].
pub fn duration_log_pmf(lambda: f64, d_max: usize) -> Vec<f64> {
    let ll = lambda.ln();
    let raw: Vec<f64> = (0..d_max)
        .map(|k| k as f64 * ll - lambda - ln_gamma(k as f64 + 1.0))
        .collect();
    let norm = log_sum_exp(&raw);
    raw.into_iter().map(|v| v - norm).collect()
}

fn draw_transitions(
    hyper: &HdpHsmmHyper,
    log_beta: &[f64],
    counts: &[usize],
    rng: &mut impl Rng,
) -> Vec<f64> {
    let s = hyper.states;
    let mut log_pi = vec![f64::NEG_INFINITY; s * s];
    if s == 1 {
        return log_pi;
    }
    for i in 0..s {
        let params: Vec<f64> = (0..s)
            .filter(|&j| j != i)
            .map(|j| (hyper.alpha * log_beta[j].exp()).max(1e-300) + counts[i * s + j] as f64)
            .collect();
        let draw = log_dirichlet_draw(&params, rng);
        let mut k = 0;
        for j in (0..s).filter(|&j| j != i) {
            log_pi[i * s + j] = draw[k];
            k += 1;
        }
    }
    log_pi
}

fn check_labels(labels: &[usize], obs: &DMatrix<f64>, s: usize) -> Result<()> {
    if labels.len() != obs.nrows() {
        return Err(Error::Length {
            expected: obs.nrows(),
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= s) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {s} states"
        )));
    }
    Ok(())
}

fn transition_counts(runs: &[Segment], s: usize) -> Vec<usize> {
    let mut n = vec![0usize; s * s];
    for w in runs.windows(2) {
        n[w[0].state * s + w[1].state] += 1;
    }
    n
}

/// Resamples the emission parameters of each state given frame labels.
/// Each Gaussian update conditions on the other block's current value.
pub fn resample_emissions(
    state: &mut HsmmState,
    labels: &[usize],
    obs: &DMatrix<f64>,
    hyper: &HdpHsmmHyper,
    rng: &mut impl Rng,
) -> Result<()> {
    let s = hyper.states;
    check_labels(labels, obs, s)?;
    let s0_inv = robust_cholesky(&hyper.s0)?.inverse();
    let s0_inv_mu0 = &s0_inv * &hyper.mu0;
    for i in 0..s {
        let rows: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == i).collect();
        if rows.is_empty() {
            state.emissions[i] = Gaussian::from_prior(hyper, rng)?;
            continue;
        }
        let n = rows.len() as f64;
        let y = obs.select_rows(&rows);
        // Sigma | mu
        let mut scatter = hyper.delta0.clone();
        let mu = state.emissions[i].mean.clone();
        for r in y.row_iter() {
            let diff = r.transpose() - &mu;
            scatter += &diff * diff.transpose();
        }
        symmetrize(&mut scatter);
        let cov = inv_wishart_draw(hyper.nu0 + n, &scatter, rng)?;
        // mu | Sigma
        let cov_inv = robust_cholesky(&cov)?.inverse();
        let sum_y = y.row_sum().transpose();
        let mut post_prec = &s0_inv + &cov_inv * n;
        symmetrize(&mut post_prec);
        let post_cov_chol = robust_cholesky(&post_prec)?;
        let mut post_cov = post_cov_chol.inverse();
        symmetrize(&mut post_cov);
        let post_mean = &post_cov * (&s0_inv_mu0 + &cov_inv * sum_y);
        let mean = mvn_draw(&post_mean, &post_cov, rng)?;
        state.emissions[i] = Gaussian { mean, cov };
    }
    Ok(())
}

/// One full conditional update of `beta`, `pi`, the emissions and the
/// duration rates given frame labels.
pub fn resample_params(
    state: &mut HsmmState,
    labels: &[usize],
    obs: &DMatrix<f64>,
    hyper: &HdpHsmmHyper,
    rng: &mut impl Rng,
) -> Result<()> {
    let s = hyper.states;
    check_labels(labels, obs, s)?;
    let runs = label_runs(labels);
    let n = transition_counts(&runs, s);

    // Auxiliary table counts of the Chinese restaurant franchise.
    let beta: Vec<f64> = state.log_beta.iter().map(|l| l.exp()).collect();
    let mut m = vec![0usize; s];
    for i in 0..s {
        for j in 0..s {
            let a = hyper.alpha * beta[j];
            for k in 0..n[i * s + j] {
                if rng.random::<f64>() < a / (a + k as f64) {
                    m[j] += 1;
                }
            }
        }
    }
    let params: Vec<f64> = m
        .iter()
        .map(|&mj| hyper.gamma / s as f64 + mj as f64)
        .collect();
    state.log_beta = log_dirichlet_draw(&params, rng);
    state.log_pi = draw_transitions(hyper, &state.log_beta, &n, rng);

    resample_emissions(state, labels, obs, hyper, rng)?;

    let mut excess = vec![0usize; s];
    let mut count = vec![0usize; s];
    for r in &runs {
        excess[r.state] += r.len - 1;
        count[r.state] += 1;
    }
    for i in 0..s {
        state.lambda[i] = gamma_draw(
            hyper.a_dur + excess[i] as f64,
            hyper.b_dur + count[i] as f64,
            rng,
        )
        .max(1e-12);
    }
    Ok(())
}

/// Joint log density of emission and duration parameters, labels and
/// observations. `beta` and `pi` enter only through the probability of the
/// label sequence: their Dirichlet densities are unbounded near the simplex
/// boundary and would swamp every other term.
pub fn log_joint(
    state: &HsmmState,
    labels: &[usize],
    obs: &DMatrix<f64>,
    hyper: &HdpHsmmHyper,
) -> Result<f64> {
    let s = hyper.states;
    check_labels(labels, obs, s)?;
    let mut total = 0.0;
    for (g, &lam) in state.emissions.iter().zip(&state.lambda) {
        total += mvn_log_pdf(&g.mean, &hyper.mu0, &hyper.s0)?;
        total += inv_wishart_log_pdf(&g.cov, hyper.nu0, &hyper.delta0)?;
        total += gamma_log_pdf(lam, hyper.a_dur, hyper.b_dur);
    }
    let runs = label_runs(labels);
    total += state.log_beta[runs[0].state];
    for w in runs.windows(2) {
        total += state.log_pi[w[0].state * s + w[1].state];
    }
    for r in &runs {
        if r.len > hyper.d_max {
            return Ok(f64::NEG_INFINITY);
        }
        total += duration_log_pmf(state.lambda[r.state], hyper.d_max)[r.len - 1];
    }
    let ll = state.log_likelihoods(obs)?;
    total += labels
        .iter()
        .enumerate()
        .map(|(t, &l)| ll[t * s + l])
        .sum::<f64>();
    Ok(total)
}
