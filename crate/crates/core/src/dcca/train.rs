use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cca::correlation_objective;
use super::mlp::{mlp_apply, DenseLayer, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DccaConfig {
    pub visual_hidden: Vec<usize>,
    pub language_hidden: Vec<usize>,
    /// Output dimension of both branches.
    pub k: usize,
    /// Ridge added to both auto-covariances.
    pub reg: f64,
    pub learning_rate: f64,
    /// Minibatch length in frames; `None` trains on the full sequence.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DccaConfig {
    fn default() -> Self {
        Self {
            visual_hidden: vec![1024, 512],
            language_hidden: vec![256, 128],
            k: 128,
            reg: 1e-4,
            learning_rate: 1e-3,
            batch_size: None,
            epochs: 100,
            seed: 0,
        }
    }
}

impl DccaConfig {
    /// Reduced widths for 64-d visual and 32-d language inputs. The small
    /// networks need a larger step to converge within 100 full-batch epochs.
    pub fn desk_scale() -> Self {
        Self {
            visual_hidden: vec![64, 32],
            language_hidden: vec![32, 16],
            k: 8,
            learning_rate: 0.02,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.visual_hidden.contains(&0) || self.language_hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths and k must be positive".into(),
            ));
        }
        if !(self.reg > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "regularizer and learning rate must be positive".into(),
            ));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// The pair of trained transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct DccaModel {
    pub visual: MlpParams,
    pub language: MlpParams,
    pub reg: f64,
    pub seed: u64,
}

impl DccaModel {
    pub fn k(&self) -> usize {
        self.visual.output_dim()
    }

    pub fn transform(
        &self,
        visual: &DMatrix<f64>,
        language: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((
            mlp_apply(&self.visual, visual)?,
            mlp_apply(&self.language, language)?,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct TrainedDcca {
    pub model: DccaModel,
    /// Total correlation on the full sequence before training.
    pub initial_correlation: f64,
    /// Total correlation on the full sequence after each epoch.
    pub trace: Vec<f64>,
}

pub(crate) fn objective_with_grads(
    f: &MlpParams,
    g: &MlpParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    reg: f64,
) -> Result<(f64, Vec<DenseLayer>, Vec<DenseLayer>)> {
    let ax = f.forward_all(x);
    let ay = g.forward_all(y);
    let obj = correlation_objective(ax.last().unwrap(), ay.last().unwrap(), reg)?;
    let gf = f.backward(&ax, obj.grad_x);
    let gg = g.backward(&ay, obj.grad_y);
    Ok((obj.value, gf, gg))
}

fn full_objective(
    f: &MlpParams,
    g: &MlpParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    reg: f64,
) -> Result<f64> {
    let hx = f.forward_all(x).pop().unwrap();
    let hy = g.forward_all(y).pop().unwrap();
    Ok(correlation_objective(&hx, &hy, reg)?.value)
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Trains both branches by plain gradient ascent on the total canonical
/// correlation of their outputs. Deterministic for a given `cfg.seed`.
pub fn dcca_train(
    visual: &DMatrix<f64>,
    language: &DMatrix<f64>,
    cfg: &DccaConfig,
) -> Result<TrainedDcca> {
    cfg.validate()?;
    let n = visual.nrows();
    if language.nrows() != n {
        return Err(Error::Dimension(format!(
            "visual has {n} rows, language has {}",
            language.nrows()
        )));
    }
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    if batch <= cfg.k {
        return Err(Error::Dimension(format!(
            "batch of {batch} frames must exceed output dimension {}",
            cfg.k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vs = vec![visual.ncols()];
    vs.extend(&cfg.visual_hidden);
    vs.push(cfg.k);
    let mut ls = vec![language.ncols()];
    ls.extend(&cfg.language_hidden);
    ls.push(cfg.k);
    let mut f = MlpParams::init(&vs, &mut rng)?;
    let mut g = MlpParams::init(&ls, &mut rng)?;

    let initial_correlation = full_objective(&f, &g, visual, language, cfg.reg)?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        if batch == n {
            let (value, gf, gg) = objective_with_grads(&f, &g, visual, language, cfg.reg)?;
            if !value.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite correlation".into(),
                });
            }
            f.add_scaled(&gf, cfg.learning_rate);
            g.add_scaled(&gg, cfg.learning_rate);
        } else {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch).filter(|c| c.len() > cfg.k) {
                let xb = select_rows(visual, chunk);
                let yb = select_rows(language, chunk);
                let (value, gf, gg) = objective_with_grads(&f, &g, &xb, &yb, cfg.reg)?;
                if !value.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        reason: "non-finite minibatch correlation".into(),
                    });
                }
                f.add_scaled(&gf, cfg.learning_rate);
                g.add_scaled(&gg, cfg.learning_rate);
            }
        }
        let value =
            full_objective(&f, &g, visual, language, cfg.reg).map_err(|e| Error::Training {
                epoch,
                reason: e.to_string(),
            })?;
        if !value.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "non-finite correlation".into(),
            });
        }
        log::debug!("dcca epoch {epoch}: total correlation {value:.4}");
        trace.push(value);
    }
    Ok(TrainedDcca {
        model: DccaModel {
            visual: f,
            language: g,
            reg: cfg.reg,
            seed: cfg.seed,
        },
        initial_correlation,
        trace,
    })
}
