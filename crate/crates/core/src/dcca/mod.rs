//! Deep CCA: nonlinear transforms of the visual and language views trained
//! to maximize their total canonical correlation, plus closed-form linear CCA.

mod cca;
mod checkpoint;
mod mlp;
mod train;

pub use cca::{cca_signal, linear_cca_fit, CcaModel};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use mlp::{mlp_apply, Activation, DenseLayer, MlpParams};
pub use train::{dcca_train, DccaConfig, DccaModel, TrainedDcca};

#[doc(hidden)]
pub mod testing {
    //! Hooks for gradient checks in integration tests.
    use nalgebra::DMatrix;

    use super::{cca, MlpParams};
    use crate::Result;

    /// Total correlation of `(f(x), g(y))` and its analytic parameter gradients,
    /// flattened in layer order (weights column-major, then bias).
    pub fn objective_and_gradient(
        f: &MlpParams,
        g: &MlpParams,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        reg: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (value, gf, gg) = super::train::objective_with_grads(f, g, x, y, reg)?;
        let flat = |layers: &[super::DenseLayer]| {
            layers
                .iter()
                .flat_map(|l| {
                    l.weights
                        .iter()
                        .chain(l.bias.iter())
                        .copied()
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<f64>>()
        };
        Ok((value, flat(&gf), flat(&gg)))
    }

    /// Total correlation only.
    pub fn objective(
        f: &MlpParams,
        g: &MlpParams,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        reg: f64,
    ) -> Result<f64> {
        let hx = super::mlp_apply(f, x)?;
        let hy = super::mlp_apply(g, y)?;
        Ok(cca::correlation_objective(&hx, &hy, reg)?.value)
    }

    /// Mutable access to the `i`-th parameter in the flattening order above.
    pub fn param_mut(p: &mut MlpParams, mut i: usize) -> &mut f64 {
        for l in &mut p.layers {
            if i < l.weights.len() {
                return &mut l.weights.as_mut_slice()[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return &mut l.bias.as_mut_slice()[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }
}
