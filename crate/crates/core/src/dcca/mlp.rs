use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// One affine map `x -> x W + b` applied to row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `fan_in x fan_out`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Feed-forward network with `tanh` on every hidden layer and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

impl MlpParams {
    /// Glorot-uniform weights and zero biases for the given layer sizes
    /// (input first, output last).
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer sizes {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                DenseLayer {
                    weights: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-limit..limit)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self {
            layers,
            activation: Activation::Tanh,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::Dimension(format!(
                    "layer {i}: bias length {} != {}",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::Dimension(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    l.fan_in(),
                    layers[i - 1].fan_out()
                )));
            }
            if l.weights
                .iter()
                .chain(l.bias.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Numeric(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(Self {
            layers,
            activation: Activation::Tanh,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in()];
        s.extend(self.layers.iter().map(DenseLayer::fan_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(DenseLayer::fan_out).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Activations of every layer: index 0 is the input, the last entry the output.
    pub(crate) fn forward_all(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].clone() * &layer.weights;
            for mut row in z.row_iter_mut() {
                row += layer.bias.transpose();
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Back-propagates `d_out` (gradient w.r.t. the output) and returns the
    /// parameter gradients layer by layer.
    pub(crate) fn backward(&self, acts: &[DMatrix<f64>], d_out: DMatrix<f64>) -> Vec<DenseLayer> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                // acts[i + 1] = tanh(z)
                delta.zip_apply(&acts[i + 1], |d, h| *d *= 1.0 - h * h);
            }
            let dw = acts[i].tr_mul(&delta);
            let db = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if i > 0 {
                delta = &delta * self.layers[i].weights.transpose();
            }
            grads.push(DenseLayer {
                weights: dw,
                bias: db,
            });
        }
        grads.reverse();
        grads
    }

    pub(crate) fn add_scaled(&mut self, grads: &[DenseLayer], step: f64) {
        for (l, g) in self.layers.iter_mut().zip(grads) {
            l.weights += &g.weights * step;
            l.bias.axpy(step, &g.bias, 1.0);
        }
    }
}

/// Applies the network row-wise to `x` (`n x d_in`).
pub fn mlp_apply(params: &MlpParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != params.input_dim() {
        return Err(Error::Dimension(format!(
            "network expects {} input columns, got {}",
            params.input_dim(),
            x.ncols()
        )));
    }
    let out = params.forward_all(x).pop().expect("at least the input");
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("network output is not finite".into()));
    }
    Ok(out)
}
