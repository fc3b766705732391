//! Dense feed-forward network with batched forward and reverse passes.
//!
//! Batches are row-major `(batch, features)` matrices. Weights are stored
//! `(out, in)`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    input: Array2<f64>,
    outputs: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("network has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

/// Parameter gradients, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    /// Flattened in the same order as [`Mlp::params_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape(format!(
                    "bias of length {} for {} outputs",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(Self { layers })
    }

    /// Tanh hidden layers and an identity output layer, orthogonally
    /// initialised with unit gain on hidden layers and `output_gain` on the
    /// last one. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let count = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, dims)| {
                let last = i + 1 == count;
                let gain = if last { output_gain } else { 1.0 };
                Layer {
                    weights: orthogonal(dims[1], dims[0], gain, rng),
                    bias: Array1::zeros(dims[1]),
                    activation: if last {
                        Activation::Identity
                    } else {
                        Activation::Tanh
                    },
                }
            })
            .collect();
        Self { layers }
    }

    /// Replaces the activation of the output layer.
    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        if let Some(last) = self.layers.last_mut() {
            last.activation = activation;
        }
        self
    }

    /// Sets every bias of the output layer to `value`.
    pub fn fill_output_bias(&mut self, value: f64) {
        if let Some(last) = self.layers.last_mut() {
            last.bias.fill(value);
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::LengthMismatch {
                what: "flat parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = params[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let cache = self.forward_batch(x)?;
        let out = cache.output().row(0).to_vec();
        Ok((out, cache))
    }

    /// Output only, without keeping a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Cache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = outputs.last().map(|a| a.view()).unwrap_or(input.view());
            let mut z = prev.dot(&layer.weights.t());
            z += &layer.bias;
            if layer.activation == Activation::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            outputs.push(z);
        }
        Ok(Cache {
            input: input.to_owned(),
            outputs,
        })
    }

    /// Reverse pass for a single-sample cache.
    pub fn backward(&self, cache: &Cache, output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (grads, input_grad) = self.backward_batch(cache, g)?;
        Ok((grads, input_grad.row(0).to_vec()))
    }

    /// Reverse pass summing parameter gradients over the batch.
    pub fn backward_batch(
        &self,
        cache: &Cache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        if cache.outputs.len() != self.layers.len()
            || output_grad.dim() != cache.output().dim()
            || cache.input.ncols() != self.input_dim()
        {
            return Err(Error::Shape(format!(
                "gradient {:?} does not match cached output {:?}",
                output_grad.dim(),
                cache.output().dim()
            )));
        }
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut grad = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Tanh {
                grad.zip_mut_with(&cache.outputs[i], |g, &y| *g *= 1.0 - y * y);
            }
            let input = if i == 0 {
                cache.input.view()
            } else {
                cache.outputs[i - 1].view()
            };
            weights.push(grad.t().dot(&input));
            biases.push(grad.sum_axis(Axis(0)));
            grad = grad.dot(&layer.weights);
        }
        weights.reverse();
        biases.reverse();
        Ok((MlpGrads { weights, biases }, grad))
    }
}

/// `(rows, cols)` matrix with orthonormal rows or columns, scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        // modified Gram-Schmidt, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let value = if rows <= cols { basis[r][c] } else { basis[c][r] };
        gain * value
    })
}
