use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::loss::softmax_inplace;
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    /// Row-wise softmax over the layer outputs.
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }
}

/// `y = activation(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Activations saved by a training forward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Matrix,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::InvalidInput(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±√(6/(in+out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weights: Matrix::from_vec(outputs, inputs, data).expect("length matches"),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// Pre-activation `W x + b` for every row of `batch`.
    pub fn linear(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.inputs() {
            return Err(Error::Shape {
                context: "dense_forward (batch vs weights)",
                left_rows: batch.rows(),
                left_cols: batch.cols(),
                right_rows: self.weights.rows(),
                right_cols: self.weights.cols(),
            });
        }
        let mut z = batch.matmul_transposed(&self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(z)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        let mut z = self.linear(batch)?;
        self.activate(&mut z);
        Ok(z)
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<(Matrix, DenseCache)> {
        let out = self.forward(batch)?;
        let cache = DenseCache {
            input: batch.clone(),
            output: out.clone(),
        };
        Ok((out, cache))
    }

    fn activate(&self, z: &mut Matrix) {
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => z.map_inplace(|v| v.max(0.0)),
            Activation::Softmax => {
                for r in 0..z.rows() {
                    softmax_inplace(z.row_mut(r));
                }
            }
        }
    }

    /// Back-propagates a gradient with respect to the layer's output.
    /// Returns the gradient with respect to the input together with the
    /// parameter gradients.
    pub fn backward(
        &self,
        cache: &DenseCache,
        grad_output: &Matrix,
    ) -> Result<(Matrix, DenseGrads)> {
        let mut grad_pre = grad_output.clone();
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &y) in grad_pre
                    .as_mut_slice()
                    .iter_mut()
                    .zip(cache.output.as_slice())
                {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Softmax => {
                // dz = p ⊙ (g − ⟨g, p⟩)
                for r in 0..grad_pre.rows() {
                    let p = cache.output.row(r);
                    let g = grad_pre.row_mut(r);
                    let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    for (gi, &pi) in g.iter_mut().zip(p) {
                        *gi = pi * (*gi - gp);
                    }
                }
            }
        }
        self.backward_preactivation(cache, &grad_pre)
    }

    /// Back-propagates a gradient already expressed at the pre-activation,
    /// e.g. the fused softmax/cross-entropy gradient `(p − s)/B`.
    pub fn backward_preactivation(
        &self,
        cache: &DenseCache,
        grad_pre: &Matrix,
    ) -> Result<(Matrix, DenseGrads)> {
        if grad_pre.shape() != cache.output.shape() {
            return Err(Error::Shape {
                context: "dense_backward (gradient vs cached output)",
                left_rows: grad_pre.rows(),
                left_cols: grad_pre.cols(),
                right_rows: cache.output.rows(),
                right_cols: cache.output.cols(),
            });
        }
        let weights = grad_pre.transposed_matmul(&cache.input)?;
        let bias = grad_pre.column_sums();
        let grad_input = grad_pre.matmul(&self.weights)?;
        Ok((grad_input, DenseGrads { weights, bias }))
    }
}
