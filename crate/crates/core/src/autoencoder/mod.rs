//! The transmitter/receiver network.
//!
//! ```text
//! s ─▶ dense(M→M, relu) ─▶ dense(M→n) ─▶ batch-norm(n) ─▶ x
//! y = x + noise ─▶ dense(n→M, relu) ─▶ dense(M→M, softmax) ─▶ p
//! ```
//!
//! Trainable parameter counts per group are `M²+M + Mn+n`, `2n`, `nM+M` and
//! `M²+M`. For `n = 7` they give totals 285, 805 and 9301 at `M = 8, 16, 64`.

mod io;
mod train;

pub use io::{load_model, parse_model, render_model, save_model, MAGIC};
pub use train::{train, LossHistory, TrainingConfig};

use crate::channel::{streams, RngStream};
use crate::codec::{Decoded, GdrCodec};
use crate::error::{Error, Result};
use crate::nn::{
    Activation, BatchNormCache, BatchNormGrads, BatchNormLayer, DenseCache, DenseGrads, DenseLayer,
    Matrix, Mode,
};

/// Identification carried with a model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub vector_size: usize,
    pub channel_uses: usize,
    pub order: usize,
    pub trained_ebn0_db: f64,
    pub seed: u64,
}

/// Trainable parameter counts grouped the way the network is usually
/// tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    /// Both transmitter dense layers.
    pub dense_block: usize,
    pub normalization: usize,
    /// First receiver layer.
    pub relu_layer: usize,
    /// Receiver output layer.
    pub softmax_layer: usize,
}

impl ParamCounts {
    /// Closed form for a given `M` and `n`.
    pub fn for_dimensions(vector_size: usize, channel_uses: usize) -> Self {
        let (m, n) = (vector_size, channel_uses);
        Self {
            dense_block: m * m + m + m * n + n,
            normalization: 2 * n,
            relu_layer: n * m + m,
            softmax_layer: m * m + m,
        }
    }

    pub fn total(&self) -> usize {
        self.dense_block + self.normalization + self.relu_layer + self.softmax_layer
    }

    pub fn as_array(&self) -> [usize; 5] {
        [
            self.dense_block,
            self.normalization,
            self.relu_layer,
            self.softmax_layer,
            self.total(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub tx_dense1: DenseLayer,
    pub tx_dense2: DenseLayer,
    pub norm: BatchNormLayer,
    pub rx_dense: DenseLayer,
    pub rx_out: DenseLayer,
    /// Rescale every transmitted vector to energy `n` after normalization.
    pub strict_power: bool,
    pub meta: ModelMeta,
}

/// Intermediate values of one training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    tx1: DenseCache,
    tx2: DenseCache,
    norm: BatchNormCache,
    /// Batch-norm output before the optional energy projection.
    normalized: Matrix,
    rx1: DenseCache,
    rx2: DenseCache,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Matrix {
        &self.rx2.output
    }

    pub fn transmitted(&self) -> &Matrix {
        &self.rx1.input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tx_dense1: DenseGrads,
    pub tx_dense2: DenseGrads,
    pub norm: BatchNormGrads,
    pub rx_dense: DenseGrads,
    pub rx_out: DenseGrads,
}

impl Gradients {
    /// Same order as [`Autoencoder::params_mut`].
    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            self.tx_dense1.weights.as_slice(),
            &self.tx_dense1.bias,
            self.tx_dense2.weights.as_slice(),
            &self.tx_dense2.bias,
            &self.norm.gamma,
            &self.norm.beta,
            self.rx_dense.weights.as_slice(),
            &self.rx_dense.bias,
            self.rx_out.weights.as_slice(),
            &self.rx_out.bias,
        ]
    }
}

pub const PARAM_NAMES: [&str; 10] = [
    "tx_dense1.weights",
    "tx_dense1.bias",
    "tx_dense2.weights",
    "tx_dense2.bias",
    "norm.gamma",
    "norm.beta",
    "rx_dense.weights",
    "rx_dense.bias",
    "rx_out.weights",
    "rx_out.bias",
];

fn project_energy(x: &mut Matrix) {
    let scale = (x.cols() as f64).sqrt();
    for r in 0..x.rows() {
        let row = x.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row {
                *v *= scale / norm;
            }
        }
    }
}

impl Autoencoder {
    /// Glorot-initialized network drawn from stream `INIT` of `seed`.
    pub fn build(vector_size: usize, channel_uses: usize, seed: u64) -> Result<Self> {
        if vector_size < 2 || channel_uses < 1 {
            return Err(Error::Domain(format!(
                "network needs M >= 2 and n >= 1, got M={vector_size}, n={channel_uses}"
            )));
        }
        let (m, n) = (vector_size, channel_uses);
        let mut rng = RngStream::new(seed, streams::INIT);
        Ok(Self {
            tx_dense1: DenseLayer::glorot(m, m, Activation::Relu, &mut rng),
            tx_dense2: DenseLayer::glorot(m, n, Activation::Identity, &mut rng),
            norm: BatchNormLayer::new(n),
            rx_dense: DenseLayer::glorot(n, m, Activation::Relu, &mut rng),
            rx_out: DenseLayer::glorot(m, m, Activation::Softmax, &mut rng),
            strict_power: false,
            meta: ModelMeta {
                vector_size,
                channel_uses,
                order: 1,
                trained_ebn0_db: 0.0,
                seed,
            },
        })
    }

    pub fn vector_size(&self) -> usize {
        self.meta.vector_size
    }

    pub fn channel_uses(&self) -> usize {
        self.meta.channel_uses
    }

    pub fn param_counts(&self) -> ParamCounts {
        ParamCounts {
            dense_block: self.tx_dense1.param_count() + self.tx_dense2.param_count(),
            normalization: self.norm.param_count(),
            relu_layer: self.rx_dense.param_count(),
            softmax_layer: self.rx_out.param_count(),
        }
    }

    /// Trainable tensors, named, in a fixed order.
    pub fn params_mut(&mut self) -> [(&'static str, &mut [f64]); 10] {
        let [a, b, c, d, e, f, g, h, i, j] = PARAM_NAMES;
        [
            (a, self.tx_dense1.weights.as_mut_slice()),
            (b, &mut self.tx_dense1.bias),
            (c, self.tx_dense2.weights.as_mut_slice()),
            (d, &mut self.tx_dense2.bias),
            (e, &mut self.norm.gamma),
            (f, &mut self.norm.beta),
            (g, self.rx_dense.weights.as_mut_slice()),
            (h, &mut self.rx_dense.bias),
            (i, self.rx_out.weights.as_mut_slice()),
            (j, &mut self.rx_out.bias),
        ]
    }

    pub fn param_sizes(&self) -> [usize; 10] {
        let t = |l: &DenseLayer| (l.weights.as_slice().len(), l.bias.len());
        let (a, b) = t(&self.tx_dense1);
        let (c, d) = t(&self.tx_dense2);
        let (g, h) = t(&self.rx_dense);
        let (i, j) = t(&self.rx_out);
        let n = self.norm.features();
        [a, b, c, d, n, n, g, h, i, j]
    }

    /// True when every trainable and running-statistic entry is finite.
    pub fn is_finite(&self) -> bool {
        let dense_ok =
            |l: &DenseLayer| l.weights.is_finite() && l.bias.iter().all(|v| v.is_finite());
        dense_ok(&self.tx_dense1)
            && dense_ok(&self.tx_dense2)
            && dense_ok(&self.rx_dense)
            && dense_ok(&self.rx_out)
            && [
                &self.norm.gamma,
                &self.norm.beta,
                &self.norm.running_mean,
                &self.norm.running_var,
            ]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.vector_size() {
            return Err(Error::Shape {
                context: "autoencoder input (batch vs M)",
                left_rows: batch.rows(),
                left_cols: batch.cols(),
                right_rows: 1,
                right_cols: self.vector_size(),
            });
        }
        Ok(())
    }

    /// Transmitter in inference mode; never mutates the model.
    pub fn transmit_infer(&self, messages: &Matrix) -> Result<Matrix> {
        self.check_input(messages)?;
        let h = self.tx_dense1.forward(messages)?;
        let z = self.tx_dense2.forward(&h)?;
        let mut x = self.norm.forward_infer(&z)?;
        if self.strict_power {
            project_energy(&mut x);
        }
        Ok(x)
    }

    /// Transmitter in the given mode. Training mode uses batch statistics
    /// and updates the running averages.
    pub fn transmit(&mut self, messages: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Infer => self.transmit_infer(messages),
            Mode::Train => {
                self.check_input(messages)?;
                let h = self.tx_dense1.forward(messages)?;
                let z = self.tx_dense2.forward(&h)?;
                let mut x = self.norm.forward(&z, Mode::Train)?;
                if self.strict_power {
                    project_energy(&mut x);
                }
                Ok(x)
            }
        }
    }

    /// Receiver: probability vectors, one row per received block.
    pub fn receive(&self, received: &Matrix) -> Result<Matrix> {
        let h = self.rx_dense.forward(received)?;
        self.rx_out.forward(&h)
    }

    /// Training-mode pass through transmitter, additive `noise` and receiver.
    pub fn forward_train(&mut self, messages: &Matrix, noise: &Matrix) -> Result<ForwardCache> {
        self.check_input(messages)?;
        let (h, tx1) = self.tx_dense1.forward_cached(messages)?;
        let (z, tx2) = self.tx_dense2.forward_cached(&h)?;
        let (normalized, norm) = self.norm.forward_train(&z)?;
        let mut x = normalized.clone();
        if self.strict_power {
            project_energy(&mut x);
        }
        if noise.shape() != x.shape() {
            return Err(Error::Shape {
                context: "channel noise vs transmitted batch",
                left_rows: noise.rows(),
                left_cols: noise.cols(),
                right_rows: x.rows(),
                right_cols: x.cols(),
            });
        }
        for (v, e) in x.as_mut_slice().iter_mut().zip(noise.as_slice()) {
            *v += e;
        }
        let (r, rx1) = self.rx_dense.forward_cached(&x)?;
        let (_, rx2) = self.rx_out.forward_cached(&r)?;
        Ok(ForwardCache {
            tx1,
            tx2,
            norm,
            normalized,
            rx1,
            rx2,
        })
    }

    /// Gradient of the batch-mean cross-entropy against `targets`, using the
    /// fused softmax/cross-entropy gradient `(p − s)/B` at the logits.
    pub fn backward(&self, cache: &ForwardCache, targets: &Matrix) -> Result<Gradients> {
        let probs = cache.probabilities();
        if targets.shape() != probs.shape() {
            return Err(Error::Shape {
                context: "targets vs cached probabilities",
                left_rows: targets.rows(),
                left_cols: targets.cols(),
                right_rows: probs.rows(),
                right_cols: probs.cols(),
            });
        }
        let inv_batch = 1.0 / targets.rows() as f64;
        let mut grad_logits = probs.clone();
        for (g, s) in grad_logits
            .as_mut_slice()
            .iter_mut()
            .zip(targets.as_slice())
        {
            *g = (*g - s) * inv_batch;
        }
        let (g_r, rx_out) = self
            .rx_out
            .backward_preactivation(&cache.rx2, &grad_logits)?;
        let (mut g_x, rx_dense) = self.rx_dense.backward(&cache.rx1, &g_r)?;
        if self.strict_power {
            // x = √n·v/‖v‖  ⇒  dv = √n/‖v‖ · (dx − v̂⟨v̂, dx⟩)
            let scale = (g_x.cols() as f64).sqrt();
            for r in 0..g_x.rows() {
                let v = cache.normalized.row(r);
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let g = g_x.row_mut(r);
                let proj: f64 =
                    v.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / (norm * norm);
                for (gi, vi) in g.iter_mut().zip(v) {
                    *gi = scale / norm * (*gi - vi * proj);
                }
            }
        }
        let (g_z, norm) = self.norm.backward(&cache.norm, &g_x)?;
        let (g_h, tx_dense2) = self.tx_dense2.backward(&cache.tx2, &g_z)?;
        let (_, tx_dense1) = self.tx_dense1.backward(&cache.tx1, &g_h)?;
        Ok(Gradients {
            tx_dense1,
            tx_dense2,
            norm,
            rx_dense,
            rx_out,
        })
    }

    /// Inference pass from message vectors to probabilities with no noise.
    pub fn reconstruct(&self, messages: &Matrix) -> Result<Matrix> {
        self.receive(&self.transmit_infer(messages)?)
    }

    /// Fraction of codewords recovered exactly over a noiseless channel.
    pub fn noiseless_accuracy(&self, codec: &GdrCodec) -> Result<f64> {
        let book = codebook(codec)?;
        let probs = self.reconstruct(&book)?;
        let mut correct = 0u64;
        for (s, p) in probs.iter_rows().enumerate() {
            if codec.decode(p)? == Decoded::Message(s as u64) {
                correct += 1;
            }
        }
        Ok(correct as f64 / codec.num_messages() as f64)
    }

    /// Mean square of each transmitted dimension over the whole codebook in
    /// inference mode. A unit power constraint corresponds to values near 1.
    pub fn power_per_dimension(&self, codec: &GdrCodec) -> Result<Vec<f64>> {
        let x = self.transmit_infer(&codebook(codec)?)?;
        let rows = x.rows() as f64;
        let mut power = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (p, v) in power.iter_mut().zip(row) {
                *p += v * v;
            }
        }
        Ok(power.into_iter().map(|p| p / rows).collect())
    }
}

/// All encoded messages of `codec`, one row per message index.
pub fn codebook(codec: &GdrCodec) -> Result<Matrix> {
    let rows = codec.num_messages() as usize;
    let mut book = Matrix::zeros(rows, codec.vector_size());
    for s in 0..rows {
        codec.encode_into(s as u64, book.row_mut(s))?;
    }
    Ok(book)
}
