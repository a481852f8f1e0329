//! A deliberately small dense-network kernel: row-major matrices, dense and
//! batch-normalization layers, softmax with categorical cross-entropy, and
//! Adam. Batches are matrices with one sample per row.

mod adam;
mod batchnorm;
mod dense;
mod loss;
mod matrix;

pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNormCache, BatchNormGrads, BatchNormLayer, Mode};
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use loss::{
    cross_entropy, mean_cross_entropy, softmax, softmax_inplace, CrossEntropy, PROB_FLOOR,
};
pub use matrix::Matrix;
