use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with batch statistics and update the running averages.
    Train,
    /// Fixed affine map from the running statistics.
    Infer,
}

/// Per-feature batch normalization with trainable scale `gamma` and shift
/// `beta`. Running statistics follow
/// `running ← momentum · running + (1 − momentum) · batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    /// Normalized input before scale and shift.
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(features: usize) -> Self {
        Self::with_constants(features, DEFAULT_MOMENTUM, DEFAULT_EPSILON)
    }

    pub fn with_constants(features: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            epsilon,
        }
    }

    #[inline]
    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Running statistics are not trainable and are not counted.
    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn check_width(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.features() {
            return Err(Error::Shape {
                context: "batchnorm_forward (batch vs features)",
                left_rows: batch.rows(),
                left_cols: batch.cols(),
                right_rows: 1,
                right_cols: self.features(),
            });
        }
        Ok(())
    }

    /// Inference-mode forward; never mutates the layer.
    pub fn forward_infer(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_width(batch)?;
        let scale: Vec<f64> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(g, v)| g / (v + self.epsilon).sqrt())
            .collect();
        let mut out = batch.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[j]) * scale[j] + self.beta[j];
            }
        }
        Ok(out)
    }

    /// Training-mode forward: normalizes by the biased batch variance and
    /// updates the running statistics.
    pub fn forward_train(&mut self, batch: &Matrix) -> Result<(Matrix, BatchNormCache)> {
        self.check_width(batch)?;
        let rows = batch.rows();
        if rows < 2 {
            return Err(Error::BatchTooSmall(rows));
        }
        let n = rows as f64;
        let mean = batch.column_means();
        let mut var = vec![0.0; self.features()];
        for row in batch.iter_rows() {
            for ((acc, x), mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = x - mu;
                *acc += d * d;
            }
        }
        for v in &mut var {
            *v /= n;
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();

        let mut normalized = batch.clone();
        for r in 0..rows {
            for (j, v) in normalized.row_mut(r).iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let mut out = normalized.clone();
        for r in 0..rows {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.gamma[j] + self.beta[j];
            }
        }

        let keep = self.momentum;
        for j in 0..self.features() {
            self.running_mean[j] = keep * self.running_mean[j] + (1.0 - keep) * mean[j];
            self.running_var[j] = keep * self.running_var[j] + (1.0 - keep) * var[j];
        }
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
            },
        ))
    }

    pub fn forward(&mut self, batch: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Train => self.forward_train(batch).map(|(out, _)| out),
            Mode::Infer => self.forward_infer(batch),
        }
    }

    /// Gradient through a training-mode forward pass, where the batch mean
    /// and variance depend on every input row.
    pub fn backward(
        &self,
        cache: &BatchNormCache,
        grad_output: &Matrix,
    ) -> Result<(Matrix, BatchNormGrads)> {
        if grad_output.shape() != cache.normalized.shape() {
            return Err(Error::Shape {
                context: "batchnorm_backward (gradient vs cache)",
                left_rows: grad_output.rows(),
                left_cols: grad_output.cols(),
                right_rows: cache.normalized.rows(),
                right_cols: cache.normalized.cols(),
            });
        }
        let features = self.features();
        let n = grad_output.rows() as f64;
        let mut beta = vec![0.0; features];
        let mut gamma = vec![0.0; features];
        for (g, xh) in grad_output.iter_rows().zip(cache.normalized.iter_rows()) {
            for j in 0..features {
                beta[j] += g[j];
                gamma[j] += g[j] * xh[j];
            }
        }
        // dx = γ·inv_std/B · (B·dy − Σdy − x̂·Σ(dy·x̂))
        let mut grad_input = grad_output.clone();
        for r in 0..grad_input.rows() {
            let xh = cache.normalized.row(r);
            for (j, v) in grad_input.row_mut(r).iter_mut().enumerate() {
                *v = self.gamma[j] * cache.inv_std[j] / n * (n * *v - beta[j] - xh[j] * gamma[j]);
            }
        }
        Ok((grad_input, BatchNormGrads { gamma, beta }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column_moments(m: &Matrix) -> Vec<(f64, f64)> {
        let n = m.rows() as f64;
        (0..m.cols())
            .map(|j| {
                let mean = (0..m.rows()).map(|r| m[(r, j)]).sum::<f64>() / n;
                let var = (0..m.rows())
                    .map(|r| (m[(r, j)] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                (mean, var)
            })
            .collect()
    }

    #[test]
    fn zero_variance_column_maps_to_zero() {
        let mut bn = BatchNormLayer::new(2);
        let batch = Matrix::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let out = bn.forward(&batch, Mode::Train).unwrap();
        for r in 0..3 {
            assert_eq!(out[(r, 0)], 0.0);
        }
    }

    #[test]
    fn standardized_input_is_nearly_unchanged() {
        let mut bn = BatchNormLayer::new(1);
        let out = bn
            .forward(&Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(), Mode::Train)
            .unwrap();
        let expected = 1.0 / (1.0 + bn.epsilon).sqrt();
        assert!((out[(0, 0)] - expected).abs() < 1e-15);
        assert!((out[(1, 0)] + expected).abs() < 1e-15);
    }

    #[test]
    fn train_mode_standardizes_random_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..45 * 7).map(|_| rng.random_range(-4.0..9.0)).collect();
        let batch = Matrix::from_vec(45, 7, data).unwrap();
        // epsilon this small keeps var/(var+eps) within 1e-9 of one
        let mut bn = BatchNormLayer::with_constants(7, 0.99, 1e-12);
        let (_, cache) = bn.forward_train(&batch).unwrap();
        for (mean, var) in column_moments(&cache.normalized) {
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_row_rejected_in_train_mode() {
        let mut bn = BatchNormLayer::new(3);
        let err = bn.forward(&Matrix::zeros(1, 3), Mode::Train).unwrap_err();
        assert!(matches!(err, Error::BatchTooSmall(1)));
        assert!(bn.forward(&Matrix::zeros(1, 3), Mode::Infer).is_ok());
    }

    #[test]
    fn running_statistics_track_batches() {
        let mut bn = BatchNormLayer::with_constants(1, 0.5, 1e-3);
        let batch = Matrix::from_rows(&[[2.0], [4.0]]).unwrap();
        bn.forward(&batch, Mode::Train).unwrap();
        assert_eq!(bn.running_mean, vec![1.5]);
        assert_eq!(bn.running_var, vec![1.0]);
        assert!(bn.running_var.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn infer_mode_is_affine() {
        let mut bn = BatchNormLayer::new(2);
        bn.gamma = vec![2.0, 0.5];
        bn.beta = vec![0.1, -0.3];
        bn.running_mean = vec![1.0, -1.0];
        bn.running_var = vec![4.0, 0.25];
        let x = Matrix::from_rows(&[[3.0, 0.0], [1.0, -1.0]]).unwrap();
        let y = bn.forward_infer(&x).unwrap();
        let s0 = 2.0 / (4.0 + bn.epsilon).sqrt();
        assert!((y[(0, 0)] - (2.0 * s0 + 0.1)).abs() < 1e-15);
        assert!((y[(1, 1)] - -0.3).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..6 * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = Matrix::from_vec(6, 3, data).unwrap();
        let weights: Vec<f64> = (0..6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut bn = BatchNormLayer::new(3);
        bn.gamma = vec![1.3, 0.7, -0.4];
        bn.beta = vec![0.2, 0.0, 0.5];
        let objective = |layer: &BatchNormLayer, input: &Matrix| -> f64 {
            let mut l = layer.clone();
            let (y, _) = l.forward_train(input).unwrap();
            y.as_slice().iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let mut probe = bn.clone();
        let (_, cache) = probe.forward_train(&x).unwrap();
        let g = Matrix::from_vec(6, 3, weights.clone()).unwrap();
        let (dx, grads) = bn.backward(&cache, &g).unwrap();
        let h = 1e-6;
        for i in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[i] -= h;
            let fd = (objective(&bn, &xp) - objective(&bn, &xm)) / (2.0 * h);
            assert!(
                (fd - dx.as_slice()[i]).abs() < 1e-7,
                "dx[{i}]: {fd} vs {}",
                dx.as_slice()[i]
            );
        }
        for j in 0..3 {
            let mut p = bn.clone();
            p.gamma[j] += h;
            let mut m = bn.clone();
            m.gamma[j] -= h;
            let fd = (objective(&p, &x) - objective(&m, &x)) / (2.0 * h);
            assert!((fd - grads.gamma[j]).abs() < 1e-7);
        }
    }
}
