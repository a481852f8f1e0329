use rand::Rng;
use rayon::prelude::*;

use crate::autoencoder::{codebook, Autoencoder};
use crate::channel::{awgn_inplace, noise_variance, streams, RngStream};
use crate::codec::{Decoded, GdrCodec};
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Blocks per inference batch inside one sweep point.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerRecord {
    pub ebn0_db: f64,
    pub blocks_sent: u64,
    pub block_errors: u64,
}

impl BlerRecord {
    pub fn bler(&self) -> f64 {
        self.block_errors as f64 / self.blocks_sent as f64
    }

    /// Wilson score interval at ~95% confidence.
    pub fn confidence_interval(&self) -> (f64, f64) {
        let z = 1.959_963_984_540_054;
        let n = self.blocks_sent as f64;
        let p = self.bler();
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
        let lower = if self.block_errors == 0 {
            0.0
        } else {
            (centre - half).max(0.0)
        };
        let upper = if self.block_errors == self.blocks_sent {
            1.0
        } else {
            (centre + half).min(1.0)
        };
        (lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid_db: Vec<f64>,
    pub blocks_per_point: u64,
    pub seed: u64,
    /// Replaces the Eb/N0-derived noise variance at every point.
    pub sigma2_override: Option<f64>,
    /// Worker threads; 1 runs the points sequentially. Results do not
    /// depend on this value.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid_db: (-4..=8).map(f64::from).collect(),
            blocks_per_point: 100_000,
            seed: 1,
            sigma2_override: None,
            jobs: 1,
        }
    }
}

pub const MIN_BLOCKS_PER_POINT: u64 = 1000;

/// Monte Carlo block error rate of a trained model at every grid point.
///
/// Point `i` draws its messages and noise from stream `POINT_BASE + i` of
/// the seed, so each point is reproducible on its own and the sweep gives
/// the same records at any job count. Decoding to a subset outside the
/// codebook counts as a block error.
pub fn bler_sweep(
    model: &Autoencoder,
    codec: &GdrCodec,
    config: &SweepConfig,
) -> Result<Vec<BlerRecord>> {
    if codec.vector_size() != model.vector_size() || codec.channel_uses() != model.channel_uses() {
        return Err(Error::InvalidInput(format!(
            "codec (M={}, n={}) does not match model (M={}, n={})",
            codec.vector_size(),
            codec.channel_uses(),
            model.vector_size(),
            model.channel_uses()
        )));
    }
    if !model.is_finite() {
        return Err(Error::State("model contains non-finite parameters".into()));
    }
    if config.blocks_per_point < MIN_BLOCKS_PER_POINT {
        return Err(Error::Domain(format!(
            "blocks per point must be at least {MIN_BLOCKS_PER_POINT}, got {}",
            config.blocks_per_point
        )));
    }
    if config.grid_db.is_empty() {
        return Err(Error::Domain("Eb/N0 grid is empty".into()));
    }
    if let Some(s) = config.sigma2_override {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Domain(format!(
                "noise variance override must be >= 0, got {s}"
            )));
        }
    }

    // Transmitted signal per codeword is fixed in inference mode.
    let signals = model.transmit_infer(&codebook(codec)?)?;
    let point = |(index, &ebn0_db): (usize, &f64)| -> Result<BlerRecord> {
        let sigma2 = match config.sigma2_override {
            Some(s) => s,
            None => noise_variance(codec.data_rate(), ebn0_db)?,
        };
        let mut rng = RngStream::new(config.seed, streams::POINT_BASE + index as u64);
        simulate_point(
            model,
            codec,
            &signals,
            sigma2,
            config.blocks_per_point,
            &mut rng,
        )
        .map(|block_errors| BlerRecord {
            ebn0_db,
            blocks_sent: config.blocks_per_point,
            block_errors,
        })
    };

    if config.jobs <= 1 {
        return config.grid_db.iter().enumerate().map(point).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    pool.install(|| config.grid_db.par_iter().enumerate().map(point).collect())
}

fn simulate_point(
    model: &Autoencoder,
    codec: &GdrCodec,
    signals: &Matrix,
    sigma2: f64,
    blocks: u64,
    rng: &mut RngStream,
) -> Result<u64> {
    let n = codec.channel_uses();
    let mut errors = 0u64;
    let mut remaining = blocks;
    let mut sent = Vec::with_capacity(CHUNK);
    while remaining > 0 {
        let rows = remaining.min(CHUNK as u64) as usize;
        remaining -= rows as u64;
        sent.clear();
        let mut received = Matrix::zeros(rows, n);
        for r in 0..rows {
            let s = rng.random_range(0..codec.num_messages());
            sent.push(s);
            let y = received.row_mut(r);
            y.copy_from_slice(signals.row(s as usize));
            awgn_inplace(y, sigma2, rng);
        }
        let probs = model.receive(&received)?;
        for (p, &s) in probs.iter_rows().zip(&sent) {
            if codec.decode(p)? != Decoded::Message(s) {
                errors += 1;
            }
        }
    }
    Ok(errors)
}
