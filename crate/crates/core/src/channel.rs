//! Real-valued AWGN channel and the seeded random streams every stochastic
//! step draws from.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-dimension noise variance `σ² = 1 / (2·R·Eb/N0)`.
pub fn noise_variance(rate: f64, ebn0_db: f64) -> Result<f64> {
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Domain(format!(
            "data rate must be positive, got {rate}"
        )));
    }
    Ok(1.0 / (2.0 * rate * db_to_linear(ebn0_db)))
}

/// Operating point of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub ebn0_db: f64,
    pub rate: f64,
    pub sigma2: f64,
}

impl ChannelSpec {
    pub fn new(rate: f64, ebn0_db: f64) -> Result<Self> {
        Ok(Self {
            ebn0_db,
            rate,
            sigma2: noise_variance(rate, ebn0_db)?,
        })
    }
}

/// Well-known stream ids. Sweep points and workers use
/// [`streams::POINT_BASE`] plus their index.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const TRAIN_MESSAGES: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const TRAIN_NOISE: u64 = 3;
    pub const MOMENTS: u64 = 4;
    pub const POINT_BASE: u64 = 1 << 20;
}

/// A reproducible random stream identified by `(seed, stream id)`.
///
/// Distinct stream ids under one seed select independent ChaCha8 streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Adds i.i.d. `N(0, σ²)` noise to every entry of `signal` in place.
pub fn awgn_inplace(signal: &mut [f64], sigma2: f64, rng: &mut RngStream) {
    if sigma2 == 0.0 {
        return;
    }
    let sigma = sigma2.sqrt();
    for v in signal {
        *v += sigma * rng.gaussian();
    }
}

/// `y = x + n` with `n ~ N(0, σ² I)`.
pub fn awgn(x: &[f64], sigma2: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be finite and >= 0, got {sigma2}"
        )));
    }
    let mut y = x.to_vec();
    awgn_inplace(&mut y, sigma2, rng);
    Ok(y)
}
