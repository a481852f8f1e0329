//! Experiments: BLER sweeps, trained-SNR studies, capacity tables and the
//! log-normal moment analysis of the receiver's linear stage.

mod bler;
mod moments;

pub use bler::{bler_sweep, BlerRecord, SweepConfig, MIN_BLOCKS_PER_POINT};
pub use moments::{
    snr_moments, snr_moments_mc, ElementMoments, LinearReceiverMap, MomentReport, MIN_MC_SAMPLES,
};

use rayon::prelude::*;

use crate::autoencoder::{train, Autoencoder, LossHistory, TrainingConfig};
use crate::codec::GdrCodec;
use crate::error::{Error, Result};

/// Inclusive dB grid `min, min+step, …` up to `max` (with a small slack for
/// floating-point accumulation). Points are computed as `min + i·step`.
pub fn db_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && min.is_finite() && max.is_finite()) {
        return Err(Error::Domain(format!(
            "grid needs finite bounds and a positive step, got {min}..{max} step {step}"
        )));
    }
    if max < min {
        return Err(Error::Domain(format!(
            "grid is empty: max {max} < min {min}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Capacity of `codec` at every grid point, in grid order.
pub fn capacity_table(codec: &GdrCodec, grid_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid_db.is_empty() {
        return Err(Error::Domain("capacity grid is empty".into()));
    }
    grid_db
        .iter()
        .map(|&db| Ok((db, codec.capacity_db(db)?)))
        .collect()
}

/// Trains one freshly built model per trained Eb/N0, all from the same seed
/// (hence identical initial weights and data), and returns each history.
/// `jobs` bounds the number of models trained concurrently; results do not
/// depend on it.
pub fn trained_snr_study(
    codec: &GdrCodec,
    trained_ebn0_db: &[f64],
    config: &TrainingConfig,
    jobs: usize,
) -> Result<Vec<(f64, LossHistory)>> {
    if trained_ebn0_db.is_empty() {
        return Err(Error::Domain("trained Eb/N0 list is empty".into()));
    }
    let run = |&snr: &f64| -> Result<(f64, LossHistory)> {
        let mut model = Autoencoder::build(codec.vector_size(), codec.channel_uses(), config.seed)?;
        let cfg = TrainingConfig {
            trained_ebn0_db: snr,
            ..config.clone()
        };
        Ok((snr, train(&mut model, codec, &cfg)?))
    };
    if jobs <= 1 {
        return trained_ebn0_db.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    pool.install(|| trained_ebn0_db.par_iter().map(run).collect())
}
