//! Moments of the receiver's linear stage under channel noise.
//!
//! For `u = A(x + n)` with `n ~ N(0, σ² I)`, each `uᵢ` is normal with mean
//! `aᵢ·x` and variance `σ²‖aᵢ‖²`, so `e^{uᵢ}` is log-normal with
//!
//! ```text
//! E[e^{uᵢ}] = exp(aᵢ·x + σ²‖aᵢ‖²/2)
//! D[e^{uᵢ}] = (exp(σ²‖aᵢ‖²) − 1) · exp(2 aᵢ·x + σ²‖aᵢ‖²)
//! ```
//!
//! A trained receiver layer also has a bias and a ReLU; building a
//! [`LinearReceiverMap`] from it keeps only the weight matrix.

use crate::channel::RngStream;
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Matrix};

pub const MIN_MC_SAMPLES: usize = 10_000;

/// The linear map `A` (`M × n`), one row `aᵢ` per output element.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReceiverMap {
    pub a: Matrix,
}

impl LinearReceiverMap {
    pub fn new(a: Matrix) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidInput(
                "receiver map has non-finite entries".into(),
            ));
        }
        Ok(Self { a })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: Matrix::identity(n),
        }
    }

    /// The weight matrix of a dense layer, ignoring its bias and activation.
    pub fn from_dense(layer: &DenseLayer) -> Self {
        Self {
            a: layer.weights.clone(),
        }
    }

    pub fn outputs(&self) -> usize {
        self.a.rows()
    }

    pub fn inputs(&self) -> usize {
        self.a.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementMoments {
    pub e_u: f64,
    pub d_u: f64,
    pub e_exp: f64,
    pub d_exp: f64,
    pub emp_e_exp: Option<f64>,
    pub emp_d_exp: Option<f64>,
    /// Monte Carlo draws where `e^{uᵢ}` overflowed and were left out.
    pub overflowed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub elements: Vec<ElementMoments>,
    /// Monte Carlo sample count, when the empirical columns were computed.
    pub samples: Option<usize>,
}

fn check(map: &LinearReceiverMap, x: &[f64], sigma2: f64) -> Result<()> {
    if x.len() != map.inputs() {
        return Err(Error::InvalidInput(format!(
            "signal has {} entries, receiver map expects n={}",
            x.len(),
            map.inputs()
        )));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    Ok(())
}

/// Closed-form normal and log-normal moments for every output element.
pub fn snr_moments(map: &LinearReceiverMap, x: &[f64], sigma2: f64) -> Result<MomentReport> {
    check(map, x, sigma2)?;
    let elements = map
        .a
        .iter_rows()
        .map(|row| {
            let mean: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let var = sigma2 * row.iter().map(|a| a * a).sum::<f64>();
            ElementMoments {
                e_u: mean,
                d_u: var,
                e_exp: (mean + var / 2.0).exp(),
                d_exp: var.exp_m1() * (2.0 * mean + var).exp(),
                emp_e_exp: None,
                emp_d_exp: None,
                overflowed: 0,
            }
        })
        .collect();
    Ok(MomentReport {
        elements,
        samples: None,
    })
}

/// Closed-form moments plus Monte Carlo estimates of the mean and (sample)
/// variance of `e^{uᵢ}` over `samples` noise draws.
pub fn snr_moments_mc(
    map: &LinearReceiverMap,
    x: &[f64],
    sigma2: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<MomentReport> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let mut report = snr_moments(map, x, sigma2)?;
    let outputs = map.outputs();
    let sigma = sigma2.sqrt();
    // Welford accumulators per element
    let mut count = vec![0u64; outputs];
    let mut mean = vec![0.0; outputs];
    let mut m2 = vec![0.0; outputs];
    let mut overflowed = vec![0u64; outputs];
    let mut received = vec![0.0; x.len()];
    for _ in 0..samples {
        for (r, &xi) in received.iter_mut().zip(x) {
            *r = if sigma2 == 0.0 {
                xi
            } else {
                xi + sigma * rng.gaussian()
            };
        }
        for (i, row) in map.a.iter_rows().enumerate() {
            let u: f64 = row.iter().zip(&received).map(|(a, b)| a * b).sum();
            let v = u.exp();
            if !v.is_finite() {
                overflowed[i] += 1;
                continue;
            }
            count[i] += 1;
            let delta = v - mean[i];
            mean[i] += delta / count[i] as f64;
            m2[i] += delta * (v - mean[i]);
        }
    }
    for (i, e) in report.elements.iter_mut().enumerate() {
        e.overflowed = overflowed[i];
        if count[i] >= 2 {
            e.emp_e_exp = Some(mean[i]);
            e.emp_d_exp = Some(m2[i] / (count[i] - 1) as f64);
        }
    }
    report.samples = Some(samples);
    Ok(report)
}
