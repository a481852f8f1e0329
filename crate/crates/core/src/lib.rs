//! End-to-end learned communication over an AWGN channel.
//!
//! A transmitter network maps an m-hot message vector to `n` real channel
//! symbols, the channel adds Gaussian noise, and a receiver network returns
//! a probability vector from which the `m` most likely positions identify
//! the message. The crate contains everything needed to train the pair and
//! to measure it:
//!
//! - [`nn`]: dense and batch-normalization layers, softmax cross-entropy,
//!   analytic gradients and Adam.
//! - [`codec`]: the m-hot message representation, its rate and capacity.
//! - [`channel`]: noise variance, AWGN and seeded random streams.
//! - [`autoencoder`]: the network, its training loop and model files.
//! - [`analysis`]: BLER sweeps, trained-SNR studies, capacity tables and
//!   log-normal moment analysis.
//! - [`report`]: deterministic CSV output.
//!
//! ```
//! use gdr_ae::codec::GdrCodec;
//!
//! let codec = GdrCodec::new(8, 4, 7)?;
//! assert_eq!(codec.num_messages(), 64);
//! assert_eq!(codec.data_rate(), 6.0 / 7.0);
//! # Ok::<(), gdr_ae::Error>(())
//! ```

pub mod analysis;
pub mod autoencoder;
pub mod channel;
pub mod codec;
mod error;
pub mod nn;
pub mod report;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/codec.md")]
    mod codec {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
}
