//! Joint channel estimation, equalization and decoding of coded single-carrier
//! block transmissions over frequency-selective channels observed through
//! few-bit ADCs.
//!
//! The main receiver is a scalar-variance bilinear message-passing equalizer
//! ([`pbigamp`]) whose per-iteration cost is a handful of M-point FFTs. It is
//! wrapped in a turbo loop ([`turbo`]) with a sum-product LDPC decoder
//! ([`coding`]). [`benchmarks`] holds the Golay-correlation channel estimator,
//! the exact and fast LMMSE soft equalizers, and the Bussgang linearization.
//! [`harness`] drives Monte-Carlo BER/NMSE sweeps.

pub mod benchmarks;
pub mod channel;
pub mod coding;
pub mod denoisers;
mod error;
pub mod fft;
pub mod frame;
pub mod harness;
pub mod kv;
pub mod math;
pub mod pbigamp;
pub mod quantizer;
pub mod turbo;

pub use error::{Error, Result};
pub use num_complex::Complex64;
