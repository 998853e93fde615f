//! Reference receivers: pilot-correlation channel estimation, linear MMSE
//! soft equalization, and the linearized ADC model they rely on.

mod bussgang;
mod golay;
mod lmmse;

pub use bussgang::{bussgang_params, compute_eta, BussgangParams};
pub use golay::{golay_channel_estimate, GolayEstimate};
pub use lmmse::{lmmse_equalize_exact, lmmse_equalize_fast, LmmseOutput};
