use num_complex::Complex64;

use super::BussgangParams;
use crate::frame::{pilot_block, FrameSpec};
use crate::pbigamp::{scale_channel, ScaleTarget};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GolayEstimate {
    pub hhat: Vec<Complex64>,
    /// Per-tap error variance implied by the effective noise.
    pub hvar: f64,
}

/// Correlation channel estimate from the pilot columns of the reconstructed
/// observations `y` (`M x K`, column-major).
///
/// Each pilot block is built from complementary sequences whose periodic
/// autocorrelation vanishes for lags below `M/4`, so the circular
/// cross-correlation of a received pilot block with the transmitted one,
/// divided by `M`, returns the taps exactly when `L <= N_C`. The blocks are
/// averaged and the result is divided by the linear gain of the ADC.
pub fn golay_channel_estimate(
    y: &[Complex64],
    spec: &FrameSpec,
    taps: usize,
    bussgang: &BussgangParams,
    scale: Option<&ScaleTarget>,
) -> Result<GolayEstimate> {
    let m = spec.m;
    if spec.k_p == 0 {
        return Err(Error::invalid("frame has no pilot blocks"));
    }
    if y.len() < spec.k_p * m {
        return Err(Error::Dimension {
            what: "observations",
            expected: spec.k() * m,
            got: y.len(),
        });
    }
    if taps == 0 || taps > m {
        return Err(Error::invalid(format!("cannot estimate {taps} taps from {m}-symbol blocks")));
    }
    let gain = bussgang.gain();
    let mut hhat = vec![Complex64::new(0.0, 0.0); taps];
    for k in 0..spec.k_p {
        let pilot = pilot_block(spec, k)?;
        let col = &y[k * m..(k + 1) * m];
        for (l, h) in hhat.iter_mut().enumerate() {
            let c: Complex64 = pilot
                .iter()
                .enumerate()
                .map(|(i, p)| col[(i + l) % m] * p.conj())
                .sum();
            *h += c;
        }
    }
    let norm = (spec.k_p * m) as f64 * gain;
    hhat.iter_mut().for_each(|h| *h /= norm);
    if let Some(target) = scale {
        scale_channel(&mut hhat, target, spec.k() * m);
    }
    Ok(GolayEstimate {
        hhat,
        hvar: bussgang.normalized_noise_var() / (spec.k_p * m) as f64,
    })
}
