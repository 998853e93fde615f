use crate::quantizer::{gaussian_distortion, Bits, QuantizerSpec};
use crate::{Error, Result};

/// Linear-gain-plus-uncorrelated-noise description of the ADC:
/// `y = (1 - eta) u + e`, with the total effective noise variance
/// `(1 - eta) (eta sigma_x^2 E||h||^2 + sigma_w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BussgangParams {
    pub eta: f64,
    pub eff_noise_var: f64,
}

impl BussgangParams {
    pub fn gain(&self) -> f64 {
        1.0 - self.eta
    }

    /// Noise variance seen after dividing the output by the gain.
    pub fn normalized_noise_var(&self) -> f64 {
        self.eff_noise_var / (self.gain() * self.gain())
    }
}

/// Normalized distortion `E|u - Q(u)|^2 / E|u|^2` for a circular Gaussian
/// input of total power `input_power`.
pub fn compute_eta(qspec: &QuantizerSpec, input_power: f64) -> Result<f64> {
    if !(input_power > 0.0) {
        return Err(Error::invalid(format!("input power must be positive, got {input_power}")));
    }
    let Bits::Finite(b) = qspec.bits else {
        return Ok(0.0);
    };
    let sd = (input_power / 2.0).sqrt();
    Ok(0.5 * (gaussian_distortion(b, qspec.delta_re / sd) + gaussian_distortion(b, qspec.delta_im / sd)))
}

pub fn bussgang_params(eta: f64, symbol_var: f64, channel_energy: f64, noise_var: f64) -> Result<BussgangParams> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta {eta} outside [0, 1)")));
    }
    if symbol_var < 0.0 || channel_energy < 0.0 || noise_var < 0.0 {
        return Err(Error::invalid("powers must be non-negative"));
    }
    Ok(BussgangParams {
        eta,
        eff_noise_var: (1.0 - eta) * (eta * symbol_var * channel_energy + noise_var),
    })
}
