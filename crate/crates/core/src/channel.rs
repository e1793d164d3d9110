//! Superposed training-phase observation `y = H s + w` at the gateway.
//!
//! Every active device sends the same constant-amplitude training word over a
//! unit-gain channel, so the noiseless received level is `N * A` and the
//! observation is that level plus white Gaussian noise.

use crate::stats::{standard_normal_draw, RngStream};
use crate::{Error, Result};

/// Channel gain between every device and the gateway.
pub const CHANNEL_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    sequence_length: usize,
    noise_variance: f64,
    amplitude: f64,
}

impl TrainingConfig {
    pub fn new(sequence_length: usize, noise_variance: f64, amplitude: f64) -> Result<Self> {
        if sequence_length == 0 {
            return Err(Error::InvalidConfig("training length must be at least 1".into()));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive and finite, got {noise_variance}"
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "symbol amplitude must be positive and finite, got {amplitude}"
            )));
        }
        Ok(TrainingConfig {
            sequence_length,
            noise_variance,
            amplitude,
        })
    }

    /// Configuration whose per-device training-word energy to noise ratio
    /// `L * A^2 / sigma^2` equals `snr_db`.
    pub fn from_snr_db(sequence_length: usize, snr_db: f64, amplitude: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
        }
        let ratio = 10f64.powf(snr_db / 10.0);
        let noise_variance = sequence_length as f64 * amplitude * amplitude / ratio;
        Self::new(sequence_length, noise_variance, amplitude)
    }

    pub fn sequence_length(&self) -> usize {
        self.sequence_length
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.sequence_length as f64 * self.amplitude * self.amplitude / self.noise_variance)
            .log10()
    }

    /// Standard deviation of the sample-mean statistic, `sqrt(sigma^2 / L)`.
    pub fn statistic_std(&self) -> f64 {
        (self.noise_variance / self.sequence_length as f64).sqrt()
    }

    /// Mean shift between adjacent hypotheses in units of
    /// [`statistic_std`](Self::statistic_std): `A h sqrt(L / sigma^2)`.
    pub fn separation(&self) -> f64 {
        self.amplitude * CHANNEL_GAIN / self.statistic_std()
    }
}

/// Training observation as seen by the gateway, tagged with the true count
/// for scoring only.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedTraining {
    samples: Vec<f64>,
    true_active_count: usize,
}

impl ReceivedTraining {
    pub fn new(samples: Vec<f64>, true_active_count: usize) -> Result<Self> {
        if let Some(&bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite training sample {bad}")));
        }
        Ok(ReceivedTraining {
            samples,
            true_active_count,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn true_active_count(&self) -> usize {
        self.true_active_count
    }
}

/// Training word sent by `device_index`. All devices use the same
/// constant word at the same power.
pub fn training_sequence(_device_index: usize, cfg: &TrainingConfig) -> Vec<f64> {
    vec![cfg.amplitude; cfg.sequence_length]
}

/// Draws the superposed observation of `active_count` devices.
pub fn superpose(active_count: usize, cfg: &TrainingConfig, rng: &mut RngStream) -> ReceivedTraining {
    // Sum over n of h * s_n[l]; the words are identical constants.
    let level = active_count as f64 * cfg.amplitude * CHANNEL_GAIN;
    let sigma = cfg.noise_variance.sqrt();
    let samples = (0..cfg.sequence_length)
        .map(|_| level + sigma * standard_normal_draw(rng))
        .collect();
    ReceivedTraining {
        samples,
        true_active_count: active_count,
    }
}
