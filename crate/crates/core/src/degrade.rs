//! The two signal degradations: additive noise at a target SNR and mel
//! compression with pseudo-inverse reconstruction.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::mel::{self, MelFilterbank, MelSpectrogram};
use crate::stft::{magnitude, stft, MagnitudeSpectrogram, StftConfig};

/// Noise mixing parameters. `noise_gain_multiplier` scales the noise
/// amplitude after SNR gain computation: 1 is the mild condition, 5 the
/// heavy one (five times the noise magnitude, i.e. about 14 dB lower
/// effective SNR).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMixSpec {
    pub snr_db: f64,
    pub noise_gain_multiplier: f64,
}

impl NoiseMixSpec {
    pub fn new(snr_db: f64, noise_gain_multiplier: f64) -> Result<Self> {
        if !(noise_gain_multiplier > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise gain multiplier must be positive, got {noise_gain_multiplier}"
            )));
        }
        Ok(Self {
            snr_db,
            noise_gain_multiplier,
        })
    }

    pub fn mild(snr_db: f64) -> Self {
        Self {
            snr_db,
            noise_gain_multiplier: 1.0,
        }
    }

    pub fn heavy(snr_db: f64) -> Self {
        Self {
            snr_db,
            noise_gain_multiplier: 5.0,
        }
    }
}

/// Which degradation a pipeline applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationSpec {
    Denoising(NoiseMixSpec),
    Vocoding { n_mels: usize },
}

/// Fit the noise to the speech length: circular tiling with a random offset
/// when shorter, a random contiguous segment when longer.
fn fit_noise<R: Rng>(noise: &[f64], target_len: usize, rng: &mut R) -> Vec<f64> {
    if noise.len() == target_len {
        noise.to_vec()
    } else if noise.len() > target_len {
        let start = rng.gen_range(0..=noise.len() - target_len);
        noise[start..start + target_len].to_vec()
    } else {
        let offset = rng.gen_range(0..noise.len());
        (0..target_len)
            .map(|i| noise[(offset + i) % noise.len()])
            .collect()
    }
}

/// Mix `x = s + g * n'` with `g = sqrt(P_s / (P_n' 10^(snr/10))) * multiplier`,
/// powers measured as mean squared amplitude over the overlapping extent.
/// Returns the mixture and the applied gain for provenance. With multiplier 1
/// the measured SNR of the result equals `snr_db` up to rounding.
pub fn mix_at_snr<R: Rng>(
    s: &Waveform,
    n: &Waveform,
    spec: &NoiseMixSpec,
    rng: &mut R,
) -> Result<(Waveform, f64)> {
    if s.sample_rate_hz() != n.sample_rate_hz() {
        return Err(Error::SampleRateMismatch(
            s.sample_rate_hz(),
            n.sample_rate_hz(),
        ));
    }
    if s.is_empty() || n.is_empty() {
        return Err(Error::EmptyAudio);
    }
    if !(spec.noise_gain_multiplier > 0.0) {
        return Err(Error::InvalidConfig(
            "noise gain multiplier must be positive".into(),
        ));
    }
    let p_s = s.power();
    if p_s <= 0.0 {
        return Err(Error::ZeroEnergy("speech".into()));
    }
    let fitted = fit_noise(n.samples(), s.len(), rng);
    let p_n = fitted.iter().map(|v| v * v).sum::<f64>() / fitted.len() as f64;
    if p_n <= 0.0 {
        return Err(Error::ZeroEnergy("noise segment".into()));
    }
    let gain = (p_s / (p_n * 10f64.powf(spec.snr_db / 10.0))).sqrt() * spec.noise_gain_multiplier;
    let mixture: Vec<f64> = s
        .samples()
        .iter()
        .zip(fitted.iter())
        .map(|(si, ni)| si + gain * ni)
        .collect();
    Ok((Waveform::new(mixture, s.sample_rate_hz())?, gain))
}

/// `10 log10(sum s^2 / sum residual^2)`.
pub fn measured_snr(s: &Waveform, residual: &Waveform) -> Result<f64> {
    if s.len() != residual.len() {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} samples, residual {}",
            s.len(),
            residual.len()
        )));
    }
    let e_s: f64 = s.samples().iter().map(|v| v * v).sum();
    let e_r: f64 = residual.samples().iter().map(|v| v * v).sum();
    if e_s <= 0.0 || e_r <= 0.0 {
        return Err(Error::ZeroEnergy("snr measurement".into()));
    }
    Ok(10.0 * (e_s / e_r).log10())
}

/// Mel-compress and reconstruct: returns the clamped linear-scale
/// reconstruction and the mel spectrogram it came from.
pub fn vocoding_degrade(
    s: &Waveform,
    bank: &Arc<MelFilterbank>,
    cfg: &StftConfig,
) -> Result<(MagnitudeSpectrogram, MelSpectrogram)> {
    let mag = magnitude(&stft(s, cfg)?);
    let mel_spec = mel::linear_to_mel(&mag, bank)?;
    let y_hat = mel::mel_to_linear_pinv(&mel_spec)?;
    Ok((y_hat, mel_spec))
}
