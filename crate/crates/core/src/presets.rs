//! Named, immutable analysis presets.
//!
//! `fig2-16k` is the 16 kHz rank-analysis configuration: 512-point FFT with
//! a 32 ms (512-sample) periodic Hann window at 25% overlap (hop 384) and an
//! absolute rank threshold of 0.5, with 60- and 80-band mel options.
//!
//! `vocoder-24k` is the 24 kHz vocoder feature configuration: 1024-point FFT,
//! 1024-sample Hann window, hop 256, 80 mel bands. Its mel cutoff is capped
//! at the 12 kHz Nyquist; the full parameter set travels in provenance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mel::MelParams;
use crate::stft::{StftConfig, WindowKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub version: u32,
    pub sample_rate_hz: u32,
    pub stft: StftConfig,
    /// Default mel band count; alternatives the preset was designed around.
    pub n_mels_default: usize,
    pub n_mels_options: Vec<usize>,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Absolute singular-value threshold for rank statistics.
    pub eta: f64,
}

impl Preset {
    pub fn mel_params(&self, n_mels: usize) -> MelParams {
        MelParams::new(self.sample_rate_hz, self.stft.fft_size(), n_mels)
            .with_range(self.f_min_hz, self.f_max_hz)
    }
}

pub fn fig2_16k() -> Preset {
    Preset {
        name: "fig2-16k".into(),
        version: 1,
        sample_rate_hz: 16000,
        stft: StftConfig::new(512, 512, 384, WindowKind::Hann, true)
            .expect("preset config is valid"),
        n_mels_default: 80,
        n_mels_options: vec![60, 80],
        f_min_hz: 0.0,
        f_max_hz: 8000.0,
        eta: 0.5,
    }
}

pub fn vocoder_24k() -> Preset {
    Preset {
        name: "vocoder-24k".into(),
        version: 1,
        sample_rate_hz: 24000,
        stft: StftConfig::new(1024, 1024, 256, WindowKind::Hann, true)
            .expect("preset config is valid"),
        n_mels_default: 80,
        n_mels_options: vec![80],
        f_min_hz: 0.0,
        f_max_hz: 12000.0,
        eta: 0.5,
    }
}

pub fn all() -> Vec<Preset> {
    vec![fig2_16k(), vocoder_24k()]
}

pub fn by_name(name: &str) -> Result<Preset> {
    all().into_iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<String> = all().into_iter().map(|p| p.name).collect();
        Error::InvalidConfig(format!(
            "unknown preset {name:?}; known: {}",
            known.join(", ")
        ))
    })
}
