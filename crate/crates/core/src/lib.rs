//! Signal-degradation and spectral-rank analysis toolkit for speech.
//!
//! The crate provides the non-neural machinery shared by speech denoising and
//! neural vocoding pipelines:
//!
//! - mono WAV I/O, resampling and peak normalization ([`audio`])
//! - forward/inverse STFT with least-squares overlap-add ([`stft`])
//! - mel filterbank construction and Moore-Penrose pseudo-inverse
//!   reconstruction ([`mel`])
//! - thresholded spectral-rank statistics for degraded-vs-clean spectra
//!   ([`rank`])
//! - additive-noise and mel-compression degradations ([`degrade`])
//! - proxy-phase generation (zero, random, Griffin-Lim) and time-domain
//!   synthesis ([`proxy_phase`])
//! - a deterministic joint denoising/vocoding batch generator with a
//!   self-describing binary tensor container ([`batch`], [`container`])
//! - desk-scale objective metrics: MCD, log-spectral distance, SI-SNR
//!   ([`metrics`])
//!
//! All numerics are `f64` in memory; batch tensor files store `float32`
//! little-endian payloads.

pub mod audio;
pub mod batch;
pub mod container;
pub mod degrade;
pub mod error;
pub mod mat;
pub mod mel;
pub mod metrics;
pub mod presets;
pub mod proxy_phase;
pub mod rank;
pub mod stft;
pub mod synth;

pub use error::{Error, Result};
pub use mat::Mat;
