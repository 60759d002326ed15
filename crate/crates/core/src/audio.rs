//! Mono audio loading, saving, resampling and normalization.
//!
//! Everything downstream operates on [`Waveform`]: finite `f64` samples in a
//! nominal `[-1, 1]` range plus a sample rate. Integer PCM is scaled by
//! `2^(bits-1)` on load; multi-channel files are averaged to mono.

use std::path::Path;

use crate::error::{Error, Result};

/// Mono waveform with sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

/// Output encodings supported by [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl Waveform {
    /// Validates that the rate is positive and every sample is finite.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSignal);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean squared amplitude over the whole clip.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

/// Load a RIFF/WAVE file as a mono waveform.
///
/// PCM-16/24/32 samples are divided by `2^(bits-1)`; IEEE float is taken
/// as-is. Multi-channel audio is averaged to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedWav("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|source| Error::Wav {
                path: path.to_path_buf(),
                source,
            })?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|source| Error::Wav {
                    path: path.to_path_buf(),
                    source,
                })?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedWav(format!("{fmt:?} at {bits} bits")));
        }
    };

    if interleaved.is_empty() {
        return Err(Error::EmptyAudio);
    }

    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
            .collect()
    };

    Waveform::new(mono, spec.sample_rate)
}

/// Write a mono waveform to a WAV file.
///
/// `Pcm16` clips to `[-1, 32767/32768]` before quantizing; `Float32` is
/// lossless up to the f64→f32 cast.
pub fn save_wav(w: &Waveform, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    if w.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    let write_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    match encoding {
        WavEncoding::Pcm16 => {
            let max_code = i16::MAX as f64 / 32768.0;
            for &s in w.samples() {
                let clipped = s.clamp(-1.0, max_code);
                let code = (clipped * 32768.0).round() as i16;
                writer.write_sample(code).map_err(write_err)?;
            }
        }
        WavEncoding::Float32 => {
            for &s in w.samples() {
                writer.write_sample(s as f32).map_err(write_err)?;
            }
        }
    }
    writer.finalize().map_err(write_err)
}

/// Linear-interpolation resampler.
///
/// Output position `i` reads source position `i * source_rate / target_rate`,
/// clamped to the last sample (edge hold). This is a low-fidelity utility;
/// the rank statistics this crate computes are insensitive to interpolation
/// quality.
pub fn resample_linear(w: &Waveform, target_rate_hz: u32) -> Result<Waveform> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidConfig("target rate must be positive".into()));
    }
    if target_rate_hz == w.sample_rate_hz() || w.is_empty() {
        return Waveform::new(w.samples().to_vec(), target_rate_hz);
    }
    let src = w.samples();
    let ratio = w.sample_rate_hz() as f64 / target_rate_hz as f64;
    let out_len =
        (src.len() as f64 * target_rate_hz as f64 / w.sample_rate_hz() as f64).round() as usize;
    let mut out = Vec::with_capacity(out_len);
    let last = src.len() - 1;
    for i in 0..out_len {
        let pos = i as f64 * ratio;
        let i0 = (pos.floor() as usize).min(last);
        let frac = pos - i0 as f64;
        let v = if i0 >= last {
            src[last]
        } else {
            src[i0] * (1.0 - frac) + src[i0 + 1] * frac
        };
        out.push(v);
    }
    Waveform::new(out, target_rate_hz)
}

/// Scale so the maximum absolute sample equals `peak`.
pub fn peak_normalize(w: &Waveform, peak: f64) -> Result<Waveform> {
    if !(peak > 0.0 && peak <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "peak must be in (0, 1], got {peak}"
        )));
    }
    let max_abs = w.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if max_abs == 0.0 {
        return Err(Error::AllZeroSignal);
    }
    let scale = peak / max_abs;
    Waveform::new(
        w.samples().iter().map(|s| s * scale).collect(),
        w.sample_rate_hz(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_raw_pcm16(path: &Path, rate: u32, channels: u16, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_scaling_divides_by_two_pow_15() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("half.wav");
        write_raw_pcm16(&path, 16000, 1, &[16384]);
        let w = load_wav(&path).unwrap();
        assert_eq!(w.samples(), &[0.5]);
        assert_eq!(w.sample_rate_hz(), 16000);
    }

    #[test]
    fn zeros_stay_zero() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("zeros.wav");
        write_raw_pcm16(&path, 16000, 1, &[0; 64]);
        let w = load_wav(&path).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
        assert_eq!(w.sample_rate_hz(), 16000);
    }

    #[test]
    fn stereo_averages_to_mono() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        write_raw_pcm16(&path, 8000, 2, &[16384, -16384, 16384, 16384]);
        let w = load_wav(&path).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5]);
    }

    #[test]
    fn float32_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let w = Waveform::new(vec![0.0, 0.5], 16000).unwrap();
        save_wav(&w, &path, WavEncoding::Float32).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.samples(), &[0.0, 0.5]);
    }

    #[test]
    fn pcm16_clips_out_of_range() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("clip.wav");
        let w = Waveform::new(vec![1.5], 16000).unwrap();
        save_wav(&w, &path, WavEncoding::Pcm16).unwrap();
        let back = load_wav(&path).unwrap();
        assert!((back.samples()[0] - 32767.0 / 32768.0).abs() < 1e-12);
    }

    #[test]
    fn pcm16_roundtrip_error_bounded() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.13).sin() * 0.9).collect();
        let w = Waveform::new(samples.clone(), 16000).unwrap();
        save_wav(&w, &path, WavEncoding::Pcm16).unwrap();
        let back = load_wav(&path).unwrap();
        let tol = 1.0 / (1 << 15) as f64;
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn save_empty_waveform_errors() {
        let dir = tempdir().unwrap();
        let w = Waveform::new(vec![], 16000).unwrap();
        assert!(save_wav(&w, dir.path().join("e.wav"), WavEncoding::Float32).is_err());
    }

    #[test]
    fn resample_identity_at_source_rate() {
        let w = Waveform::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
        let r = resample_linear(&w, 16000).unwrap();
        assert_eq!(r.samples(), w.samples());
    }

    #[test]
    fn resample_doubles_with_edge_hold() {
        // positions 0, 0.5, 1.0, 1.5 against samples [0, 1]: [0, 0.5, 1, 1]
        let w = Waveform::new(vec![0.0, 1.0], 2).unwrap();
        let r = resample_linear(&w, 4).unwrap();
        assert_eq!(r.samples(), &[0.0, 0.5, 1.0, 1.0]);
        assert_eq!(r.sample_rate_hz(), 4);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let w = Waveform::new(vec![0.25; 100], 16000).unwrap();
        let r = resample_linear(&w, 22050).unwrap();
        assert_eq!(r.len(), (100.0 * 22050.0 / 16000.0_f64).round() as usize);
        assert!(r.samples().iter().all(|&s| (s - 0.25).abs() < 1e-15));
    }

    #[test]
    fn peak_normalize_scales_to_peak() {
        let w = Waveform::new(vec![0.25, -0.5], 16000).unwrap();
        let n = peak_normalize(&w, 1.0).unwrap();
        assert_eq!(n.samples(), &[0.5, -1.0]);
    }

    #[test]
    fn peak_normalize_identity_when_already_peaked() {
        let w = Waveform::new(vec![0.5, -1.0], 16000).unwrap();
        let n = peak_normalize(&w, 1.0).unwrap();
        assert_eq!(n.samples(), w.samples());
    }

    #[test]
    fn peak_normalize_rejects_silence() {
        let w = Waveform::new(vec![0.0; 10], 16000).unwrap();
        assert!(matches!(peak_normalize(&w, 1.0), Err(Error::AllZeroSignal)));
    }
}
