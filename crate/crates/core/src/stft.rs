//! Forward and inverse short-time Fourier transform.
//!
//! The inverse is the least-squares one: windowed overlap-add of per-frame
//! inverse transforms divided by the sum of squared shifted windows, which
//! reconstructs the interior of the analyzed signal for any NOLA
//! configuration, including 75%-of-window hops.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::mat::Mat;

/// Overlap-add denominators below this are treated as zero coverage.
pub const NOLA_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

/// Periodic (DFT-even) analysis window. The periodic Hann
/// `w[i] = 0.5 (1 - cos(2 pi i / length))` is the variant that satisfies
/// constant-overlap-add identities; the symmetric form does not.
pub fn make_window(kind: WindowKind, length: usize) -> Vec<f64> {
    assert!(length >= 1, "window length must be >= 1");
    match kind {
        WindowKind::Rectangular => vec![1.0; length],
        WindowKind::Hann => (0..length)
            .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / length as f64).cos()))
            .collect(),
    }
}

/// STFT framing parameters, validated at construction (including NOLA).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StftConfigRaw")]
pub struct StftConfig {
    fft_size: usize,
    win_length: usize,
    hop_length: usize,
    window: WindowKind,
    center_pad: bool,
}

#[derive(Deserialize)]
struct StftConfigRaw {
    fft_size: usize,
    win_length: usize,
    hop_length: usize,
    window: WindowKind,
    center_pad: bool,
}

impl TryFrom<StftConfigRaw> for StftConfig {
    type Error = Error;
    fn try_from(raw: StftConfigRaw) -> Result<Self> {
        StftConfig::new(
            raw.fft_size,
            raw.win_length,
            raw.hop_length,
            raw.window,
            raw.center_pad,
        )
    }
}

impl StftConfig {
    pub fn new(
        fft_size: usize,
        win_length: usize,
        hop_length: usize,
        window: WindowKind,
        center_pad: bool,
    ) -> Result<Self> {
        if fft_size == 0 || fft_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "fft_size must be a positive even number, got {fft_size}"
            )));
        }
        if !(0 < hop_length && hop_length <= win_length && win_length <= fft_size) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < hop ({hop_length}) <= win ({win_length}) <= fft ({fft_size})"
            )));
        }
        let cfg = Self {
            fft_size,
            win_length,
            hop_length,
            window,
            center_pad,
        };
        cfg.check_nola()?;
        Ok(cfg)
    }

    /// Minimum over window phases of the squared-window overlap sum. The
    /// config is rejected when any phase has (near-)zero coverage; e.g. a
    /// periodic Hann with hop == win fails because `w[0] = 0`.
    fn check_nola(&self) -> Result<()> {
        let w = self.window_vec();
        for j in 0..self.hop_length {
            let mut sum = 0.0;
            let mut i = j;
            while i < self.win_length {
                sum += w[i] * w[i];
                i += self.hop_length;
            }
            if sum < NOLA_EPS {
                return Err(Error::NolaViolation(format!(
                    "squared-window sum {sum:.3e} at phase {j} (window {:?}, win {}, hop {})",
                    self.window, self.win_length, self.hop_length
                )));
            }
        }
        Ok(())
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn win_length(&self) -> usize {
        self.win_length
    }

    pub fn hop_length(&self) -> usize {
        self.hop_length
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn center_pad(&self) -> bool {
        self.center_pad
    }

    /// Number of one-sided frequency bins, `fft_size/2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn window_vec(&self) -> Vec<f64> {
        make_window(self.window, self.win_length)
    }

    /// Frame count for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> Result<usize> {
        let padded = if self.center_pad {
            len + self.fft_size
        } else {
            len
        };
        if padded < self.win_length || len == 0 {
            return Err(Error::SignalTooShort {
                len,
                needed: self.win_length,
            });
        }
        Ok(1 + (padded - self.win_length) / self.hop_length)
    }
}

/// One-sided complex STFT, `T x F` with `F = fft_size/2 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    n_frames: usize,
    n_bins: usize,
    config: StftConfig,
    sample_rate_hz: u32,
}

impl ComplexSpectrogram {
    pub fn from_parts(
        data: Vec<Complex64>,
        n_frames: usize,
        config: StftConfig,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        let n_bins = config.n_bins();
        if data.len() != n_frames * n_bins {
            return Err(Error::ShapeMismatch(format!(
                "expected {n_frames} x {n_bins} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteMatrix);
        }
        Ok(Self {
            data,
            n_frames,
            n_bins,
            config,
            sample_rate_hz,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }
}

/// Nonnegative `T x F` magnitude spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    frames: Mat,
    config: StftConfig,
    sample_rate_hz: u32,
}

impl MagnitudeSpectrogram {
    pub fn from_mat(frames: Mat, config: StftConfig, sample_rate_hz: u32) -> Result<Self> {
        if frames.cols() != config.n_bins() {
            return Err(Error::ShapeMismatch(format!(
                "magnitude has {} bins, config expects {}",
                frames.cols(),
                config.n_bins()
            )));
        }
        if !frames.is_finite() || frames.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::NonFiniteMatrix);
        }
        Ok(Self {
            frames,
            config,
            sample_rate_hz,
        })
    }

    pub fn frames(&self) -> &Mat {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.cols()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Elementwise `ln(max(x, floor))`.
    pub fn log_compress(&self, floor: f64) -> Mat {
        crate::mel::log_compress(&self.frames, floor)
    }
}

/// `T x F` phase angles in radians, each in `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    angles: Mat,
}

impl PhaseMatrix {
    pub fn from_mat(angles: Mat) -> Result<Self> {
        if !angles.is_finite() {
            return Err(Error::NonFiniteMatrix);
        }
        Ok(Self { angles })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            angles: Mat::zeros(rows, cols),
        }
    }

    pub fn angles(&self) -> &Mat {
        &self.angles
    }

    pub fn shape(&self) -> (usize, usize) {
        self.angles.shape()
    }
}

/// Argument in `(-pi, pi]`, with `arg(0) = 0`.
fn angle_of(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Reflect index into `[0, len)` without repeating the edge sample.
fn reflect_index(i: isize, len: usize) -> usize {
    debug_assert!(len >= 1);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut p = i.rem_euclid(period);
    if p >= len as isize {
        p = period - p;
    }
    p as usize
}

/// Forward STFT. Frame `t` covers samples `[t*hop, t*hop + win)` of the
/// (optionally reflect-padded) signal; frames are windowed, zero-padded to
/// `fft_size` and truncated to the one-sided spectrum.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let n_frames = cfg.n_frames(w.len())?;
    let pad = if cfg.center_pad() {
        cfg.fft_size() / 2
    } else {
        0
    };
    let src = w.samples();
    let padded_len = src.len() + 2 * pad;

    let window = cfg.window_vec();
    let n_bins = cfg.n_bins();
    let fft_size = cfg.fft_size();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];

    let sample_at = |p: usize| -> f64 {
        let i = p as isize - pad as isize;
        if i >= 0 && (i as usize) < src.len() {
            src[i as usize]
        } else if pad > 0 {
            src[reflect_index(i, src.len())]
        } else {
            0.0
        }
    };

    let mut data = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        let start = t * cfg.hop_length();
        for i in 0..fft_size {
            let v = if i < cfg.win_length() {
                debug_assert!(start + i < padded_len);
                sample_at(start + i) * window[i]
            } else {
                0.0
            };
            buf[i] = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..n_bins]);
    }

    ComplexSpectrogram::from_parts(data, n_frames, cfg.clone(), w.sample_rate_hz())
}

/// Inverse FFT of a one-sided frame under the Hermitian-extension convention;
/// imaginary residue at DC/Nyquist is discarded by taking the real part.
fn inverse_frame(
    one_sided: &[Complex64],
    fft: &Arc<dyn rustfft::Fft<f64>>,
    buf: &mut [Complex64],
    out: &mut [f64],
) {
    let n = buf.len();
    let n_bins = one_sided.len();
    debug_assert_eq!(n_bins, n / 2 + 1);
    buf[..n_bins].copy_from_slice(one_sided);
    for k in n_bins..n {
        buf[k] = one_sided[n - k].conj();
    }
    fft.process(buf);
    let scale = 1.0 / n as f64;
    for (o, b) in out.iter_mut().zip(buf.iter()) {
        *o = b.re * scale;
    }
}

/// Least-squares inverse STFT.
///
/// Reconstruction is exact (up to rounding) wherever the squared-window
/// overlap-add sum is bounded away from zero; raw edge samples with
/// (near-)zero coverage are set to 0 and, with center padding, trimmed away.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = spec.config();
    let window = cfg.window_vec();
    let win = cfg.win_length();
    let hop = cfg.hop_length();
    let n_frames = spec.n_frames();
    if n_frames == 0 {
        return Waveform::new(vec![], spec.sample_rate_hz());
    }

    let raw_len = (n_frames - 1) * hop + win;
    let mut acc = vec![0.0f64; raw_len];
    let mut wsum = vec![0.0f64; raw_len];

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(cfg.fft_size());
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size()];
    let mut frame_time = vec![0.0f64; cfg.fft_size()];

    for t in 0..n_frames {
        inverse_frame(spec.frame(t), &fft, &mut buf, &mut frame_time);
        let start = t * hop;
        for i in 0..win {
            acc[start + i] += frame_time[i] * window[i];
            wsum[start + i] += window[i] * window[i];
        }
    }

    for (p, (a, &d)) in acc.iter_mut().zip(wsum.iter()).enumerate() {
        if d >= NOLA_EPS {
            *a /= d;
        } else if p >= win && p + win < raw_len {
            return Err(Error::NolaViolation(format!(
                "interior denominator {d:.3e} at sample {p}"
            )));
        } else {
            *a = 0.0;
        }
    }

    let out = if cfg.center_pad() {
        let trim = cfg.fft_size() / 2;
        if raw_len <= 2 * trim {
            vec![]
        } else {
            acc[trim..raw_len - trim].to_vec()
        }
    } else {
        acc
    };
    Waveform::new(out, spec.sample_rate_hz())
}

/// Elementwise complex modulus.
pub fn magnitude(spec: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    let mat = Mat::from_fn(spec.n_frames(), spec.n_bins(), |t, f| {
        spec.frame(t)[f].norm()
    });
    MagnitudeSpectrogram {
        frames: mat,
        config: spec.config().clone(),
        sample_rate_hz: spec.sample_rate_hz(),
    }
}

/// Elementwise argument.
pub fn phase(spec: &ComplexSpectrogram) -> PhaseMatrix {
    let mat = Mat::from_fn(spec.n_frames(), spec.n_bins(), |t, f| {
        angle_of(spec.frame(t)[f])
    });
    PhaseMatrix { angles: mat }
}

/// Interior reconstruction SNR in dB between a reference and an estimate,
/// skipping `skip` samples at each end of the overlapping extent. Round-trip
/// guarantees exclude edge samples whose overlap-add coverage is partial.
pub fn interior_snr_db(reference: &[f64], estimate: &[f64], skip: usize) -> f64 {
    let n = reference.len().min(estimate.len());
    assert!(n > 2 * skip, "signals too short for interior comparison");
    let (mut sig, mut err) = (0.0, 0.0);
    for i in skip..n - skip {
        sig += reference[i] * reference[i];
        let e = reference[i] - estimate[i];
        err += e * e;
    }
    10.0 * (sig / err.max(1e-300)).log10()
}

/// Recombine a magnitude with a phase into a complex spectrogram.
pub fn from_magnitude_phase(
    mag: &MagnitudeSpectrogram,
    ph: &PhaseMatrix,
) -> Result<ComplexSpectrogram> {
    if mag.frames.shape() != ph.angles.shape() {
        return Err(Error::ShapeMismatch(format!(
            "magnitude {:?} vs phase {:?}",
            mag.frames.shape(),
            ph.angles.shape()
        )));
    }
    let (t, f) = mag.frames.shape();
    let mut data = Vec::with_capacity(t * f);
    for r in 0..t {
        for c in 0..f {
            let (sin, cos) = ph.angles.get(r, c).sin_cos();
            let m = mag.frames.get(r, c);
            data.push(Complex64::new(m * cos, m * sin));
        }
    }
    ComplexSpectrogram::from_parts(data, t, mag.config.clone(), mag.sample_rate_hz)
}
