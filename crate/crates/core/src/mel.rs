//! Mel filterbank construction, compression and pseudo-inverse reconstruction.
//!
//! The filterbank matrix is stored in the transposed-application convention:
//! a `T x F` magnitude spectrogram right-multiplies the `F x F_m` matrix to
//! give a `T x F_m` mel spectrogram; right-multiplying the `F_m x F`
//! Moore-Penrose pseudo-inverse maps it back, with losses captured by the
//! rank statistics in [`crate::rank`].

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::container::{self, Tensor, TensorData};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::stft::{MagnitudeSpectrogram, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// Piecewise linear/log scale with area normalization available;
    /// the default in the dominant neural-vocoder feature pipelines.
    Slaney,
    /// `2595 log10(1 + f/700)`.
    Htk,
}

/// Frequency in Hz to position on the chosen mel scale.
pub fn hz_to_mel(hz: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
        MelScale::Slaney => {
            const F_SP: f64 = 200.0 / 3.0;
            const MIN_LOG_HZ: f64 = 1000.0;
            const MIN_LOG_MEL: f64 = 15.0;
            let logstep = 6.4f64.ln() / 27.0;
            if hz < MIN_LOG_HZ {
                hz / F_SP
            } else {
                MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / logstep
            }
        }
    }
}

pub fn mel_to_hz(mel: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
        MelScale::Slaney => {
            const F_SP: f64 = 200.0 / 3.0;
            const MIN_LOG_HZ: f64 = 1000.0;
            const MIN_LOG_MEL: f64 = 15.0;
            let logstep = 6.4f64.ln() / 27.0;
            if mel < MIN_LOG_MEL {
                mel * F_SP
            } else {
                MIN_LOG_HZ * ((mel - MIN_LOG_MEL) * logstep).exp()
            }
        }
    }
}

/// Everything needed to rebuild a filterbank; recorded as provenance in
/// reports and container files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelParams {
    pub sample_rate_hz: u32,
    pub fft_size: usize,
    pub n_mels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub scale: MelScale,
    pub normalized: bool,
}

impl MelParams {
    /// Defaults: full band, slaney scale with area normalization.
    pub fn new(sample_rate_hz: u32, fft_size: usize, n_mels: usize) -> Self {
        Self {
            sample_rate_hz,
            fft_size,
            n_mels,
            f_min_hz: 0.0,
            f_max_hz: sample_rate_hz as f64 / 2.0,
            scale: MelScale::Slaney,
            normalized: true,
        }
    }

    pub fn with_range(mut self, f_min_hz: f64, f_max_hz: f64) -> Self {
        self.f_min_hz = f_min_hz;
        self.f_max_hz = f_max_hz;
        self
    }

    pub fn with_scale(mut self, scale: MelScale, normalized: bool) -> Self {
        self.scale = scale;
        self.normalized = normalized;
        self
    }
}

/// Triangular mel filterbank plus its cached Moore-Penrose pseudo-inverse.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    params: MelParams,
    /// `F x F_m`, applied as `Y = |S| * A`.
    matrix_a: Mat,
    /// `F_m x F` pseudo-inverse.
    pinv_a: Mat,
}

/// Relative Frobenius tolerance for the four Penrose identities.
pub const PENROSE_TOL: f64 = 1e-6;

impl MelFilterbank {
    pub fn params(&self) -> &MelParams {
        &self.params
    }

    pub fn n_bins(&self) -> usize {
        self.matrix_a.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.matrix_a.cols()
    }

    pub fn matrix_a(&self) -> &Mat {
        &self.matrix_a
    }

    pub fn pinv_a(&self) -> &Mat {
        &self.pinv_a
    }

    /// Largest relative Frobenius residual over the four Penrose identities.
    pub fn penrose_residual(&self) -> f64 {
        let a = self.matrix_a.to_dmatrix();
        let p = self.pinv_a.to_dmatrix();
        let ap = &a * &p;
        let pa = &p * &a;
        let norm_a = a.norm();
        let norm_p = p.norm();
        let r1 = (&ap * &a - &a).norm() / norm_a;
        let r2 = (&pa * &p - &p).norm() / norm_p;
        let r3 = (ap.transpose() - &ap).norm() / ap.norm();
        let r4 = (pa.transpose() - &pa).norm() / pa.norm();
        r1.max(r2).max(r3).max(r4)
    }
}

/// SVD pseudo-inverse with the standard `eps * max(dims) * sigma_max` cutoff.
fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::SvdFailed)?;
    let v_t = svd.v_t.as_ref().ok_or(Error::SvdFailed)?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * sigma_max;
    let inv_sigma =
        DMatrix::from_diagonal(&svd.singular_values.map(
            |s| {
                if s > cutoff {
                    1.0 / s
                } else {
                    0.0
                }
            },
        ));
    Ok(v_t.transpose() * inv_sigma * u.transpose())
}

/// Build the triangular filterbank and cache its pseudo-inverse.
///
/// Filter centers are equally spaced on the chosen mel scale between
/// `f_min_hz` and `f_max_hz`; with `normalized` each triangle is scaled by
/// `2 / bandwidth` (area normalization).
pub fn build_filterbank(params: &MelParams) -> Result<MelFilterbank> {
    let n_bins = params.fft_size / 2 + 1;
    let nyquist = params.sample_rate_hz as f64 / 2.0;
    if params.fft_size == 0 || params.fft_size % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "fft_size must be positive and even, got {}",
            params.fft_size
        )));
    }
    if !(0.0 <= params.f_min_hz && params.f_min_hz < params.f_max_hz && params.f_max_hz <= nyquist)
    {
        return Err(Error::Filterbank(format!(
            "need 0 <= f_min ({}) < f_max ({}) <= nyquist ({nyquist})",
            params.f_min_hz, params.f_max_hz
        )));
    }
    if params.n_mels == 0 || params.n_mels >= n_bins {
        return Err(Error::Filterbank(format!(
            "n_mels ({}) must be in [1, {})",
            params.n_mels, n_bins
        )));
    }

    let mel_lo = hz_to_mel(params.f_min_hz, params.scale);
    let mel_hi = hz_to_mel(params.f_max_hz, params.scale);
    let edges: Vec<f64> = (0..params.n_mels + 2)
        .map(|i| {
            let mel = mel_lo + (mel_hi - mel_lo) * i as f64 / (params.n_mels + 1) as f64;
            mel_to_hz(mel, params.scale)
        })
        .collect();

    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * params.sample_rate_hz as f64 / params.fft_size as f64)
        .collect();

    let mut matrix_a = Mat::zeros(n_bins, params.n_mels);
    for m in 0..params.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let enorm = if params.normalized {
            2.0 / (hi - lo)
        } else {
            1.0
        };
        let mut any_positive = false;
        for (k, &f) in bin_hz.iter().enumerate() {
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                matrix_a.set(k, m, w * enorm);
                any_positive = true;
            }
        }
        if !any_positive {
            return Err(Error::Filterbank(format!(
                "filter {m} (center {center:.1} Hz) captures no FFT bin; \
                 n_mels too large for this FFT resolution"
            )));
        }
    }

    let pinv_a = Mat::from_dmatrix(&pinv(&matrix_a.to_dmatrix())?);
    let bank = MelFilterbank {
        params: params.clone(),
        matrix_a,
        pinv_a,
    };
    let residual = bank.penrose_residual();
    if residual > PENROSE_TOL {
        return Err(Error::Filterbank(format!(
            "pseudo-inverse failed the Penrose identities (residual {residual:.3e})"
        )));
    }
    Ok(bank)
}

/// Mel spectrogram with a handle on the filterbank and STFT framing that
/// produced it.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    frames: Mat,
    bank: Arc<MelFilterbank>,
    stft_config: StftConfig,
    sample_rate_hz: u32,
}

impl MelSpectrogram {
    pub fn frames(&self) -> &Mat {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.cols()
    }

    pub fn bank(&self) -> &Arc<MelFilterbank> {
        &self.bank
    }

    pub fn stft_config(&self) -> &StftConfig {
        &self.stft_config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn log_compress(&self, floor: f64) -> Mat {
        log_compress(&self.frames, floor)
    }
}

/// `Y = |S| A`, per frame.
pub fn linear_to_mel(
    mag: &MagnitudeSpectrogram,
    bank: &Arc<MelFilterbank>,
) -> Result<MelSpectrogram> {
    if mag.n_bins() != bank.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "magnitude has {} bins, filterbank expects {}",
            mag.n_bins(),
            bank.n_bins()
        )));
    }
    if mag.sample_rate_hz() != bank.params().sample_rate_hz {
        return Err(Error::SampleRateMismatch(
            mag.sample_rate_hz(),
            bank.params().sample_rate_hz,
        ));
    }
    let frames = mag.frames().matmul(&bank.matrix_a);
    Ok(MelSpectrogram {
        frames,
        bank: Arc::clone(bank),
        stft_config: mag.config().clone(),
        sample_rate_hz: mag.sample_rate_hz(),
    })
}

/// Raw pseudo-inverse reconstruction `Y A+`, small negatives included.
/// Rank analysis consumes this unclamped product.
pub fn mel_to_linear_raw(mel: &MelSpectrogram) -> Mat {
    mel.frames.matmul(&mel.bank.pinv_a)
}

/// Pseudo-inverse reconstruction clamped to a valid magnitude spectrogram.
pub fn mel_to_linear_pinv(mel: &MelSpectrogram) -> Result<MagnitudeSpectrogram> {
    let clamped = mel_to_linear_raw(mel).map(|v| v.max(0.0));
    MagnitudeSpectrogram::from_mat(clamped, mel.stft_config.clone(), mel.sample_rate_hz)
}

/// Elementwise `ln(max(x, floor))`.
pub fn log_compress(x: &Mat, floor: f64) -> Mat {
    assert!(floor > 0.0, "log floor must be positive");
    x.map(|v| v.max(floor).ln())
}

/// Export the filterbank (params plus both matrices, float64) to the
/// container format, so external consumers use the exact same values.
pub fn export_filterbank(bank: &MelFilterbank, path: impl AsRef<Path>) -> Result<()> {
    let meta = serde_json::to_value(bank.params())?;
    let tensors = vec![
        Tensor::new(
            "matrix_a",
            vec![bank.n_bins(), bank.n_mels()],
            TensorData::F64(bank.matrix_a.as_slice().to_vec()),
        ),
        Tensor::new(
            "pinv_a",
            vec![bank.n_mels(), bank.n_bins()],
            TensorData::F64(bank.pinv_a.as_slice().to_vec()),
        ),
    ];
    container::write_tensor_file(path, "mel_filterbank", &meta, &tensors)
}

/// Load a filterbank previously written by [`export_filterbank`]. The stored
/// matrices are used verbatim (no rebuild) and re-checked against the
/// Penrose identities.
pub fn import_filterbank(path: impl AsRef<Path>) -> Result<MelFilterbank> {
    let path = path.as_ref();
    let file = container::read_tensor_file(path)?;
    let fail = |msg: String| Error::TensorFile {
        path: path.to_path_buf(),
        msg,
    };
    if file.kind != "mel_filterbank" {
        return Err(fail(format!(
            "expected kind mel_filterbank, got {}",
            file.kind
        )));
    }
    let params: MelParams = serde_json::from_value(file.meta.clone())?;
    let n_bins = params.fft_size / 2 + 1;
    let mut matrix_a = None;
    let mut pinv_a = None;
    for t in &file.tensors {
        match (t.name.as_str(), t.shape.as_slice()) {
            ("matrix_a", [r, c]) if *r == n_bins && *c == params.n_mels => {
                matrix_a = Some(Mat::from_vec(*r, *c, t.data.to_f64()));
            }
            ("pinv_a", [r, c]) if *r == params.n_mels && *c == n_bins => {
                pinv_a = Some(Mat::from_vec(*r, *c, t.data.to_f64()));
            }
            _ => {}
        }
    }
    let bank = MelFilterbank {
        params,
        matrix_a: matrix_a.ok_or_else(|| fail("missing matrix_a tensor".into()))?,
        pinv_a: pinv_a.ok_or_else(|| fail("missing pinv_a tensor".into()))?,
    };
    let residual = bank.penrose_residual();
    if residual > PENROSE_TOL {
        return Err(fail(format!(
            "stored matrices fail Penrose identities ({residual:.3e})"
        )));
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Waveform;
    use crate::stft::{stft, WindowKind};
    use tempfile::tempdir;

    fn bank_16k(n_mels: usize) -> MelFilterbank {
        build_filterbank(&MelParams::new(16000, 512, n_mels)).unwrap()
    }

    #[test]
    fn shape_is_257_by_80_for_512_fft() {
        let bank = bank_16k(80);
        assert_eq!(bank.matrix_a().shape(), (257, 80));
        assert_eq!(bank.pinv_a().shape(), (80, 257));
    }

    #[test]
    fn f_max_above_nyquist_is_rejected() {
        let params = MelParams::new(24000, 1024, 80).with_range(0.0, 16000.0);
        assert!(matches!(
            build_filterbank(&params),
            Err(Error::Filterbank(_))
        ));
    }

    #[test]
    fn too_many_mels_gives_empty_filter() {
        // 240 filters against 257 bins leaves low-frequency triangles between bins
        let params = MelParams::new(16000, 512, 240);
        let err = build_filterbank(&params);
        assert!(err.is_err());
    }

    #[test]
    fn penrose_identities_hold() {
        for n_mels in [60, 80] {
            let bank = bank_16k(n_mels);
            assert!(bank.penrose_residual() <= PENROSE_TOL);
        }
    }

    #[test]
    fn columns_are_nonnegative_with_a_positive_entry() {
        let bank = bank_16k(80);
        let a = bank.matrix_a();
        for m in 0..a.cols() {
            let mut any = false;
            for k in 0..a.rows() {
                let v = a.get(k, m);
                assert!(v >= 0.0);
                any |= v > 0.0;
            }
            assert!(any, "filter {m} is empty");
        }
    }

    #[test]
    fn mel_scale_conversions_invert() {
        for scale in [MelScale::Slaney, MelScale::Htk] {
            for hz in [0.0, 100.0, 999.0, 1000.0, 4321.5, 8000.0] {
                let back = mel_to_hz(hz_to_mel(hz, scale), scale);
                assert!((back - hz).abs() < 1e-9, "{scale:?} {hz} -> {back}");
            }
        }
    }

    #[test]
    fn htk_reference_value() {
        // 1000 Hz on the HTK scale: 2595 log10(1 + 1000/700)
        let m = hz_to_mel(1000.0, MelScale::Htk);
        assert!((m - 999.9855371396243).abs() < 1e-9);
    }

    #[test]
    fn basis_vector_picks_out_filterbank_row() {
        let bank = Arc::new(bank_16k(80));
        let cfg = StftConfig::new(512, 512, 384, WindowKind::Hann, true).unwrap();
        let f = 100;
        let mut frame = Mat::zeros(1, 257);
        frame.set(0, f, 1.0);
        let mag = MagnitudeSpectrogram::from_mat(frame, cfg, 16000).unwrap();
        let mel = linear_to_mel(&mag, &bank).unwrap();
        for m in 0..80 {
            assert_eq!(mel.frames().get(0, m), bank.matrix_a().get(f, m));
        }
    }

    #[test]
    fn zero_mel_reconstructs_to_zero() {
        let bank = Arc::new(bank_16k(80));
        let cfg = StftConfig::new(512, 512, 384, WindowKind::Hann, true).unwrap();
        let mag = MagnitudeSpectrogram::from_mat(Mat::zeros(3, 257), cfg, 16000).unwrap();
        let mel = linear_to_mel(&mag, &bank).unwrap();
        assert!(mel.frames().as_slice().iter().all(|&v| v == 0.0));
        let back = mel_to_linear_pinv(&mel).unwrap();
        assert!(back.frames().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn products_match_naive_triple_loop() {
        // oracle: hand-rolled triple loop, independent of the nalgebra path
        fn naive(a: &Mat, b: &Mat) -> Mat {
            let mut out = Mat::zeros(a.rows(), b.cols());
            for i in 0..a.rows() {
                for j in 0..b.cols() {
                    let mut acc = 0.0;
                    for k in 0..a.cols() {
                        acc += a.get(i, k) * b.get(k, j);
                    }
                    out.set(i, j, acc);
                }
            }
            out
        }

        let bank = Arc::new(bank_16k(60));
        let cfg = StftConfig::new(512, 512, 384, WindowKind::Hann, true).unwrap();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let random = Mat::from_fn(10, 257, |_, _| next());
        let mag = MagnitudeSpectrogram::from_mat(random.clone(), cfg, 16000).unwrap();

        let mel = linear_to_mel(&mag, &bank).unwrap();
        let expect_mel = naive(&random, bank.matrix_a());
        for (a, b) in mel.frames().as_slice().iter().zip(expect_mel.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }

        let raw = mel_to_linear_raw(&mel);
        let expect_raw = naive(mel.frames(), bank.pinv_a());
        for (a, b) in raw.as_slice().iter().zip(expect_raw.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn linear_to_mel_is_linear() {
        let bank = Arc::new(bank_16k(60));
        let cfg = StftConfig::new(512, 512, 384, WindowKind::Hann, true).unwrap();
        let m1 = Mat::from_fn(5, 257, |r, c| ((r * 257 + c) % 97) as f64 / 97.0);
        let m2 = Mat::from_fn(5, 257, |r, c| ((r * 131 + 7 * c) % 89) as f64 / 89.0);
        let (a, b) = (2.5, 0.75);
        let combo = Mat::from_fn(5, 257, |r, c| a * m1.get(r, c) + b * m2.get(r, c));

        let f = |m: Mat| {
            linear_to_mel(
                &MagnitudeSpectrogram::from_mat(m, cfg.clone(), 16000).unwrap(),
                &bank,
            )
            .unwrap()
        };
        let lhs = f(combo);
        let (r1, r2) = (f(m1), f(m2));
        for i in 0..lhs.frames().as_slice().len() {
            let want = a * r1.frames().as_slice()[i] + b * r2.frames().as_slice()[i];
            let got = lhs.frames().as_slice()[i];
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn tone_at_filter_center_peaks_in_that_band() {
        let params = MelParams::new(16000, 512, 60);
        let bank = Arc::new(build_filterbank(&params).unwrap());
        let cfg = StftConfig::new(512, 512, 384, WindowKind::Hann, true).unwrap();

        let mel_lo = hz_to_mel(params.f_min_hz, params.scale);
        let mel_hi = hz_to_mel(params.f_max_hz, params.scale);
        for m in [10usize, 25, 40] {
            let center_mel = mel_lo + (mel_hi - mel_lo) * (m + 1) as f64 / 61.0;
            let f_center = mel_to_hz(center_mel, params.scale);
            let samples: Vec<f64> = (0..8000)
                .map(|i| (2.0 * std::f64::consts::PI * f_center * i as f64 / 16000.0).sin())
                .collect();
            let w = Waveform::new(samples, 16000).unwrap();
            let mel =
                linear_to_mel(&crate::stft::magnitude(&stft(&w, &cfg).unwrap()), &bank).unwrap();
            // sum the response across frames, find the peaking band
            let mut best = (0usize, f64::MIN);
            for band in 0..60 {
                let total: f64 = (0..mel.n_frames()).map(|t| mel.frames().get(t, band)).sum();
                if total > best.1 {
                    best = (band, total);
                }
            }
            assert_eq!(
                best.0, m,
                "tone at {f_center:.1} Hz peaked in band {}",
                best.0
            );
        }
    }

    #[test]
    fn log_compress_floors_and_inverts() {
        let x = Mat::from_vec(1, 3, vec![1.0, 0.0, 2.0]);
        let y = log_compress(&x, 1e-5);
        assert_eq!(y.get(0, 0), 0.0);
        assert!((y.get(0, 1) - (1e-5f64).ln()).abs() < 1e-12);
        for (o, l) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((l.exp() - o.max(1e-5)).abs() <= 1e-12 * o.max(1e-5));
        }
    }

    #[test]
    fn export_import_is_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bank.rsb");
        let bank = bank_16k(80);
        export_filterbank(&bank, &path).unwrap();
        let back = import_filterbank(&path).unwrap();
        assert_eq!(back.params(), bank.params());
        assert_eq!(back.matrix_a().as_slice(), bank.matrix_a().as_slice());
        assert_eq!(back.pinv_a().as_slice(), bank.pinv_a().as_slice());
    }
}
