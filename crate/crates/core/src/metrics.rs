//! Objective metrics computable without external models: mel-cepstral
//! distortion, log-spectral distance and scale-invariant SNR.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mel::{build_filterbank, linear_to_mel, MelParams};
use crate::stft::{magnitude, stft, MagnitudeSpectrogram, StftConfig};

/// Log floor applied before cepstral analysis; also the silence gate.
pub const MCD_LOG_FLOOR: f64 = 1e-10;

/// SI-SNR is clamped to this band so reports stay finite.
pub const SI_SNR_CAP_DB: f64 = 100.0;

/// One metric value with enough provenance to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub units: String,
    pub frames_used: usize,
    pub provenance: serde_json::Value,
}

/// Orthonormal type-II DCT matrix, `n_cep x n_bands`.
fn dct_ii_orthonormal(n_cep: usize, n_bands: usize) -> Mat {
    Mat::from_fn(n_cep, n_bands, |d, j| {
        let norm = if d == 0 {
            (1.0 / n_bands as f64).sqrt()
        } else {
            (2.0 / n_bands as f64).sqrt()
        };
        norm * (std::f64::consts::PI * d as f64 * (2 * j + 1) as f64 / (2 * n_bands) as f64).cos()
    })
}

/// Frame-mean mel-cepstral distortion between two log-mel matrices.
/// Coefficient 0 carries the gain and is dropped; a frame where both inputs
/// sit at the log floor in every band is excluded from the mean.
/// Returns `(value, frames_used)`.
pub fn mcd_from_log_mel(
    ref_log_mel: &Mat,
    est_log_mel: &Mat,
    n_cep: usize,
) -> Result<(f64, usize)> {
    if ref_log_mel.shape() != est_log_mel.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            ref_log_mel.shape(),
            est_log_mel.shape()
        )));
    }
    let n_bands = ref_log_mel.cols();
    if n_cep < 2 || n_cep > n_bands {
        return Err(Error::InvalidConfig(format!(
            "n_cep ({n_cep}) must be in [2, n_mels ({n_bands})]"
        )));
    }
    let dct = dct_ii_orthonormal(n_cep, n_bands);
    let floor_log = MCD_LOG_FLOOR.ln();
    let scale = 10.0 / std::f64::consts::LN_10;

    let mut total = 0.0;
    let mut used = 0usize;
    for t in 0..ref_log_mel.rows() {
        let r = ref_log_mel.row(t);
        let e = est_log_mel.row(t);
        let silent = r.iter().all(|&v| v <= floor_log) && e.iter().all(|&v| v <= floor_log);
        if silent {
            continue;
        }
        let mut sum_sq = 0.0;
        for d in 1..n_cep {
            let basis = dct.row(d);
            let mut diff = 0.0;
            for j in 0..n_bands {
                diff += basis[j] * (r[j] - e[j]);
            }
            sum_sq += diff * diff;
        }
        total += scale * (2.0 * sum_sq).sqrt();
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyInput(
            "all frames silent in both signals".into(),
        ));
    }
    Ok((total / used as f64, used))
}

/// Mel-cepstral distortion between two waveforms.
///
/// Per frame: log-mel spectra, orthonormal DCT-II, drop coefficient 0,
/// `(10/ln 10) sqrt(2 sum_d (dc_d)^2)`, averaged over non-silent frames.
/// A global gain on either signal lands entirely in the dropped
/// coefficient, so the metric is gain-invariant.
pub fn mcd(
    reference: &Waveform,
    estimate: &Waveform,
    n_mels: usize,
    n_cep: usize,
    cfg: &StftConfig,
) -> Result<MetricReport> {
    if reference.sample_rate_hz() != estimate.sample_rate_hz() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate_hz(),
            estimate.sample_rate_hz(),
        ));
    }
    let len = reference.len().min(estimate.len());
    if len == 0 {
        return Err(Error::EmptyAudio);
    }
    let rate = reference.sample_rate_hz();
    let trunc = |w: &Waveform| Waveform::new(w.samples()[..len].to_vec(), rate);
    let params = MelParams::new(rate, cfg.fft_size(), n_mels);
    let bank = Arc::new(build_filterbank(&params)?);

    let log_mel = |w: &Waveform| -> Result<Mat> {
        let mel = linear_to_mel(&magnitude(&stft(w, cfg)?), &bank)?;
        Ok(mel.log_compress(MCD_LOG_FLOOR))
    };
    let r = log_mel(&trunc(reference)?)?;
    let e = log_mel(&trunc(estimate)?)?;
    let (value, frames_used) = mcd_from_log_mel(&r, &e, n_cep)?;

    Ok(MetricReport {
        name: "mcd".into(),
        value,
        units: "dB".into(),
        frames_used,
        provenance: serde_json::json!({
            "n_mels": n_mels,
            "n_cep": n_cep,
            "log_floor": MCD_LOG_FLOOR,
            "dct": "orthonormal-ii",
            "coefficient_0": "dropped",
            "stft": cfg,
            "mel": params,
            "truncated_to_samples": len,
        }),
    })
}

/// Frame-mean log-spectral distance in dB:
/// per frame `sqrt(mean_bins (20 log10(max(ref,floor)/max(est,floor)))^2)`.
pub fn log_spectral_distance(
    ref_mag: &MagnitudeSpectrogram,
    est_mag: &MagnitudeSpectrogram,
    floor: f64,
) -> Result<MetricReport> {
    if ref_mag.frames().shape() != est_mag.frames().shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            ref_mag.frames().shape(),
            est_mag.frames().shape()
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidConfig("floor must be positive".into()));
    }
    let (t_frames, n_bins) = ref_mag.frames().shape();
    let mut total = 0.0;
    let mut used = 0usize;
    for t in 0..t_frames {
        let r = ref_mag.frames().row(t);
        let e = est_mag.frames().row(t);
        if r.iter().all(|&v| v < floor) && e.iter().all(|&v| v < floor) {
            continue;
        }
        let mut acc = 0.0;
        for j in 0..n_bins {
            let d = 20.0 * (r[j].max(floor) / e[j].max(floor)).log10();
            acc += d * d;
        }
        total += (acc / n_bins as f64).sqrt();
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyInput(
            "all frames silent in both spectrograms".into(),
        ));
    }
    Ok(MetricReport {
        name: "lsd".into(),
        value: total / used as f64,
        units: "dB".into(),
        frames_used: used,
        provenance: serde_json::json!({ "floor": floor, "stft": ref_mag.config() }),
    })
}

/// Scale-invariant SNR: project the estimate on the reference, compare the
/// projection with the residual. Clamped to +-[`SI_SNR_CAP_DB`].
pub fn si_snr(reference: &Waveform, estimate: &Waveform) -> Result<MetricReport> {
    if reference.len() != estimate.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let ref_energy: f64 = reference.samples().iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(Error::ZeroEnergy("si-snr reference".into()));
    }
    let dot: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(r, e)| r * e)
        .sum();
    let alpha = dot / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let error_energy: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| {
            let d = e - alpha * r;
            d * d
        })
        .sum();

    let value = if error_energy <= 0.0 {
        SI_SNR_CAP_DB
    } else if target_energy <= 0.0 {
        -SI_SNR_CAP_DB
    } else {
        (10.0 * (target_energy / error_energy).log10()).clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB)
    };
    Ok(MetricReport {
        name: "si_snr".into(),
        value,
        units: "dB".into(),
        frames_used: 1,
        provenance: serde_json::json!({ "cap_db": SI_SNR_CAP_DB, "samples": reference.len() }),
    })
}

/// One JSON document per line.
pub fn write_metrics_jsonl(reports: &[MetricReport], mut out: impl Write) -> Result<()> {
    for r in reports {
        let line = serde_json::to_string(r)?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|source| Error::Io {
                path: "<writer>".into(),
                source,
            })?;
    }
    Ok(())
}
