//! Thresholded spectral-rank statistics.
//!
//! The rank of a `T x F` magnitude spectrogram is the number of singular
//! values at or above an absolute threshold `eta` (or above the machine
//! tolerance in exact mode). Additive noise tends to push the rank up;
//! mel compression followed by pseudo-inverse reconstruction can only keep
//! it or pull it down, since the composed map is an orthogonal projection
//! applied from the right.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mel::{self, MelFilterbank, MelParams};
use crate::stft::{MagnitudeSpectrogram, StftConfig};

/// Threshold policy for counting singular values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    /// Absolute singular-value threshold; values `>= eta` count.
    pub eta: f64,
    /// Use the machine-tolerance rank (`sigma > eps * max(T,F) * sigma_max`)
    /// instead of the absolute threshold.
    pub use_exact: bool,
}

impl RankConfig {
    pub fn absolute(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive, got {eta}"
            )));
        }
        Ok(Self {
            eta,
            use_exact: false,
        })
    }

    pub fn exact() -> Self {
        Self {
            eta: 0.0,
            use_exact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankTask {
    Se,
    Vo,
}

/// Singular values of a matrix, descending.
pub fn singular_values(m: &Mat) -> Result<Vec<f64>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyInput("rank of an empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFiniteMatrix);
    }
    let svd = m.to_dmatrix().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Count singular values according to the config's threshold policy.
pub fn thresholded_rank(m: &Mat, cfg: &RankConfig) -> Result<usize> {
    let sv = singular_values(m)?;
    Ok(count_at_threshold(&sv, cfg, m.rows().max(m.cols())))
}

pub(crate) fn count_at_threshold(sv: &[f64], cfg: &RankConfig, max_dim: usize) -> usize {
    if cfg.use_exact {
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        let cutoff = f64::EPSILON * max_dim as f64 * sigma_max;
        sv.iter().filter(|&&s| s > cutoff).count()
    } else {
        sv.iter().filter(|&&s| s >= cfg.eta).count()
    }
}

/// Noise parameters recorded alongside a denoising-task report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProvenance {
    pub target_snr_db: f64,
    pub gain_multiplier: f64,
    pub applied_gain: f64,
    pub noise_clip_id: Option<String>,
}

/// Everything needed to interpret a report's absolute threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProvenance {
    /// Condition label, e.g. `se-mild`, `se-heavy`, `vo-60`, `vo-80`.
    pub condition: String,
    pub stft: StftConfig,
    pub sample_rate_hz: u32,
    pub mel: Option<MelParams>,
    pub noise: Option<NoiseProvenance>,
    /// Peak value if the clip was peak-normalized before analysis; `None`
    /// when the raw amplitude was used. The absolute threshold is only
    /// comparable across clips under a fixed scaling convention.
    pub peak_normalized: Option<f64>,
}

/// Per-clip context supplied by the caller of the delta operations.
#[derive(Debug, Clone)]
pub struct RankContext {
    pub clip_id: String,
    pub condition: String,
    pub noise: Option<NoiseProvenance>,
    pub peak_normalized: Option<f64>,
}

/// Per-clip thresholded ranks and their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub clip_id: String,
    pub rank_clean: usize,
    pub rank_degraded: usize,
    /// `rank_degraded - rank_clean`.
    pub delta: i64,
    pub task: RankTask,
    pub config: RankConfig,
    pub provenance: RankProvenance,
}

fn report(
    task: RankTask,
    rank_clean: usize,
    rank_degraded: usize,
    cfg: &RankConfig,
    ctx: RankContext,
    stft: &StftConfig,
    sample_rate_hz: u32,
    mel: Option<MelParams>,
) -> RankReport {
    RankReport {
        clip_id: ctx.clip_id,
        rank_clean,
        rank_degraded,
        delta: rank_degraded as i64 - rank_clean as i64,
        task,
        config: *cfg,
        provenance: RankProvenance {
            condition: ctx.condition,
            stft: stft.clone(),
            sample_rate_hz,
            mel,
            noise: ctx.noise,
            peak_normalized: ctx.peak_normalized,
        },
    }
}

/// Rank difference between a noisy mixture and the clean spectrum.
pub fn rank_delta_se(
    clean: &MagnitudeSpectrogram,
    mixture: &MagnitudeSpectrogram,
    cfg: &RankConfig,
    ctx: RankContext,
) -> Result<RankReport> {
    if clean.frames().shape() != mixture.frames().shape() || clean.config() != mixture.config() {
        return Err(Error::ShapeMismatch(format!(
            "clean {:?} vs mixture {:?}",
            clean.frames().shape(),
            mixture.frames().shape()
        )));
    }
    let rank_clean = thresholded_rank(clean.frames(), cfg)?;
    let rank_degraded = thresholded_rank(mixture.frames(), cfg)?;
    Ok(report(
        RankTask::Se,
        rank_clean,
        rank_degraded,
        cfg,
        ctx,
        clean.config(),
        clean.sample_rate_hz(),
        None,
    ))
}

/// Rank difference between the mel-compressed-and-reconstructed spectrum
/// (the unclamped pseudo-inverse product) and the clean spectrum.
pub fn rank_delta_vo(
    clean: &MagnitudeSpectrogram,
    bank: &Arc<MelFilterbank>,
    cfg: &RankConfig,
    ctx: RankContext,
) -> Result<RankReport> {
    let mel_spec = mel::linear_to_mel(clean, bank)?;
    let reconstructed = mel::mel_to_linear_raw(&mel_spec);
    let rank_clean = thresholded_rank(clean.frames(), cfg)?;
    let rank_degraded = thresholded_rank(&reconstructed, cfg)?;
    Ok(report(
        RankTask::Vo,
        rank_clean,
        rank_degraded,
        cfg,
        ctx,
        clean.config(),
        clean.sample_rate_hz(),
        Some(bank.params().clone()),
    ))
}

/// Histogram of rank deltas over a homogeneous set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub task: RankTask,
    pub condition: String,
    pub config: RankConfig,
    /// `counts[i]` covers deltas in `[bin_edges[i], bin_edges[i+1])`.
    pub bin_edges: Vec<i64>,
    pub counts: Vec<u64>,
    pub n_clips: usize,
}

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && (a < 0) != (b < 0) {
        q - 1
    } else {
        q
    }
}

/// Bin the deltas of `reports` into consecutive integer bins of `bin_width`,
/// anchored at multiples of the width.
pub fn aggregate_histogram(reports: &[RankReport], bin_width: u32) -> Result<RankHistogram> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("histogram of zero reports".into()));
    }
    if bin_width == 0 {
        return Err(Error::InvalidConfig("bin width must be positive".into()));
    }
    let first = &reports[0];
    for r in reports {
        if r.task != first.task {
            return Err(Error::MixedReports("task".into()));
        }
        if r.config != first.config {
            return Err(Error::MixedReports("threshold config".into()));
        }
        if r.provenance.condition != first.provenance.condition {
            return Err(Error::MixedReports("condition".into()));
        }
    }

    let w = bin_width as i64;
    let min = reports.iter().map(|r| r.delta).min().unwrap();
    let max = reports.iter().map(|r| r.delta).max().unwrap();
    let lo = floor_div(min, w) * w;
    let n_bins = (floor_div(max, w) - floor_div(min, w) + 1) as usize;

    let mut counts = vec![0u64; n_bins];
    for r in reports {
        let idx = (floor_div(r.delta, w) - floor_div(min, w)) as usize;
        counts[idx] += 1;
    }
    let bin_edges: Vec<i64> = (0..=n_bins as i64).map(|i| lo + i * w).collect();

    Ok(RankHistogram {
        task: first.task,
        condition: first.provenance.condition.clone(),
        config: first.config,
        bin_edges,
        counts,
        n_clips: reports.len(),
    })
}

impl RankHistogram {
    /// CSV with a `bin_lo,bin_hi,count` header, one row per bin.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], c)?;
        }
        Ok(())
    }
}

/// One JSON document per line.
pub fn write_reports_jsonl(reports: &[RankReport], mut out: impl Write) -> Result<()> {
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
