//! Shared CLI plumbing: preset resolution, manifest reading, jobs handling.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rankspec_core::audio::{load_wav, resample_linear, Waveform};
use rankspec_core::mel::{build_filterbank, export_filterbank};
use rankspec_core::presets::{by_name, Preset};

/// Resolve a preset by name, `fig2-16k` by default.
pub fn preset_or_default(name: Option<&str>) -> Result<Preset> {
    Ok(by_name(name.unwrap_or("fig2-16k"))?)
}

/// Effective worker count: `--jobs` flag, else `RANKSPEC_JOBS`, else 1.
pub fn effective_jobs(jobs: Option<usize>) -> usize {
    jobs.unwrap_or(1).max(1)
}

/// Read a newline-delimited manifest of paths (comments with `#`, optional
/// tab-separated duration column is ignored here).
pub fn read_path_list(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let paths: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| PathBuf::from(l.split('\t').next().unwrap_or(l).trim()))
        .collect();
    if paths.is_empty() {
        bail!("manifest {} lists no clips", path.display());
    }
    Ok(paths)
}

/// Load a clip and bring it to the requested rate.
pub fn load_at_rate(path: &Path, rate: u32) -> Result<Waveform> {
    let w = load_wav(path).with_context(|| format!("loading {}", path.display()))?;
    if w.sample_rate_hz() == rate {
        Ok(w)
    } else {
        Ok(resample_linear(&w, rate)?)
    }
}

pub fn clip_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Args)]
pub struct FilterbankArgs {
    /// Analysis preset supplying sample rate, FFT size and mel range
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of mel bands
    #[arg(long)]
    pub mels: Option<usize>,
    /// Output tensor file
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_filterbank_export(args: FilterbankArgs) -> Result<()> {
    let preset = preset_or_default(args.preset.as_deref())?;
    let n_mels = args.mels.unwrap_or(preset.n_mels_default);
    let bank = build_filterbank(&preset.mel_params(n_mels))?;
    export_filterbank(&bank, &args.out)?;
    println!(
        "wrote {} ({} bins x {} mels, preset {})",
        args.out.display(),
        bank.n_bins(),
        bank.n_mels(),
        preset.name
    );
    Ok(())
}
