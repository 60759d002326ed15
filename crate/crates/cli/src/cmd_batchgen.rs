//! `rankspec batchgen`: deterministic batch-file generation.
//!
//! Options come from flags, optionally seeded by a flat `key = value` config
//! file; flags win over file values.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rankspec_core::batch::{BatchGenerator, BatcherConfig, FeatureMode, SnrPool};
use rankspec_core::proxy_phase::{GriffinLimConfig, GriffinLimInit, PhaseProxyKind};

use crate::common::{effective_jobs, preset_or_default};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Tf,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Zero,
    Random,
    GriffinLim,
}

#[derive(Args)]
pub struct BatchgenArgs {
    /// Flat key=value config file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Probability of the denoising task per batch
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub snr_lo: Option<f64>,
    #[arg(long)]
    pub snr_hi: Option<f64>,
    /// Discrete SNR pool, e.g. "0,5,10"; overrides the uniform range
    #[arg(long, value_delimiter = ',')]
    pub snr_set: Vec<f64>,
    /// Number of batch files to write
    #[arg(long)]
    pub batches: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Segment length in samples
    #[arg(long)]
    pub segment: Option<usize>,
    /// Analysis preset supplying sample rate, STFT and mel range
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub mels: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Proxy phase for time-mode vocoding inputs
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
    #[arg(long)]
    pub gl_iters: Option<usize>,
    #[arg(long)]
    pub gl_momentum: Option<f64>,
    #[arg(long)]
    pub log_floor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub speech: Option<PathBuf>,
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "RANKSPEC_JOBS")]
    pub jobs: Option<usize>,
}

/// `key = value` per line, `#` comments. Keys use the flag spelling
/// (`snr-lo`, `batch-size`, ...).
fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), lineno + 1);
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: FromStr>(file: &HashMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match file.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("config key {key} = {raw:?}: {e}")),
    }
}

pub fn run(args: BatchgenArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => HashMap::new(),
    };

    macro_rules! resolve {
        ($flag:expr, $key:literal, $ty:ty) => {
            match $flag {
                Some(v) => Some(v),
                None => from_file::<$ty>(&file, $key)?,
            }
        };
    }

    let preset_name = args.preset.clone().or_else(|| file.get("preset").cloned());
    let preset = preset_or_default(preset_name.as_deref())?;

    let p = resolve!(args.p, "p", f64).unwrap_or(0.5);
    let snr_lo = resolve!(args.snr_lo, "snr-lo", f64).unwrap_or(0.0);
    let snr_hi = resolve!(args.snr_hi, "snr-hi", f64).unwrap_or(10.0);
    let batches = resolve!(args.batches, "batches", u64).unwrap_or(1);
    let batch_size = resolve!(args.batch_size, "batch-size", usize).unwrap_or(4);
    let segment = resolve!(args.segment, "segment", usize).unwrap_or(32768);
    let mels = resolve!(args.mels, "mels", usize).unwrap_or(preset.n_mels_default);
    let log_floor = resolve!(args.log_floor, "log-floor", f64).unwrap_or(1e-5);
    let seed = resolve!(args.seed, "seed", u64).unwrap_or(0);
    let gl_iters = resolve!(args.gl_iters, "gl-iters", usize).unwrap_or(32);
    let gl_momentum = resolve!(args.gl_momentum, "gl-momentum", f64).unwrap_or(0.0);
    let speech = resolve!(args.speech, "speech", PathBuf).context("missing --speech")?;
    let noise = resolve!(args.noise, "noise", PathBuf);
    let out = resolve!(args.out, "out", PathBuf).context("missing --out")?;

    let mode_arg = match args.mode {
        Some(m) => m,
        None => match file.get("mode").map(String::as_str) {
            Some("tf") | None => ModeArg::Tf,
            Some("time") => ModeArg::Time,
            Some(other) => bail!("config key mode = {other:?}: expected tf or time"),
        },
    };
    let phase_arg = match args.phase {
        Some(p) => p,
        None => match file.get("phase").map(String::as_str) {
            Some("zero") | None => PhaseArg::Zero,
            Some("random") => PhaseArg::Random,
            Some("griffin-lim") => PhaseArg::GriffinLim,
            Some(other) => bail!("config key phase = {other:?}"),
        },
    };

    let snr_pool = if !args.snr_set.is_empty() {
        SnrPool::Discrete {
            values_db: args.snr_set.clone(),
        }
    } else {
        SnrPool::Uniform {
            lo_db: snr_lo,
            hi_db: snr_hi,
        }
    };
    let mode = match mode_arg {
        ModeArg::Tf => FeatureMode::Tf,
        ModeArg::Time => FeatureMode::Time {
            proxy_phase: match phase_arg {
                PhaseArg::Zero => PhaseProxyKind::Zero,
                PhaseArg::Random => PhaseProxyKind::Random { seed: 0 },
                PhaseArg::GriffinLim => PhaseProxyKind::GriffinLim(GriffinLimConfig::new(
                    gl_iters,
                    GriffinLimInit::Random { seed: 0 },
                    gl_momentum,
                )?),
            },
        },
    };

    let config = BatcherConfig {
        task_prob_denoising: p,
        snr_pool,
        batch_size,
        segment_samples: segment,
        sample_rate_hz: preset.sample_rate_hz,
        stft: preset.stft.clone(),
        mel: preset.mel_params(mels),
        mode,
        log_floor,
        seed,
        speech_manifest: speech,
        noise_manifest: noise,
    };

    let generator = BatchGenerator::new(config)?;
    let summary = generator.generate(batches, &out, effective_jobs(args.jobs))?;
    let denoising_frac = if batches > 0 {
        summary.denoising_batches as f64 / batches as f64
    } else {
        0.0
    };
    println!(
        "wrote {} batch files to {} (denoising {}, vocoding {}, denoising fraction {:.3})",
        summary.files.len(),
        out.display(),
        summary.denoising_batches,
        summary.vocoding_batches,
        denoising_frac
    );
    println!(
        "summary: {}",
        out.join(generator.summary_file_name()).display()
    );
    Ok(())
}
