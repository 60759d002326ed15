//! `rankspec rank-analyze`: per-clip rank deltas and histograms over a corpus.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankspec_core::audio::{peak_normalize, Waveform};
use rankspec_core::degrade::{mix_at_snr, NoiseMixSpec};
use rankspec_core::mel::build_filterbank;
use rankspec_core::rank::{
    aggregate_histogram, rank_delta_se, rank_delta_vo, write_reports_jsonl, NoiseProvenance,
    RankConfig, RankContext, RankReport,
};
use rankspec_core::stft::{magnitude, stft, MagnitudeSpectrogram};
use rayon::prelude::*;

use crate::common::{clip_id_of, effective_jobs, load_at_rate, preset_or_default, read_path_list};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankTaskArg {
    Se,
    Vo,
    Both,
}

#[derive(Args)]
pub struct RankAnalyzeArgs {
    /// Analysis preset (fig2-16k or vocoder-24k)
    #[arg(long)]
    pub preset: Option<String>,
    /// Which degradation to analyze
    #[arg(long, value_enum, default_value = "both")]
    pub task: RankTaskArg,
    /// Comma-separated mel band counts for the vocoding task
    #[arg(long, value_delimiter = ',')]
    pub mels: Vec<usize>,
    /// Speech manifest (newline-delimited wav paths)
    #[arg(long)]
    pub speech: PathBuf,
    /// Noise manifest; required for the denoising task
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Output directory for JSONL reports and CSV histograms
    #[arg(long)]
    pub out: PathBuf,
    /// Absolute singular-value threshold
    #[arg(long)]
    pub eta: Option<f64>,
    /// Machine-tolerance rank instead of the absolute threshold
    #[arg(long)]
    pub exact_rank: bool,
    /// Fixed mixing SNR in dB (mild condition baseline)
    #[arg(long, conflicts_with_all = ["snr_lo", "snr_hi"])]
    pub snr: Option<f64>,
    /// Lower edge of the per-clip SNR pool in dB
    #[arg(long, default_value_t = 0.0)]
    pub snr_lo: f64,
    /// Upper edge of the per-clip SNR pool in dB
    #[arg(long, default_value_t = 10.0)]
    pub snr_hi: f64,
    /// Noise amplitude multiplier of the heavy condition
    #[arg(long, default_value_t = 5.0)]
    pub heavy_mult: f64,
    /// Peak-normalize clips to this value before analysis
    #[arg(long, default_value_t = 0.95)]
    pub peak: f64,
    /// Analyze raw amplitudes (skip peak normalization)
    #[arg(long)]
    pub no_normalize: bool,
    /// Histogram bin width (integer rank deltas per bin)
    #[arg(long, default_value_t = 1)]
    pub bin_width: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads
    #[arg(long, env = "RANKSPEC_JOBS")]
    pub jobs: Option<usize>,
}

struct ClipOutcome {
    se: Vec<RankReport>,
    vo: Vec<RankReport>,
}

pub fn run(args: RankAnalyzeArgs) -> Result<()> {
    let preset = preset_or_default(args.preset.as_deref())?;
    let rank_cfg = if args.exact_rank {
        RankConfig::exact()
    } else {
        RankConfig::absolute(args.eta.unwrap_or(preset.eta))?
    };
    let mels = if args.mels.is_empty() {
        preset.n_mels_options.clone()
    } else {
        args.mels.clone()
    };
    let want_se = matches!(args.task, RankTaskArg::Se | RankTaskArg::Both);
    let want_vo = matches!(args.task, RankTaskArg::Vo | RankTaskArg::Both);
    if !(args.snr_lo <= args.snr_hi) {
        bail!("--snr-lo must not exceed --snr-hi");
    }

    let speech_paths = read_path_list(&args.speech)?;
    let noise_paths = if want_se {
        let p = args.noise.as_ref().context("the se task needs --noise")?;
        read_path_list(p)?
    } else {
        Vec::new()
    };

    let banks: Vec<_> = mels
        .iter()
        .map(|&m| build_filterbank(&preset.mel_params(m)).map(Arc::new))
        .collect::<rankspec_core::Result<_>>()?;

    let peak = if args.no_normalize {
        None
    } else {
        Some(args.peak)
    };
    let magnitude_of =
        |w: &Waveform| -> Result<MagnitudeSpectrogram> { Ok(magnitude(&stft(w, &preset.stft)?)) };

    let analyze_clip = |(clip_index, path): (usize, &PathBuf)| -> Result<ClipOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(clip_index as u64);

        let raw = load_at_rate(path, preset.sample_rate_hz)?;
        let clean = match peak {
            Some(p) => peak_normalize(&raw, p)?,
            None => raw,
        };
        let clean_mag = magnitude_of(&clean)?;
        let clip_id = clip_id_of(path);

        let mut outcome = ClipOutcome {
            se: Vec::new(),
            vo: Vec::new(),
        };
        if want_se {
            let noise_path = &noise_paths[rng.gen_range(0..noise_paths.len())];
            let noise = load_at_rate(noise_path, preset.sample_rate_hz)?;
            let snr = match args.snr {
                Some(v) => v,
                None => rng.gen_range(args.snr_lo..=args.snr_hi),
            };
            // clone the stream so mild and heavy share the tiling offset
            for (label, mult) in [("se-mild", 1.0), ("se-heavy", args.heavy_mult)] {
                let mut mix_rng = rng.clone();
                let spec = NoiseMixSpec::new(snr, mult)?;
                let (mixture, gain) = mix_at_snr(&clean, &noise, &spec, &mut mix_rng)?;
                let mix_mag = magnitude_of(&mixture)?;
                let ctx = RankContext {
                    clip_id: clip_id.clone(),
                    condition: label.to_string(),
                    noise: Some(NoiseProvenance {
                        target_snr_db: snr,
                        gain_multiplier: mult,
                        applied_gain: gain,
                        noise_clip_id: Some(clip_id_of(noise_path)),
                    }),
                    peak_normalized: peak,
                };
                outcome
                    .se
                    .push(rank_delta_se(&clean_mag, &mix_mag, &rank_cfg, ctx)?);
            }
        }
        if want_vo {
            for bank in &banks {
                let ctx = RankContext {
                    clip_id: clip_id.clone(),
                    condition: format!("vo-{}", bank.n_mels()),
                    noise: None,
                    peak_normalized: peak,
                };
                outcome
                    .vo
                    .push(rank_delta_vo(&clean_mag, bank, &rank_cfg, ctx)?);
            }
        }
        Ok(outcome)
    };

    let jobs = effective_jobs(args.jobs);
    let outcomes: Vec<ClipOutcome> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| {
            speech_paths
                .par_iter()
                .enumerate()
                .map(analyze_clip)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        speech_paths
            .iter()
            .enumerate()
            .map(|(i, p)| analyze_clip((i, p)))
            .collect::<Result<Vec<_>>>()?
    };

    // group by condition, preserving clip order
    let mut by_condition: Vec<(String, Vec<RankReport>)> = Vec::new();
    for outcome in outcomes {
        for report in outcome.se.into_iter().chain(outcome.vo) {
            match by_condition
                .iter_mut()
                .find(|(c, _)| *c == report.provenance.condition)
            {
                Some((_, v)) => v.push(report),
                None => by_condition.push((report.provenance.condition.clone(), vec![report])),
            }
        }
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for (condition, reports) in &by_condition {
        let jsonl_path = args.out.join(format!("reports-{condition}.jsonl"));
        write_reports_jsonl(reports, BufWriter::new(File::create(&jsonl_path)?))?;
        let hist = aggregate_histogram(reports, args.bin_width)?;
        let csv_path = args.out.join(format!("hist-{condition}.csv"));
        hist.write_csv(BufWriter::new(File::create(&csv_path)?))?;

        let n = reports.len() as f64;
        let mean = reports.iter().map(|r| r.delta as f64).sum::<f64>() / n;
        let nonneg = reports.iter().filter(|r| r.delta >= 0).count() as f64 / n;
        let nonpos = reports.iter().filter(|r| r.delta <= 0).count() as f64 / n;
        println!(
            "{condition}: n={} mean_delta={mean:.3} frac>=0={nonneg:.3} frac<=0={nonpos:.3}",
            reports.len()
        );
    }
    Ok(())
}
