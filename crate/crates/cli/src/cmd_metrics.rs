//! `rankspec metrics`: MCD / LSD / SI-SNR over paired file lists.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rankspec_core::audio::Waveform;
use rankspec_core::metrics::{log_spectral_distance, mcd, si_snr, MetricReport};
use rankspec_core::stft::{magnitude, stft};
use rayon::prelude::*;

use crate::common::{clip_id_of, effective_jobs, preset_or_default, read_path_list};

#[derive(Args)]
pub struct MetricsArgs {
    /// Manifest of reference wavs
    #[arg(long)]
    pub ref_list: PathBuf,
    /// Manifest of estimate wavs, paired by line with the references
    #[arg(long)]
    pub est_list: PathBuf,
    /// Output directory (metrics.jsonl + summary.csv)
    #[arg(long)]
    pub out: PathBuf,
    /// Preset supplying the STFT framing
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 80)]
    pub mels: usize,
    /// Cepstral coefficient count for MCD (coefficient 0 is dropped)
    #[arg(long, default_value_t = 13)]
    pub ncep: usize,
    /// Magnitude floor for the log-spectral distance
    #[arg(long, default_value_t = 1e-5)]
    pub floor: f64,
    #[arg(long, env = "RANKSPEC_JOBS")]
    pub jobs: Option<usize>,
}

struct PairResult {
    clip_id: String,
    reports: Vec<MetricReport>,
}

pub fn run(args: MetricsArgs) -> Result<()> {
    let refs = read_path_list(&args.ref_list)?;
    let ests = read_path_list(&args.est_list)?;
    if refs.len() != ests.len() {
        bail!(
            "paired lists differ in length: {} references vs {} estimates",
            refs.len(),
            ests.len()
        );
    }
    let preset = preset_or_default(args.preset.as_deref())?;

    let eval_pair = |(r_path, e_path): (&PathBuf, &PathBuf)| -> Result<PairResult> {
        let reference = rankspec_core::audio::load_wav(r_path)
            .with_context(|| format!("loading {}", r_path.display()))?;
        let estimate = rankspec_core::audio::load_wav(e_path)
            .with_context(|| format!("loading {}", e_path.display()))?;
        if reference.sample_rate_hz() != estimate.sample_rate_hz() {
            bail!(
                "{} is {} Hz but {} is {} Hz",
                r_path.display(),
                reference.sample_rate_hz(),
                e_path.display(),
                estimate.sample_rate_hz()
            );
        }
        let len = reference.len().min(estimate.len());
        let rate = reference.sample_rate_hz();
        let ref_trunc = Waveform::new(reference.samples()[..len].to_vec(), rate)?;
        let est_trunc = Waveform::new(estimate.samples()[..len].to_vec(), rate)?;

        let mcd_report = mcd(&ref_trunc, &est_trunc, args.mels, args.ncep, &preset.stft)?;
        let lsd_report = log_spectral_distance(
            &magnitude(&stft(&ref_trunc, &preset.stft)?),
            &magnitude(&stft(&est_trunc, &preset.stft)?),
            args.floor,
        )?;
        let si_report = si_snr(&ref_trunc, &est_trunc)?;
        Ok(PairResult {
            clip_id: clip_id_of(r_path),
            reports: vec![mcd_report, lsd_report, si_report],
        })
    };

    let pairs: Vec<(&PathBuf, &PathBuf)> = refs.iter().zip(ests.iter()).collect();
    let jobs = effective_jobs(args.jobs);
    let results: Vec<PairResult> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| {
            pairs
                .par_iter()
                .map(|p| eval_pair(*p))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        pairs
            .into_iter()
            .map(eval_pair)
            .collect::<Result<Vec<_>>>()?
    };

    std::fs::create_dir_all(&args.out)?;
    let jsonl_path = args.out.join("metrics.jsonl");
    let mut jsonl = BufWriter::new(File::create(&jsonl_path)?);
    for r in &results {
        for report in &r.reports {
            let mut value = serde_json::to_value(report)?;
            value["clip_id"] = serde_json::Value::String(r.clip_id.clone());
            writeln!(jsonl, "{value}")?;
        }
    }

    let csv_path = args.out.join("summary.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "clip_id,mcd_db,lsd_db,si_snr_db")?;
    let mut means = [0.0f64; 3];
    for r in &results {
        writeln!(
            csv,
            "{},{},{},{}",
            r.clip_id, r.reports[0].value, r.reports[1].value, r.reports[2].value
        )?;
        for (m, rep) in means.iter_mut().zip(&r.reports) {
            *m += rep.value / results.len() as f64;
        }
    }
    println!(
        "{} pairs: mean mcd={:.4} dB, mean lsd={:.4} dB, mean si-snr={:.4} dB",
        results.len(),
        means[0],
        means[1],
        means[2]
    );
    println!("wrote {} and {}", jsonl_path.display(), csv_path.display());
    Ok(())
}
