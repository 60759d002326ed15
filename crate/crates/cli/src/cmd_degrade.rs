//! `rankspec degrade`: write degraded WAVs with JSON provenance sidecars.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankspec_core::audio::{save_wav, WavEncoding, Waveform};
use rankspec_core::degrade::{measured_snr, mix_at_snr, vocoding_degrade, NoiseMixSpec};
use rankspec_core::mel::build_filterbank;
use rankspec_core::proxy_phase::{
    synthesize_proxy_waveform, GriffinLimConfig, GriffinLimInit, PhaseProxyKind,
};

use crate::common::{load_at_rate, preset_or_default};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DegradeTask {
    Denoise,
    Vocode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Zero,
    Random,
    GriffinLim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Pcm16,
    Float32,
}

#[derive(Args)]
pub struct DegradeArgs {
    #[arg(long, value_enum)]
    pub task: DegradeTask,
    /// Input speech wav
    #[arg(long)]
    pub speech: PathBuf,
    /// Noise wav (denoise task)
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Output wav path
    #[arg(long)]
    pub out: PathBuf,
    /// Analysis preset for the vocode task (stft + mel range)
    #[arg(long)]
    pub preset: Option<String>,
    /// Mixing SNR in dB (denoise task)
    #[arg(long, default_value_t = 5.0)]
    pub snr: f64,
    /// Noise amplitude multiplier (1 mild, 5 heavy)
    #[arg(long, default_value_t = 1.0)]
    pub noise_mult: f64,
    /// Mel band count (vocode task)
    #[arg(long)]
    pub mels: Option<usize>,
    /// Proxy phase for the vocode task
    #[arg(long, value_enum, default_value = "griffin-lim")]
    pub phase: PhaseArg,
    /// Griffin-Lim iteration count K
    #[arg(long, default_value_t = 32)]
    pub gl_iters: usize,
    /// Griffin-Lim momentum (0 = classical)
    #[arg(long, default_value_t = 0.0)]
    pub gl_momentum: f64,
    #[arg(long, value_enum, default_value = "float32")]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: DegradeArgs) -> Result<()> {
    let encoding = match args.encoding {
        EncodingArg::Pcm16 => WavEncoding::Pcm16,
        EncodingArg::Float32 => WavEncoding::Float32,
    };
    let provenance = match args.task {
        DegradeTask::Denoise => {
            let noise_path = args
                .noise
                .as_ref()
                .context("the denoise task needs --noise")?;
            let speech = rankspec_core::audio::load_wav(&args.speech)
                .with_context(|| format!("loading {}", args.speech.display()))?;
            let noise = load_at_rate(noise_path, speech.sample_rate_hz())?;
            let spec = NoiseMixSpec::new(args.snr, args.noise_mult)?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let (mixture, gain) = mix_at_snr(&speech, &noise, &spec, &mut rng)?;
            save_wav(&mixture, &args.out, encoding)?;
            let residual = Waveform::new(
                mixture
                    .samples()
                    .iter()
                    .zip(speech.samples())
                    .map(|(x, s)| x - s)
                    .collect(),
                speech.sample_rate_hz(),
            )?;
            serde_json::json!({
                "task": "denoise",
                "speech": args.speech,
                "noise": noise_path,
                "target_snr_db": args.snr,
                "noise_gain_multiplier": args.noise_mult,
                "applied_gain": gain,
                "measured_snr_db": measured_snr(&speech, &residual)?,
                "seed": args.seed,
                "sample_rate_hz": speech.sample_rate_hz(),
            })
        }
        DegradeTask::Vocode => {
            let preset = preset_or_default(args.preset.as_deref())?;
            let n_mels = args.mels.unwrap_or(preset.n_mels_default);
            let speech = load_at_rate(&args.speech, preset.sample_rate_hz)?;
            let bank = Arc::new(build_filterbank(&preset.mel_params(n_mels))?);
            let (y_hat, _) = vocoding_degrade(&speech, &bank, &preset.stft)?;
            let kind = match args.phase {
                PhaseArg::Zero => PhaseProxyKind::Zero,
                PhaseArg::Random => PhaseProxyKind::Random { seed: args.seed },
                PhaseArg::GriffinLim => PhaseProxyKind::GriffinLim(GriffinLimConfig::new(
                    args.gl_iters,
                    GriffinLimInit::Random { seed: args.seed },
                    args.gl_momentum,
                )?),
            };
            let out_wave = synthesize_proxy_waveform(&y_hat, &kind)?;
            save_wav(&out_wave, &args.out, encoding)?;
            serde_json::json!({
                "task": "vocode",
                "speech": args.speech,
                "preset": preset.name,
                "n_mels": n_mels,
                "proxy_phase": kind,
                "seed": args.seed,
                "sample_rate_hz": preset.sample_rate_hz,
                "stft": preset.stft,
            })
        }
    };

    let sidecar = args.out.with_extension(format!(
        "{}.json",
        args.out
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("wav")
    ));
    std::fs::write(&sidecar, serde_json::to_string_pretty(&provenance)?)
        .with_context(|| format!("writing {}", sidecar.display()))?;
    println!("wrote {} and {}", args.out.display(), sidecar.display());
    Ok(())
}
