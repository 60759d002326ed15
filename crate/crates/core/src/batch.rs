//! Deterministic joint denoising/vocoding batch generation.
//!
//! Each batch draws one task (denoising with probability `p`, vocoding
//! otherwise) and fills `batch_size` examples of that task. Every batch
//! index owns an independent ChaCha stream derived from `(seed, index)`, so
//! parallel generation is bit-identical to sequential generation, and every
//! record stores the stream position it was built from, so any record can be
//! rebuilt in isolation.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, resample_linear, Waveform};
use crate::container::{self, Tensor, TensorData};
use crate::degrade::{mix_at_snr, NoiseMixSpec};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mel::{self, build_filterbank, MelFilterbank, MelParams};
use crate::proxy_phase::{
    synthesize_proxy_waveform, GriffinLimConfig, GriffinLimInit, PhaseProxyKind,
};
use crate::stft::{magnitude, stft, StftConfig};

const MAX_CLIP_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Denoising,
    Vocoding,
}

/// SNR sampling policy for the denoising task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SnrPool {
    /// Uniform over `[lo_db, hi_db]`.
    Uniform { lo_db: f64, hi_db: f64 },
    /// Uniform over an explicit list of values.
    Discrete { values_db: Vec<f64> },
}

impl SnrPool {
    fn validate(&self) -> Result<()> {
        match self {
            SnrPool::Uniform { lo_db, hi_db } => {
                if !(lo_db.is_finite() && hi_db.is_finite() && lo_db <= hi_db) {
                    return Err(Error::InvalidConfig(format!(
                        "snr pool needs lo <= hi, got [{lo_db}, {hi_db}]"
                    )));
                }
            }
            SnrPool::Discrete { values_db } => {
                if values_db.is_empty() || values_db.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "discrete snr pool must be nonempty and finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            SnrPool::Uniform { lo_db, hi_db } => rng.gen_range(*lo_db..=*hi_db),
            SnrPool::Discrete { values_db } => values_db[rng.gen_range(0..values_db.len())],
        }
    }
}

/// What the `input_feature` tensor holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum FeatureMode {
    /// Log-magnitude `T x F` frames.
    Tf,
    /// Waveform samples; vocoding inputs are synthesized with the proxy
    /// phase (per-record seeds are drawn from the record's stream).
    Time { proxy_phase: PhaseProxyKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatcherConfig {
    /// Probability of picking the denoising task for a batch.
    pub task_prob_denoising: f64,
    pub snr_pool: SnrPool,
    pub batch_size: usize,
    pub segment_samples: usize,
    pub sample_rate_hz: u32,
    pub stft: StftConfig,
    pub mel: MelParams,
    pub mode: FeatureMode,
    /// Floor for the log compression of T-F input features.
    pub log_floor: f64,
    pub seed: u64,
    pub speech_manifest: PathBuf,
    /// Required whenever `task_prob_denoising > 0`.
    pub noise_manifest: Option<PathBuf>,
}

impl BatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.task_prob_denoising) {
            return Err(Error::InvalidConfig(format!(
                "task probability must be in [0, 1], got {}",
                self.task_prob_denoising
            )));
        }
        self.snr_pool.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.segment_samples < self.stft.win_length() {
            return Err(Error::InvalidConfig(format!(
                "segment ({}) must cover at least one analysis window ({})",
                self.segment_samples,
                self.stft.win_length()
            )));
        }
        if self.mel.fft_size != self.stft.fft_size() {
            return Err(Error::InvalidConfig(format!(
                "mel fft_size ({}) must match stft fft_size ({})",
                self.mel.fft_size,
                self.stft.fft_size()
            )));
        }
        if self.mel.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::InvalidConfig(
                "mel sample rate must match batcher sample rate".into(),
            ));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig("log floor must be positive".into()));
        }
        if self.task_prob_denoising > 0.0 && self.noise_manifest.is_none() {
            return Err(Error::InvalidConfig(
                "denoising task enabled but no noise manifest given".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ManifestEntry {
    path: PathBuf,
    #[allow(dead_code)]
    duration_secs: Option<f64>,
}

/// Newline-delimited clip paths with an optional tab-separated duration
/// column; `#` starts a comment.
fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (p, dur) = match line.split_once('\t') {
            Some((p, d)) => {
                let dur = d.trim().parse::<f64>().map_err(|_| Error::Manifest {
                    path: path.to_path_buf(),
                    msg: format!("line {}: bad duration {d:?}", lineno + 1),
                })?;
                (p.trim(), Some(dur))
            }
            None => (line, None),
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(p),
            duration_secs: dur,
        });
    }
    if entries.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            msg: "no clips listed".into(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputFeature {
    /// Log-magnitude frames, `T x F`.
    Tf(Mat),
    /// Waveform samples.
    Time(Vec<f64>),
}

/// One training example plus the provenance needed to rebuild it.
#[derive(Debug, Clone)]
pub struct BatchRecord {
    pub task: TaskKind,
    pub input: InputFeature,
    pub target_waveform: Vec<f64>,
    /// Magnitude spectrogram of the clean segment, `T x F`.
    pub target_magnitude: Mat,
    pub clip_id: String,
    pub noise_clip_id: Option<String>,
    pub applied_snr_db: Option<f64>,
    pub applied_gain: Option<f64>,
    /// Resolved per-record proxy phase (time mode only).
    pub proxy_phase: Option<PhaseProxyKind>,
    /// ChaCha word position of the record stream when this record started.
    pub rng_cursor: u128,
}

/// Per-record metadata as stored in the batch file header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMeta {
    pub clip_id: String,
    pub noise_clip_id: Option<String>,
    pub applied_snr_db: Option<f64>,
    pub applied_gain: Option<f64>,
    pub proxy_phase: Option<PhaseProxyKind>,
    /// Hex-encoded 128-bit stream position.
    pub rng_cursor: String,
}

impl RecordMeta {
    fn from_record(r: &BatchRecord) -> Self {
        Self {
            clip_id: r.clip_id.clone(),
            noise_clip_id: r.noise_clip_id.clone(),
            applied_snr_db: r.applied_snr_db,
            applied_gain: r.applied_gain,
            proxy_phase: r.proxy_phase,
            rng_cursor: format!("{:#034x}", r.rng_cursor),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub index: u64,
    pub task: TaskKind,
    pub records: Vec<BatchRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchFileInfo {
    pub name: String,
    pub index: u64,
    pub task: TaskKind,
    pub bytes: u64,
    pub crc32: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub n_batches: u64,
    pub denoising_batches: u64,
    pub vocoding_batches: u64,
    pub config: BatcherConfig,
    pub files: Vec<BatchFileInfo>,
}

pub struct BatchGenerator {
    config: BatcherConfig,
    bank: std::sync::Arc<MelFilterbank>,
    speech: Vec<ManifestEntry>,
    noise: Vec<ManifestEntry>,
}

impl BatchGenerator {
    pub fn new(config: BatcherConfig) -> Result<Self> {
        config.validate()?;
        let speech = load_manifest(&config.speech_manifest)?;
        let noise = match &config.noise_manifest {
            Some(p) => load_manifest(p)?,
            None => Vec::new(),
        };
        let bank = std::sync::Arc::new(build_filterbank(&config.mel)?);
        Ok(Self {
            config,
            bank,
            speech,
            noise,
        })
    }

    pub fn config(&self) -> &BatcherConfig {
        &self.config
    }

    /// Independent stream for a batch index; parallel generation over
    /// indices reproduces sequential generation exactly.
    pub fn rng_for_batch(&self, batch_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(batch_index);
        rng
    }

    /// Denoising with probability `p`, vocoding otherwise.
    pub fn sample_task(&self, rng: &mut ChaCha8Rng) -> TaskKind {
        if rng.gen::<f64>() < self.config.task_prob_denoising {
            TaskKind::Denoising
        } else {
            TaskKind::Vocoding
        }
    }

    fn load_clip(&self, entry: &ManifestEntry) -> Result<Waveform> {
        let w = load_wav(&entry.path)?;
        if w.sample_rate_hz() == self.config.sample_rate_hz {
            Ok(w)
        } else {
            resample_linear(&w, self.config.sample_rate_hz)
        }
    }

    /// Cut a fixed-length segment at a random offset, zero-padding clips
    /// shorter than the segment.
    fn cut_segment(&self, w: &Waveform, rng: &mut ChaCha8Rng) -> Result<Waveform> {
        let seg = self.config.segment_samples;
        let mut out = vec![0.0f64; seg];
        if w.len() > seg {
            let offset = rng.gen_range(0..=w.len() - seg);
            out.copy_from_slice(&w.samples()[offset..offset + seg]);
        } else {
            out[..w.len()].copy_from_slice(w.samples());
        }
        Waveform::new(out, self.config.sample_rate_hz)
    }

    fn resolve_proxy(&self, kind: &PhaseProxyKind, rng: &mut ChaCha8Rng) -> PhaseProxyKind {
        match kind {
            PhaseProxyKind::Zero => PhaseProxyKind::Zero,
            PhaseProxyKind::Random { .. } => PhaseProxyKind::Random { seed: rng.gen() },
            PhaseProxyKind::GriffinLim(cfg) => {
                let init = match cfg.init {
                    GriffinLimInit::Zero => GriffinLimInit::Zero,
                    GriffinLimInit::Random { .. } => GriffinLimInit::Random { seed: rng.gen() },
                };
                PhaseProxyKind::GriffinLim(GriffinLimConfig {
                    iterations: cfg.iterations,
                    init,
                    momentum: cfg.momentum,
                })
            }
        }
    }

    pub fn build_denoising_example(&self, rng: &mut ChaCha8Rng) -> Result<BatchRecord> {
        if self.noise.is_empty() {
            return Err(Error::EmptyInput("noise manifest".into()));
        }
        let mut last_err = String::new();
        for _ in 0..MAX_CLIP_RETRIES {
            let cursor = rng.get_word_pos();
            let s_entry = &self.speech[rng.gen_range(0..self.speech.len())];
            let n_entry = &self.noise[rng.gen_range(0..self.noise.len())];

            let attempt = (|| -> Result<BatchRecord> {
                let speech = self.load_clip(s_entry)?;
                let clean = self.cut_segment(&speech, rng)?;
                let noise = self.load_clip(n_entry)?;
                let snr = self.config.snr_pool.sample(rng);
                let (mixture, gain) = mix_at_snr(&clean, &noise, &NoiseMixSpec::mild(snr), rng)?;

                let target_magnitude =
                    Mat::clone(magnitude(&stft(&clean, &self.config.stft)?).frames());
                let input = match &self.config.mode {
                    FeatureMode::Tf => {
                        let mag = magnitude(&stft(&mixture, &self.config.stft)?);
                        InputFeature::Tf(mag.log_compress(self.config.log_floor))
                    }
                    FeatureMode::Time { .. } => InputFeature::Time(mixture.samples().to_vec()),
                };
                Ok(BatchRecord {
                    task: TaskKind::Denoising,
                    input,
                    target_waveform: clean.into_samples(),
                    target_magnitude,
                    clip_id: s_entry.path.display().to_string(),
                    noise_clip_id: Some(n_entry.path.display().to_string()),
                    applied_snr_db: Some(snr),
                    applied_gain: Some(gain),
                    proxy_phase: None,
                    rng_cursor: cursor,
                })
            })();
            match attempt {
                Ok(record) => return Ok(record),
                Err(e) => {
                    last_err = e.to_string();
                    log::warn!(
                        "skipping denoising draw ({} + {}): {last_err}",
                        s_entry.path.display(),
                        n_entry.path.display()
                    );
                }
            }
        }
        Err(Error::ClipRetriesExhausted {
            attempts: MAX_CLIP_RETRIES,
            last: last_err,
        })
    }

    pub fn build_vocoding_example(&self, rng: &mut ChaCha8Rng) -> Result<BatchRecord> {
        let mut last_err = String::new();
        for _ in 0..MAX_CLIP_RETRIES {
            let cursor = rng.get_word_pos();
            let s_entry = &self.speech[rng.gen_range(0..self.speech.len())];

            let attempt = (|| -> Result<BatchRecord> {
                let speech = self.load_clip(s_entry)?;
                let clean = self.cut_segment(&speech, rng)?;
                let mag = magnitude(&stft(&clean, &self.config.stft)?);
                let mel_spec = mel::linear_to_mel(&mag, &self.bank)?;
                let y_hat = mel::mel_to_linear_pinv(&mel_spec)?;

                let mut proxy = None;
                let input = match &self.config.mode {
                    FeatureMode::Tf => {
                        InputFeature::Tf(mel::log_compress(y_hat.frames(), self.config.log_floor))
                    }
                    FeatureMode::Time { proxy_phase } => {
                        let resolved = self.resolve_proxy(proxy_phase, rng);
                        let w = synthesize_proxy_waveform(&y_hat, &resolved)?;
                        proxy = Some(resolved);
                        InputFeature::Time(w.into_samples())
                    }
                };
                Ok(BatchRecord {
                    task: TaskKind::Vocoding,
                    input,
                    target_waveform: clean.into_samples(),
                    target_magnitude: Mat::clone(mag.frames()),
                    clip_id: s_entry.path.display().to_string(),
                    noise_clip_id: None,
                    applied_snr_db: None,
                    applied_gain: None,
                    proxy_phase: proxy,
                    rng_cursor: cursor,
                })
            })();
            match attempt {
                Ok(record) => return Ok(record),
                Err(e) => {
                    last_err = e.to_string();
                    log::warn!(
                        "skipping vocoding draw ({}): {last_err}",
                        s_entry.path.display()
                    );
                }
            }
        }
        Err(Error::ClipRetriesExhausted {
            attempts: MAX_CLIP_RETRIES,
            last: last_err,
        })
    }

    /// Build batch `index`: one task draw, then `batch_size` records of it.
    pub fn build_batch(&self, index: u64) -> Result<Batch> {
        let mut rng = self.rng_for_batch(index);
        let task = self.sample_task(&mut rng);
        let mut records = Vec::with_capacity(self.config.batch_size);
        for _ in 0..self.config.batch_size {
            records.push(match task {
                TaskKind::Denoising => self.build_denoising_example(&mut rng)?,
                TaskKind::Vocoding => self.build_vocoding_example(&mut rng)?,
            });
        }
        Ok(Batch {
            index,
            task,
            records,
        })
    }

    /// Rebuild a single record from its stored stream position.
    pub fn rebuild_record(
        &self,
        batch_index: u64,
        task: TaskKind,
        cursor: u128,
    ) -> Result<BatchRecord> {
        let mut rng = self.rng_for_batch(batch_index);
        rng.set_word_pos(cursor);
        match task {
            TaskKind::Denoising => self.build_denoising_example(&mut rng),
            TaskKind::Vocoding => self.build_vocoding_example(&mut rng),
        }
    }

    /// Serialize a batch into container bytes.
    pub fn encode_batch(&self, batch: &Batch) -> Result<Vec<u8>> {
        let b = batch.records.len();
        let mut input_f32 = Vec::new();
        let mut input_shape: Option<Vec<usize>> = None;
        let mut target_wave_f32 = Vec::with_capacity(b * self.config.segment_samples);
        let mut target_mag_f32 = Vec::new();
        let mut mag_shape: Option<(usize, usize)> = None;

        for r in &batch.records {
            let shape = match &r.input {
                InputFeature::Tf(m) => {
                    input_f32.extend(m.as_slice().iter().map(|&v| v as f32));
                    vec![b, m.rows(), m.cols()]
                }
                InputFeature::Time(v) => {
                    input_f32.extend(v.iter().map(|&x| x as f32));
                    vec![b, v.len()]
                }
            };
            match &input_shape {
                None => input_shape = Some(shape),
                Some(expect) => {
                    if *expect != shape {
                        return Err(Error::ShapeMismatch(format!(
                            "batch {} mixes input shapes {:?} and {:?}",
                            batch.index, expect, shape
                        )));
                    }
                }
            }
            target_wave_f32.extend(r.target_waveform.iter().map(|&x| x as f32));
            target_mag_f32.extend(r.target_magnitude.as_slice().iter().map(|&v| v as f32));
            let s = r.target_magnitude.shape();
            match mag_shape {
                None => mag_shape = Some(s),
                Some(expect) if expect == s => {}
                Some(expect) => {
                    return Err(Error::ShapeMismatch(format!(
                        "batch {} mixes magnitude shapes {:?} and {:?}",
                        batch.index, expect, s
                    )));
                }
            }
        }
        let input_shape = input_shape.expect("batch is nonempty");
        let (mt, mf) = mag_shape.expect("batch is nonempty");

        let meta = serde_json::json!({
            "task": batch.task,
            "batch_index": batch.index,
            "seed": self.config.seed,
            "record_count": b,
            "config": self.config,
            "records": batch.records.iter().map(RecordMeta::from_record).collect::<Vec<_>>(),
        });
        let tensors = vec![
            Tensor::new("input_feature", input_shape, TensorData::F32(input_f32)),
            Tensor::new(
                "target_waveform",
                vec![b, self.config.segment_samples],
                TensorData::F32(target_wave_f32),
            ),
            Tensor::new(
                "target_magnitude",
                vec![b, mt, mf],
                TensorData::F32(target_mag_f32),
            ),
        ];
        container::encode("batch", &meta, &tensors)
    }

    pub fn batch_file_name(&self, index: u64) -> String {
        format!("batch-s{}-b{:06}.rsb", self.config.seed, index)
    }

    /// Generate `n_batches` batch files under `out_dir` plus an `RSM1`
    /// summary. `jobs > 1` parallelizes across batch indices; output bytes
    /// are identical either way.
    pub fn generate(
        &self,
        n_batches: u64,
        out_dir: impl AsRef<Path>,
        jobs: usize,
    ) -> Result<GenerateSummary> {
        let out_dir = out_dir.as_ref();
        std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;

        let write_one = |index: u64| -> Result<BatchFileInfo> {
            let batch = self.build_batch(index)?;
            let bytes = self.encode_batch(&batch)?;
            let name = self.batch_file_name(index);
            container::write_bytes_atomic(out_dir.join(&name), &bytes)?;
            Ok(BatchFileInfo {
                name,
                index,
                task: batch.task,
                bytes: bytes.len() as u64,
                crc32: format!("{:#010x}", crc32fast::hash(&bytes)),
            })
        };

        let mut files: Vec<BatchFileInfo> = if jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..n_batches)
                    .into_par_iter()
                    .map(write_one)
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            (0..n_batches).map(write_one).collect::<Result<Vec<_>>>()?
        };
        files.sort_by_key(|f| f.index);

        let summary = GenerateSummary {
            format: "RSM1".into(),
            version: 1,
            seed: self.config.seed,
            n_batches,
            denoising_batches: files
                .iter()
                .filter(|f| f.task == TaskKind::Denoising)
                .count() as u64,
            vocoding_batches: files
                .iter()
                .filter(|f| f.task == TaskKind::Vocoding)
                .count() as u64,
            config: self.config.clone(),
            files,
        };
        let summary_path = out_dir.join(self.summary_file_name());
        let text = serde_json::to_string_pretty(&summary)?;
        container::write_bytes_atomic(summary_path, text.as_bytes())?;
        Ok(summary)
    }

    pub fn summary_file_name(&self) -> String {
        format!("summary-s{}.rsm.json", self.config.seed)
    }
}
