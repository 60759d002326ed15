//! Proxy-phase generation for synthesizing time-domain inputs from a
//! magnitude spectrogram: all-zero phase, seeded random phase, or
//! Griffin-Lim alternating projections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::stft::{
    from_magnitude_phase, istft, magnitude, stft, MagnitudeSpectrogram, PhaseMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum GriffinLimInit {
    Zero,
    Random { seed: u64 },
}

/// Griffin-Lim parameters. Momentum 0 is the classical algorithm; positive
/// momentum enables the fast variant's extrapolation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GriffinLimConfig {
    pub iterations: usize,
    pub init: GriffinLimInit,
    pub momentum: f64,
}

impl GriffinLimConfig {
    pub fn new(iterations: usize, init: GriffinLimInit, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            iterations,
            init,
            momentum,
        })
    }

    /// Classical Griffin-Lim with K iterations and a seeded random start.
    pub fn classic(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            init: GriffinLimInit::Random { seed },
            momentum: 0.0,
        }
    }
}

/// How to fabricate the phase that accompanies a magnitude at synthesis time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseProxyKind {
    Zero,
    Random { seed: u64 },
    GriffinLim(GriffinLimConfig),
}

fn random_phase(rows: usize, cols: usize, seed: u64) -> PhaseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // pi - 2 pi u with u in [0, 1) lands in (-pi, pi]
    let angles = Mat::from_fn(rows, cols, |_, _| {
        let u: f64 = rng.gen();
        std::f64::consts::PI - 2.0 * std::f64::consts::PI * u
    });
    PhaseMatrix::from_mat(angles).expect("finite by construction")
}

/// Generate the proxy phase for `mag` according to `kind`.
pub fn make_proxy_phase(mag: &MagnitudeSpectrogram, kind: &PhaseProxyKind) -> Result<PhaseMatrix> {
    let (t, f) = mag.frames().shape();
    match kind {
        PhaseProxyKind::Zero => Ok(PhaseMatrix::zeros(t, f)),
        PhaseProxyKind::Random { seed } => Ok(random_phase(t, f, *seed)),
        PhaseProxyKind::GriffinLim(cfg) => Ok(griffin_lim(mag, cfg)?.0),
    }
}

/// Griffin-Lim starting from the config's built-in initialization.
/// Returns the final phase and the per-iteration spectral-convergence trace
/// `||c'| - mag||_F / ||mag||_F` (length `iterations`).
pub fn griffin_lim(
    mag: &MagnitudeSpectrogram,
    cfg: &GriffinLimConfig,
) -> Result<(PhaseMatrix, Vec<f64>)> {
    let (t, f) = mag.frames().shape();
    let init = match cfg.init {
        GriffinLimInit::Zero => PhaseMatrix::zeros(t, f),
        GriffinLimInit::Random { seed } => random_phase(t, f, seed),
    };
    griffin_lim_from(mag, &init, cfg)
}

/// Griffin-Lim from an explicit initial phase. A consistent
/// (magnitude, phase) pair is a fixed point: the trace stays at the
/// rounding floor (exactly so when the analyzed signal length was a hop
/// multiple, where istft(stft(x)) reproduces x at full length).
pub fn griffin_lim_from(
    mag: &MagnitudeSpectrogram,
    init: &PhaseMatrix,
    cfg: &GriffinLimConfig,
) -> Result<(PhaseMatrix, Vec<f64>)> {
    if init.shape() != mag.frames().shape() {
        return Err(Error::ShapeMismatch(format!(
            "initial phase {:?} vs magnitude {:?}",
            init.shape(),
            mag.frames().shape()
        )));
    }
    let mag_norm = mag.frames().frobenius_norm();
    let mut phase = init.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);
    // previous rebuilt spectrogram, for the momentum extrapolation
    let mut prev: Option<Vec<rustfft::num_complex::Complex64>> = None;
    let beta = cfg.momentum / (1.0 + cfg.momentum);

    for _ in 0..cfg.iterations {
        let c = from_magnitude_phase(mag, &phase)?;
        let x = istft(&c)?;
        let rebuilt = stft(&x, mag.config())?;
        debug_assert_eq!(rebuilt.n_frames(), mag.n_frames());

        let rebuilt_mag = magnitude(&rebuilt);
        let mut err = 0.0;
        for (a, b) in rebuilt_mag
            .frames()
            .as_slice()
            .iter()
            .zip(mag.frames().as_slice())
        {
            let d = a - b;
            err += d * d;
        }
        trace.push(err.sqrt() / mag_norm.max(f64::MIN_POSITIVE));

        let entries = rebuilt.entries().to_vec();
        let extrapolated: Vec<_> = match (&prev, beta > 0.0) {
            (Some(p), true) => entries
                .iter()
                .zip(p.iter())
                .map(|(cur, old)| cur - beta * old)
                .collect(),
            _ => entries.clone(),
        };
        prev = Some(entries);

        let angles = Mat::from_fn(mag.n_frames(), mag.n_bins(), |r, c| {
            let z = extrapolated[r * mag.n_bins() + c];
            if z.re == 0.0 && z.im == 0.0 {
                0.0
            } else {
                let a = z.im.atan2(z.re);
                if a == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    a
                }
            }
        });
        phase = PhaseMatrix::from_mat(angles)?;
    }
    Ok((phase, trace))
}

/// `istft(y_hat * e^(j phase))` with the proxy phase chosen by `kind`.
pub fn synthesize_proxy_waveform(
    y_hat: &MagnitudeSpectrogram,
    kind: &PhaseProxyKind,
) -> Result<Waveform> {
    let phase = make_proxy_phase(y_hat, kind)?;
    synthesize_from_phase(y_hat, &phase)
}

/// `istft(y_hat * e^(j phase))` with an explicit phase.
pub fn synthesize_from_phase(
    y_hat: &MagnitudeSpectrogram,
    phase: &PhaseMatrix,
) -> Result<Waveform> {
    istft(&from_magnitude_phase(y_hat, phase)?)
}
