//! Seeded two-Gaussian PPG generator.
//!
//! Each beat is a systolic Gaussian of height 1 a quarter period after the
//! beat start plus a diastolic Gaussian of height `diastolic_amp` a further
//! `diastolic_delay_s` later. Both bumps are `exp(-((t - c) / w)^2)` with the
//! shared width `w = systolic_width_s`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub hr_bpm: f64,
    pub fs: f64,
    pub duration_s: f64,
    pub systolic_width_s: f64,
    pub diastolic_amp: f64,
    pub diastolic_delay_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            hr_bpm: 72.0,
            fs: 100.0,
            duration_s: 10.0,
            systolic_width_s: 0.12,
            diastolic_amp: 0.4,
            diastolic_delay_s: 0.30,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn new(hr_bpm: f64, fs: f64, duration_s: f64, seed: u64) -> Self {
        SynthConfig {
            hr_bpm,
            fs,
            duration_s,
            seed,
            ..Default::default()
        }
    }

    pub fn period_s(&self) -> f64 {
        60.0 / self.hr_bpm
    }

    /// Standard deviation of each bump.
    pub fn sigma_s(&self) -> f64 {
        self.systolic_width_s * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Offset of the systolic centre from the beat start.
    pub fn systolic_offset_s(&self) -> f64 {
        self.period_s() / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.into()));
        if !(30.0..=300.0).contains(&self.hr_bpm) {
            return bad("hr_bpm must lie in [30, 300]");
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return bad("fs must be finite and > 0");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration_s must be finite and > 0");
        }
        if (self.fs * self.duration_s).round() < 1.0 {
            return bad("fs * duration_s rounds to zero samples");
        }
        if !(self.systolic_width_s.is_finite() && self.systolic_width_s > 0.0) {
            return bad("systolic_width_s must be finite and > 0");
        }
        if !(0.0..1.0).contains(&self.diastolic_amp) {
            return bad("diastolic_amp must lie in [0, 1)");
        }
        if !(self.diastolic_delay_s >= 0.0 && self.diastolic_delay_s < self.period_s()) {
            return bad("diastolic_delay_s must lie in [0, beat period)");
        }
        Ok(())
    }

    /// Noise-free value of the beat train at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let period = self.period_s();
        let off = self.systolic_offset_s();
        // only beats within a few widths contribute above rounding level
        let sigma = self.sigma_s();
        let reach = 10.0 * sigma + self.diastolic_delay_s;
        let k_lo = ((t - off - reach) / period).floor() as i64;
        let k_hi = ((t - off + reach) / period).ceil() as i64;
        (k_lo..=k_hi)
            .map(|k| {
                let c = k as f64 * period + off;
                gauss(t - c, sigma)
                    + self.diastolic_amp * gauss(t - c - self.diastolic_delay_s, sigma)
            })
            .sum()
    }
}

fn gauss(dt: f64, sigma: f64) -> f64 {
    (-0.5 * (dt / sigma) * (dt / sigma)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub white_sigma: f64,
    pub baseline_amp: f64,
    pub baseline_freq_hz: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            white_sigma: 0.0,
            baseline_amp: 0.0,
            baseline_freq_hz: 0.2,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn white(sigma: f64, seed: u64) -> Self {
        NoiseConfig {
            white_sigma: sigma,
            seed,
            ..Default::default()
        }
    }
}

/// Generated signal plus the construction's ground truth. Serializes to the
/// metadata sidecar (the signal itself is written separately).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthPpg {
    #[serde(skip)]
    pub signal: Signal,
    pub hr_bpm: f64,
    pub fs: f64,
    /// Systolic bump centres inside the record, seconds.
    pub systolic_times_s: Vec<f64>,
    /// Diastolic bump centres inside the record, seconds. Empty when the
    /// diastolic amplitude is 0.
    pub diastolic_times_s: Vec<f64>,
    pub config: SynthConfig,
}

impl SynthPpg {
    /// Nearest sample index of each systolic centre.
    pub fn systolic_indices(&self) -> Vec<usize> {
        self.systolic_times_s
            .iter()
            .map(|t| (t * self.fs).round() as usize)
            .collect()
    }

    pub fn metadata_json(&self) -> String {
        crate::io::to_json_string(self).expect("metadata is plain numbers")
    }
}

pub fn synth_ppg(cfg: &SynthConfig) -> Result<SynthPpg> {
    cfg.validate()?;
    let n = (cfg.fs * cfg.duration_s).round() as usize;
    let samples: Vec<f64> = (0..n).map(|i| cfg.eval(i as f64 / cfg.fs)).collect();
    let dur = n as f64 / cfg.fs;

    let period = cfg.period_s();
    let mut systolic = Vec::new();
    let mut diastolic = Vec::new();
    let mut k = 0usize;
    loop {
        let c = k as f64 * period + cfg.systolic_offset_s();
        if c >= dur {
            break;
        }
        systolic.push(c);
        let d = c + cfg.diastolic_delay_s;
        if cfg.diastolic_amp > 0.0 && d < dur {
            diastolic.push(d);
        }
        k += 1;
    }
    // Before the first systolic centre the previous beat's diastolic bump may
    // also poke into the record.
    let prev_d = cfg.systolic_offset_s() - period + cfg.diastolic_delay_s;
    if cfg.diastolic_amp > 0.0 && prev_d >= 0.0 {
        diastolic.insert(0, prev_d);
    }

    Ok(SynthPpg {
        signal: Signal::new(samples, cfg.fs)?,
        hr_bpm: cfg.hr_bpm,
        fs: cfg.fs,
        systolic_times_s: systolic,
        diastolic_times_s: diastolic,
        config: cfg.clone(),
    })
}

/// Adds white Gaussian noise and a baseline sinusoid `amp sin(2 pi f t)`.
pub fn add_noise(signal: &Signal, cfg: &NoiseConfig) -> Signal {
    let mut out = signal.samples().to_vec();
    if cfg.white_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.white_sigma).expect("sigma is finite and > 0");
        for v in &mut out {
            *v += normal.sample(&mut rng);
        }
    }
    if cfg.baseline_amp != 0.0 {
        let w = 2.0 * std::f64::consts::PI * cfg.baseline_freq_hz / signal.fs();
        for (i, v) in out.iter_mut().enumerate() {
            *v += cfg.baseline_amp * (w * i as f64).sin();
        }
    }
    signal
        .with_samples(out)
        .expect("finite noise keeps the signal valid")
}
