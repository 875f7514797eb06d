use rustfft::num_complex::Complex64;

use super::{sign0, SparsityFreqConfig, TermValue};
use crate::error::{Error, Result};
use crate::signal::{second_difference_adjoint_slice, second_difference_slice, Signal};
use crate::spectral::{band_bins, dft};

/// `sum |x[n]|` over the whole window; gradient `sign(x)`.
pub fn sparsity_time(x: &Signal) -> TermValue {
    sparsity_time_slice(x.samples())
}

pub(crate) fn sparsity_time_slice(x: &[f64]) -> TermValue {
    TermValue {
        value: x.iter().map(|v| v.abs()).sum(),
        grad: x.iter().map(|&v| sign0(v)).collect(),
    }
}

/// `sum |x''[n]|` with the zero-boundary second difference.
pub fn sparsity_sd(x: &Signal) -> Result<TermValue> {
    sparsity_sd_slice(x.samples())
}

pub(crate) fn sparsity_sd_slice(x: &[f64]) -> Result<TermValue> {
    let d = second_difference_slice(x)?;
    let signs: Vec<f64> = d.iter().map(|&v| sign0(v)).collect();
    Ok(TermValue {
        value: d.iter().map(|v| v.abs()).sum(),
        grad: second_difference_adjoint_slice(&signs)?,
    })
}

/// Location of the in-band spectral peak, held fixed while differentiating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPeak {
    /// DFT bin index of the peak.
    pub bin: usize,
    pub freq_hz: f64,
}

/// Off-peak share of the in-band DFT magnitude.
///
/// Bins further than `delta_f` from the peak count as off-peak. The peak is
/// located by argmax and then treated as a constant, so the gradient flows
/// through the magnitudes only.
pub fn sparsity_freq(x: &Signal, cfg: &SparsityFreqConfig) -> Result<TermValue> {
    sparsity_freq_slice(x.samples(), x.fs(), cfg, None).map(|(tv, _)| tv)
}

/// As [`sparsity_freq`] with the peak bin supplied by the caller. Returns the
/// peak that was used.
pub fn sparsity_freq_frozen(
    x: &Signal,
    cfg: &SparsityFreqConfig,
    peak: Option<FreqPeak>,
) -> Result<(TermValue, FreqPeak)> {
    sparsity_freq_slice(x.samples(), x.fs(), cfg, peak)
}

pub(crate) fn sparsity_freq_slice(
    x: &[f64],
    fs: f64,
    cfg: &SparsityFreqConfig,
    peak: Option<FreqPeak>,
) -> Result<(TermValue, FreqPeak)> {
    cfg.validate()?;
    let n = x.len();
    if n < 8 {
        return Err(Error::TooShort { needed: 8, got: n });
    }
    let bins = band_bins(n, fs, cfg.band)?;
    let spec = dft(x);
    let mags: Vec<f64> = bins.iter().map(|&k| spec[k].norm()).collect();
    let total: f64 = mags.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroSpectrum);
    }

    let peak_bin = match peak {
        Some(p) => p.bin,
        None => {
            let mut best = 0;
            for (i, &m) in mags.iter().enumerate() {
                if m > mags[best] {
                    best = i;
                }
            }
            bins[best]
        }
    };
    let bin_width = fs / n as f64;
    let half_bins = cfg.delta_f / bin_width;
    let outside: Vec<bool> = bins
        .iter()
        .map(|&k| (k as f64 - peak_bin as f64).abs() > half_bins + 1e-9)
        .collect();

    let off: f64 = mags
        .iter()
        .zip(&outside)
        .filter(|(_, &o)| o)
        .map(|(m, _)| m)
        .sum();
    let value = off / total;

    // d(off/total)/dF_k = (1[k off-peak] - value) / total, then through |X_k|:
    // d|X_k|/dx_n = Re(conj(X_k) e^{-2 pi i k n / N}) / |X_k|.
    let mut coeff = vec![Complex64::new(0.0, 0.0); n];
    for ((&k, &m), &o) in bins.iter().zip(&mags).zip(&outside) {
        if m == 0.0 {
            continue;
        }
        let w = ((if o { 1.0 } else { 0.0 }) - value) / total;
        coeff[k] = spec[k].conj() * (w / m);
    }
    let back = dft_complex(coeff);
    let grad = back.iter().map(|c| c.re).collect();

    Ok((
        TermValue { value, grad },
        FreqPeak {
            bin: peak_bin,
            freq_hz: peak_bin as f64 * bin_width,
        },
    ))
}

fn dft_complex(mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let mut planner = rustfft::FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}
