use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::spectral::spectrum::{band_bins, dft};

/// Default heart-rate search band, 30–300 bpm.
pub const HR_BAND_HZ: (f64, f64) = (0.5, 5.0);

/// Minimum record length for a spectral HR estimate.
const MIN_DURATION_S: f64 = 5.0;

const PAD_FACTOR: usize = 8;

/// Heart rate in bpm from the largest in-band DFT magnitude.
pub fn spectral_peak_hr(signal: &Signal) -> Result<f64> {
    spectral_peak_hr_in_band(signal, HR_BAND_HZ)
}

/// As [`spectral_peak_hr`] over a caller-supplied band.
///
/// The record is mean-removed and zero-padded to eight times its length
/// before the transform. That leaves the non-DC bins of the plain spectrum
/// untouched while sampling its interpolation on a finer grid; the peak is
/// then refined with a three-point parabolic fit.
pub fn spectral_peak_hr_in_band(signal: &Signal, band: (f64, f64)) -> Result<f64> {
    if signal.duration() < MIN_DURATION_S {
        return Err(Error::TooShort {
            needed: (MIN_DURATION_S * signal.fs()).ceil() as usize,
            got: signal.len(),
        });
    }
    let fs = signal.fs();
    // validates the band against the unpadded grid
    band_bins(signal.len(), fs, band)?;

    let n = (PAD_FACTOR * signal.len()).next_power_of_two();
    let mean = signal.mean();
    let mut padded: Vec<f64> = signal.samples().iter().map(|v| v - mean).collect();
    padded.resize(n, 0.0);
    let bins = band_bins(n, fs, band)?;
    let spec = dft(&padded);
    let mag = |k: usize| spec[k].norm();

    let mut peak = bins[0];
    for &k in &bins {
        if mag(k) > mag(peak) {
            peak = k;
        }
    }
    if mag(peak) == 0.0 {
        return Err(Error::NoPeak);
    }

    let mut offset = 0.0;
    if peak > 0 && peak < n / 2 {
        let (a, b, c) = (mag(peak - 1), mag(peak), mag(peak + 1));
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    Ok(60.0 * (peak as f64 + offset) * fs / n as f64)
}
