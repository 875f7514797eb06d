use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Nonnegative magnitudes over a set of increasing frequency bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mags: Vec<f64>,
    pub band: (f64, f64),
}

impl Spectrum {
    /// Index of the largest magnitude; the first one wins on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.mags.iter().enumerate() {
            if m > self.mags[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak_freq(&self) -> f64 {
        self.freqs[self.argmax()]
    }

    pub fn total(&self) -> f64 {
        self.mags.iter().sum()
    }

    /// `freq_hz,magnitude` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,magnitude\n");
        for (f, m) in self.freqs.iter().zip(&self.mags) {
            out.push_str(&format!(
                "{},{}\n",
                crate::io::fmt_num(*f),
                crate::io::fmt_num(*m)
            ));
        }
        out
    }
}

/// Full-length forward DFT, `X_k = sum_n x_n exp(-2 pi i k n / N)`.
pub(crate) fn dft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// DFT bins `k` (0 ..= N/2) whose centre `k fs / N` lies inside `band`.
pub(crate) fn band_bins(n: usize, fs: f64, band: (f64, f64)) -> Result<Vec<usize>> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi || hi > fs / 2.0 {
        return Err(Error::BadBand { lo, hi, fs });
    }
    let bins: Vec<usize> = (0..=n / 2)
        .filter(|&k| {
            let f = k as f64 * fs / n as f64;
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::BadBand { lo, hi, fs });
    }
    Ok(bins)
}

/// `|X_k|` at the DFT bins inside `band`.
pub fn magnitude_spectrum(signal: &Signal, band: (f64, f64)) -> Result<Spectrum> {
    let n = signal.len();
    if n < 8 {
        return Err(Error::TooShort { needed: 8, got: n });
    }
    let fs = signal.fs();
    let bins = band_bins(n, fs, band)?;
    let spec = dft(signal.samples());
    Ok(Spectrum {
        freqs: bins.iter().map(|&k| k as f64 * fs / n as f64).collect(),
        mags: bins.iter().map(|&k| spec[k].norm()).collect(),
        band,
    })
}
