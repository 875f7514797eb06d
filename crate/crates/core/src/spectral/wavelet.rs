//! Orthonormal DB4 analysis and synthesis with periodic extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// DB4 scaling (low-pass) filter, 8 taps, sum = sqrt(2).
pub const DB4_SCALING: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_858,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Quadrature-mirror wavelet filter, `g[j] = (-1)^j h[7 - j]`.
const fn db4_wavelet() -> [f64; 8] {
    let h = DB4_SCALING;
    [h[7], -h[6], h[5], -h[4], h[3], -h[2], h[1], -h[0]]
}

const DB4_WAVELET: [f64; 8] = db4_wavelet();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Periodic,
}

/// Multilevel DB4 coefficients. `details[0]` is the finest band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub levels: usize,
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub boundary_mode: BoundaryMode,
    pub source_len: usize,
    pub fs: f64,
}

impl WaveletDecomposition {
    /// Coefficient bands ordered from lowest to highest frequency:
    /// approximation, then details from coarsest to finest.
    pub fn bands_low_to_high(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.approx.as_slice()).chain(self.details.iter().rev().map(Vec::as_slice))
    }

    pub fn energy(&self) -> f64 {
        self.bands_low_to_high()
            .flat_map(|b| b.iter())
            .map(|c| c * c)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.source_len;
        if self.levels == 0 {
            return Err(Error::Malformed("levels must be >= 1".into()));
        }
        if self.levels >= usize::BITS as usize || n == 0 || n % (1usize << self.levels) != 0 {
            return Err(Error::Malformed(format!(
                "source_len {n} not divisible by 2^{}",
                self.levels
            )));
        }
        if self.details.len() != self.levels {
            return Err(Error::Malformed(format!(
                "{} detail bands for {} levels",
                self.details.len(),
                self.levels
            )));
        }
        for (j, d) in self.details.iter().enumerate() {
            let want = n >> (j + 1);
            if d.len() != want {
                return Err(Error::Malformed(format!(
                    "detail level {} has {} coefficients, expected {want}",
                    j + 1,
                    d.len()
                )));
            }
        }
        if self.approx.len() != n >> self.levels {
            return Err(Error::Malformed(format!(
                "approximation has {} coefficients, expected {}",
                self.approx.len(),
                n >> self.levels
            )));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::Malformed(format!("bad sampling rate {}", self.fs)));
        }
        Ok(())
    }
}

/// One analysis step on an even-length block.
fn analysis_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..8 {
            let v = x[(2 * k + j) % n];
            a += DB4_SCALING[j] * v;
            d += DB4_WAVELET[j] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Transpose of [`analysis_step`].
fn synthesis_step(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let mut x = vec![0.0; n];
    for k in 0..half {
        for j in 0..8 {
            x[(2 * k + j) % n] += DB4_SCALING[j] * approx[k] + DB4_WAVELET[j] * detail[k];
        }
    }
    x
}

fn check_levels(len: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels >= usize::BITS as usize || len % (1usize << levels) != 0 {
        return Err(Error::BadLength { len, levels });
    }
    Ok(())
}

/// Returns `(approx, details finest-to-coarsest)`.
pub(crate) fn analysis_slice(x: &[f64], levels: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_levels(x.len(), levels)?;
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx);
        details.push(d);
        approx = a;
    }
    Ok((approx, details))
}

pub(crate) fn synthesis_slice(approx: &[f64], details: &[Vec<f64>]) -> Vec<f64> {
    details
        .iter()
        .rev()
        .fold(approx.to_vec(), |a, d| synthesis_step(&a, d))
}

/// Multilevel periodic DB4 decomposition. `len` must be divisible by `2^levels`.
pub fn dwt_db4(signal: &Signal, levels: usize) -> Result<WaveletDecomposition> {
    let (approx, details) = analysis_slice(signal.samples(), levels)?;
    Ok(WaveletDecomposition {
        levels,
        approx,
        details,
        boundary_mode: BoundaryMode::Periodic,
        source_len: signal.len(),
        fs: signal.fs(),
    })
}

pub fn idwt_db4(decomp: &WaveletDecomposition) -> Result<Signal> {
    decomp.validate()?;
    Signal::new(synthesis_slice(&decomp.approx, &decomp.details), decomp.fs)
}

/// Nominal `(lo, hi)` frequency range of each subband, lowest first,
/// in the same order as [`WaveletDecomposition::bands_low_to_high`].
pub fn subband_ranges(fs: f64, levels: usize) -> Vec<(f64, f64)> {
    let nyquist = fs / 2.0;
    let mut out = Vec::with_capacity(levels + 1);
    out.push((0.0, nyquist / (1u64 << levels) as f64));
    for j in (1..=levels).rev() {
        let hi = nyquist / (1u64 << (j - 1)) as f64;
        out.push((hi / 2.0, hi));
    }
    out
}

/// Energy per subband (sum of squared coefficients), lowest band first.
/// Frequencies are the nominal subband centres.
pub fn wavelet_mass(signal: &Signal, levels: usize) -> Result<crate::spectral::Spectrum> {
    let decomp = dwt_db4(signal, levels)?;
    let ranges = subband_ranges(signal.fs(), levels);
    Ok(crate::spectral::Spectrum {
        freqs: ranges.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        mags: decomp
            .bands_low_to_high()
            .map(|b| b.iter().map(|c| c * c).sum())
            .collect(),
        band: (0.0, signal.fs() / 2.0),
    })
}
