//! Frequency-domain analysis: DFT magnitude spectra, periodic DB4 wavelets and
//! spectral-peak heart rate.

mod hr;
mod spectrum;
mod wavelet;

pub use hr::{spectral_peak_hr, spectral_peak_hr_in_band, HR_BAND_HZ};
pub use spectrum::{magnitude_spectrum, Spectrum};
pub use wavelet::{
    dwt_db4, idwt_db4, subband_ranges, wavelet_mass, BoundaryMode, WaveletDecomposition,
    DB4_SCALING,
};

pub(crate) use spectrum::{band_bins, dft};
pub(crate) use wavelet::{analysis_slice, synthesis_slice};
