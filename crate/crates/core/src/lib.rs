//! Multi-domain differentiable losses for pulse-waveform reconstruction.
//!
//! The crate is organised around [`Signal`], a uniformly sampled real series.
//! On top of it sit:
//!
//! - [`spectral`]: DFT magnitude spectra, periodic DB4 wavelet analysis and
//!   spectral-peak heart-rate estimation;
//! - [`losses`]: sparsity, CDF-variance and soft-DTW losses over the time,
//!   frequency and second-derivative domains, each with an analytic gradient,
//!   plus the weighted total and a finite-difference checker;
//! - [`morphology`]: beat onsets, systolic/diastolic fiducials and the
//!   second-derivative a–e waves;
//! - [`synth`]: a seeded two-Gaussian PPG generator used as ground truth;
//! - [`metrics`]: Pearson, discrete Fréchet, RMSE and HR error statistics;
//! - [`reconstruct`]: first-order descent on the total loss;
//! - [`kernels`]: the scaled cosine attention similarity kernel.

pub mod error;
pub mod io;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod reconstruct;
pub mod signal;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use losses::{
    LossBreakdown, LossTerm, LossWeights, MassDistribution, SoftDtwConfig, SparsityFreqConfig,
    TermValue,
};
pub use metrics::{HrErrorStats, HrSeriesPair};
pub use morphology::{Beat, FiducialSet};
pub use reconstruct::{OptimConfig, OptimMethod, ReconstructionResult};
pub use signal::{NormMode, PatchSet, Signal};
pub use spectral::{Spectrum, WaveletDecomposition};
pub use synth::{NoiseConfig, SynthConfig, SynthPpg};
