//! Differentiable losses over the time, frequency and second-derivative
//! domains.
//!
//! Every loss returns a [`TermValue`]: the scalar value and its gradient with
//! respect to the predicted samples. The reference signal, where there is one,
//! is treated as a constant.

mod gradcheck;
mod soft_dtw;
mod sparsity;
mod total;
mod variance;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::{
    check_loss, finite_diff_check, finite_diff_gradient, GradCheckContext, GradCheckReport, LossId,
};
pub use soft_dtw::{
    hard_dtw, soft_dtw, soft_dtw_divergence, soft_dtw_grad, soft_dtw_pair_grad, soft_min,
    SoftDtwWorkspace,
};
pub use sparsity::{sparsity_freq, sparsity_freq_frozen, sparsity_sd, sparsity_time, FreqPeak};
pub use total::{effective_wavelet_levels, total_loss, LossBreakdown, LossContext};
pub use variance::{variance_loss, variance_loss_domain, Domain};

/// A loss value and its gradient with respect to the predicted signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl TermValue {
    pub(crate) fn zero(n: usize) -> Self {
        TermValue {
            value: 0.0,
            grad: vec![0.0; n],
        }
    }
}

/// A normalized, nonnegative mass vector over `d` ordered bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDistribution {
    mass: Vec<f64>,
}

impl MassDistribution {
    /// Accepts an already-normalized vector (sum within 1e-9 of 1).
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        Self::check_entries(&mass)?;
        let s: f64 = mass.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::BadConfig(format!("mass sums to {s}, expected 1")));
        }
        Ok(MassDistribution { mass })
    }

    /// Normalizes nonnegative weights by their sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        Self::check_entries(weights)?;
        let s: f64 = weights.iter().sum();
        if s == 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(MassDistribution {
            mass: weights.iter().map(|w| w / s).collect(),
        })
    }

    fn check_entries(mass: &[f64]) -> Result<()> {
        if mass.is_empty() {
            return Err(Error::Empty);
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::BadConfig(
                "mass entries must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn d(&self) -> usize {
        self.mass.len()
    }

    /// Running prefix sums.
    pub fn cdf(&self) -> Vec<f64> {
        self.mass
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtwCost {
    #[default]
    SquaredEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftDtwConfig {
    /// Soft-min temperature; 0 gives classical DTW.
    pub gamma: f64,
    pub cost: DtwCost,
    /// In the total loss, subtract the self-alignment terms so that the
    /// DTW terms vanish (with zero gradient) at `pred == ref`.
    pub debiased: bool,
}

impl Default for SoftDtwConfig {
    fn default() -> Self {
        SoftDtwConfig {
            gamma: 1.0,
            cost: DtwCost::SquaredEuclidean,
            debiased: true,
        }
    }
}

impl SoftDtwConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        SoftDtwConfig {
            gamma,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::BadConfig(format!(
                "soft-DTW gamma {} must be >= 0",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityFreqConfig {
    /// Search band `(a, b)` in Hz.
    pub band: (f64, f64),
    /// Half-width of the window around the spectral peak, Hz.
    pub delta_f: f64,
    /// Requested DB4 depth for the frequency-domain variance term.
    pub wavelet_levels: usize,
}

impl Default for SparsityFreqConfig {
    fn default() -> Self {
        SparsityFreqConfig {
            band: (0.5, 5.0),
            delta_f: 0.2,
            wavelet_levels: 4,
        }
    }
}

impl SparsityFreqConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        let (a, b) = self.band;
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::BadConfig(format!(
                "band ({a}, {b}) must satisfy 0 < a < b"
            )));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0) {
            return Err(Error::BadConfig(format!(
                "delta_f {} must be > 0",
                self.delta_f
            )));
        }
        if self.wavelet_levels == 0 {
            return Err(Error::BadConfig("wavelet_levels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Domain weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_sd: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.5,
            beta: 0.8,
            gamma_sd: 1.2,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        alpha: 0.0,
        beta: 0.0,
        gamma_sd: 0.0,
    };

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma_sd", self.gamma_sd),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::BadConfig(format!("{name} = {w} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn weight_of(&self, term: LossTerm) -> f64 {
        use LossTerm::*;
        match term {
            DtwT | SparsityT | VarianceT => self.alpha,
            SparsityF | VarianceF => self.beta,
            DtwSd | SparsitySd | VarianceSd => self.gamma_sd,
        }
    }
}

/// The eight terms of the combined objective, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossTerm {
    DtwT,
    SparsityT,
    VarianceT,
    SparsityF,
    VarianceF,
    DtwSd,
    SparsitySd,
    VarianceSd,
}

impl LossTerm {
    pub const ALL: [LossTerm; 8] = [
        LossTerm::DtwT,
        LossTerm::SparsityT,
        LossTerm::VarianceT,
        LossTerm::SparsityF,
        LossTerm::VarianceF,
        LossTerm::DtwSd,
        LossTerm::SparsitySd,
        LossTerm::VarianceSd,
    ];

    pub fn name(self) -> &'static str {
        use LossTerm::*;
        match self {
            DtwT => "dtw_t",
            SparsityT => "sparsity_t",
            VarianceT => "variance_t",
            SparsityF => "sparsity_f",
            VarianceF => "variance_f",
            DtwSd => "dtw_sd",
            SparsitySd => "sparsity_sd",
            VarianceSd => "variance_sd",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `sign(t)` with 0 at the kink.
#[inline]
pub(crate) fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn check_pair(x: &crate::Signal, y: &crate::Signal) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.fs() != y.fs() {
        return Err(Error::RateMismatch(x.fs(), y.fs()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_distribution_construction() {
        let m = MassDistribution::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(m.mass(), &[0.25, 0.75]);
        assert_eq!(m.cdf(), vec![0.25, 1.0]);
        assert_eq!(
            MassDistribution::from_weights(&[0.0, 0.0]),
            Err(Error::ZeroMass)
        );
        assert!(MassDistribution::from_weights(&[-1.0, 2.0]).is_err());
        assert!(MassDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(MassDistribution::new(vec![]).is_err());
    }

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!((w.alpha, w.beta, w.gamma_sd), (1.5, 0.8, 1.2));
        assert!(LossWeights { alpha: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn term_names_in_report_order() {
        let names: Vec<_> = LossTerm::ALL.iter().map(|t| t.name()).collect();
        assert_eq!(
            names,
            [
                "dtw_t",
                "sparsity_t",
                "variance_t",
                "sparsity_f",
                "variance_f",
                "dtw_sd",
                "sparsity_sd",
                "variance_sd"
            ]
        );
        for (i, t) in LossTerm::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
        }
    }
}
