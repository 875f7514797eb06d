use serde_json::json;

use super::soft_dtw::{divergence_with_self_ref, soft_dtw_pair_grad, soft_dtw_value};
use super::sparsity::{sparsity_freq_slice, sparsity_sd_slice, sparsity_time_slice};
use super::variance::{normalized_cdf, raw_mass, variance_against_cdf};
use super::{
    check_pair, Domain, FreqPeak, LossTerm, LossWeights, SoftDtwConfig, SparsityFreqConfig,
    TermValue,
};
use crate::error::{Error, Result};
use crate::signal::{second_difference_adjoint_slice, second_difference_slice, Signal};

/// All eight term values and gradients plus the weighted total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub terms: [TermValue; 8],
    pub weights: LossWeights,
    pub total: f64,
    pub grad: Vec<f64>,
}

impl LossBreakdown {
    pub fn term(&self, t: LossTerm) -> &TermValue {
        &self.terms[t.index()]
    }

    pub fn value(&self, t: LossTerm) -> f64 {
        self.terms[t.index()].value
    }

    /// Weighted sum of the term values.
    pub fn weighted_sum(weights: &LossWeights, values: &[f64; 8]) -> f64 {
        use LossTerm::*;
        let v = |t: LossTerm| values[t.index()];
        weights.alpha * (v(DtwT) + v(SparsityT) + v(VarianceT))
            + weights.beta * (v(SparsityF) + v(VarianceF))
            + weights.gamma_sd * (v(DtwSd) + v(SparsitySd) + v(VarianceSd))
    }

    fn assemble(terms: [TermValue; 8], weights: LossWeights) -> Self {
        let values: [f64; 8] = std::array::from_fn(|i| terms[i].value);
        let total = Self::weighted_sum(&weights, &values);
        let n = terms[0].grad.len();
        let mut grad = vec![0.0; n];
        for t in LossTerm::ALL {
            let w = weights.weight_of(t);
            if w == 0.0 {
                continue;
            }
            for (g, tg) in grad.iter_mut().zip(&terms[t.index()].grad) {
                *g += w * tg;
            }
        }
        LossBreakdown {
            terms,
            weights,
            total,
            grad,
        }
    }

    /// `{"terms": {name: {"value": v}}, "total": t, "weights": {...}}`
    pub fn report(&self) -> serde_json::Value {
        let mut terms = serde_json::Map::new();
        for t in LossTerm::ALL {
            terms.insert(t.name().into(), json!({ "value": self.value(t) }));
        }
        json!({
            "terms": terms,
            "total": self.total,
            "weights": {
                "alpha": self.weights.alpha,
                "beta": self.weights.beta,
                "gamma_sd": self.weights.gamma_sd,
            },
        })
    }
}

/// Largest depth `<= requested` for which `len` is divisible by `2^depth`.
pub fn effective_wavelet_levels(len: usize, requested: usize) -> Result<usize> {
    let mut levels = requested.min(len.trailing_zeros() as usize);
    while levels > 0 && len % (1usize << levels) != 0 {
        levels -= 1;
    }
    if levels == 0 {
        return Err(Error::BadLength {
            len,
            levels: requested.max(1),
        });
    }
    Ok(levels)
}

/// The combined objective against a fixed reference.
///
/// Everything that depends only on the reference (its second difference,
/// domain CDFs and DTW self-alignment values) is computed once here.
#[derive(Debug, Clone)]
pub struct LossContext {
    reference: Signal,
    ref_sd: Vec<f64>,
    weights: LossWeights,
    dtw: SoftDtwConfig,
    freq: SparsityFreqConfig,
    wavelet_levels: usize,
    ref_cdf_time: Vec<f64>,
    ref_cdf_freq: Vec<f64>,
    ref_cdf_sd: Vec<f64>,
    ref_self_t: f64,
    ref_self_sd: f64,
}

impl LossContext {
    pub fn new(
        reference: &Signal,
        weights: LossWeights,
        dtw: SoftDtwConfig,
        freq: SparsityFreqConfig,
    ) -> Result<Self> {
        weights.validate()?;
        dtw.validate()?;
        freq.validate()?;
        let y = reference.samples();
        let ref_sd = second_difference_slice(y)?;
        let wavelet_levels = effective_wavelet_levels(y.len(), freq.wavelet_levels)?;
        let (ref_self_t, ref_self_sd) = if dtw.debiased && dtw.gamma > 0.0 {
            (
                soft_dtw_value(y, y, dtw.gamma),
                soft_dtw_value(&ref_sd, &ref_sd, dtw.gamma),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(LossContext {
            reference: reference.clone(),
            weights,
            dtw,
            freq,
            wavelet_levels,
            ref_cdf_time: normalized_cdf(&raw_mass(y, Domain::Time)?)?,
            ref_cdf_freq: normalized_cdf(&raw_mass(
                y,
                Domain::Wavelet {
                    levels: wavelet_levels,
                },
            )?)?,
            ref_cdf_sd: normalized_cdf(&raw_mass(y, Domain::SecondDerivative)?)?,
            ref_sd,
            ref_self_t,
            ref_self_sd,
        })
    }

    pub fn reference(&self) -> &Signal {
        &self.reference
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    pub fn wavelet_levels(&self) -> usize {
        self.wavelet_levels
    }

    fn dtw_term(&self, x: &[f64], y: &[f64], ref_self: f64) -> Result<TermValue> {
        if self.dtw.debiased && self.dtw.gamma > 0.0 {
            divergence_with_self_ref(x, y, ref_self, &self.dtw)
        } else {
            let (v, gx, _) = soft_dtw_pair_grad(x, y, &self.dtw)?;
            Ok(TermValue { value: v, grad: gx })
        }
    }

    pub fn evaluate(&self, pred: &Signal) -> Result<LossBreakdown> {
        self.evaluate_frozen(pred, None).map(|(b, _)| b)
    }

    /// Evaluates with the frequency-sparsity peak optionally held fixed.
    pub fn evaluate_frozen(
        &self,
        pred: &Signal,
        peak: Option<FreqPeak>,
    ) -> Result<(LossBreakdown, FreqPeak)> {
        check_pair(pred, &self.reference)?;
        self.evaluate_slice(pred.samples(), peak)
    }

    pub(crate) fn evaluate_slice(
        &self,
        x: &[f64],
        peak: Option<FreqPeak>,
    ) -> Result<(LossBreakdown, FreqPeak)> {
        let n = x.len();
        if n != self.reference.len() {
            return Err(Error::LengthMismatch(n, self.reference.len()));
        }
        let y = self.reference.samples();
        let xsd = second_difference_slice(x)?;

        let dtw_t = self.dtw_term(x, y, self.ref_self_t)?;
        let dtw_sd = {
            let inner = self.dtw_term(&xsd, &self.ref_sd, self.ref_self_sd)?;
            TermValue {
                value: inner.value,
                grad: second_difference_adjoint_slice(&inner.grad)?,
            }
        };
        let (sparsity_f, peak) = match sparsity_freq_slice(x, self.reference.fs(), &self.freq, peak)
        {
            Ok(r) => r,
            // A prediction with no in-band content has nothing to concentrate.
            Err(Error::ZeroSpectrum) => (
                TermValue::zero(n),
                peak.unwrap_or(FreqPeak {
                    bin: 0,
                    freq_hz: 0.0,
                }),
            ),
            Err(e) => return Err(e),
        };
        let levels = self.wavelet_levels;
        let terms = [
            dtw_t,
            sparsity_time_slice(x),
            variance_against_cdf(x, &self.ref_cdf_time, Domain::Time)?,
            sparsity_f,
            variance_against_cdf(x, &self.ref_cdf_freq, Domain::Wavelet { levels })?,
            dtw_sd,
            sparsity_sd_slice(x)?,
            variance_against_cdf(x, &self.ref_cdf_sd, Domain::SecondDerivative)?,
        ];
        Ok((LossBreakdown::assemble(terms, self.weights), peak))
    }
}

/// The weighted eight-term objective of `x_pred` against `x_ref`.
pub fn total_loss(
    x_pred: &Signal,
    x_ref: &Signal,
    weights: &LossWeights,
    cfg: &SoftDtwConfig,
    fcfg: &SparsityFreqConfig,
) -> Result<LossBreakdown> {
    check_pair(x_pred, x_ref)?;
    LossContext::new(x_ref, *weights, *cfg, *fcfg)?.evaluate(x_pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{soft_dtw, sparsity_freq, sparsity_sd, sparsity_time};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(n: usize, seed: u64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Signal::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 16.0).unwrap()
    }

    #[test]
    fn wavelet_depth_reduction() {
        assert_eq!(effective_wavelet_levels(64, 4).unwrap(), 4);
        assert_eq!(effective_wavelet_levels(500, 4).unwrap(), 2);
        assert_eq!(effective_wavelet_levels(24, 4).unwrap(), 3);
        assert!(matches!(
            effective_wavelet_levels(33, 4),
            Err(Error::BadLength { .. })
        ));
    }

    #[test]
    fn matched_inputs_zero_alignment_and_variance_terms() {
        let x = random_signal(64, 1);
        let b = total_loss(
            &x,
            &x,
            &LossWeights::default(),
            &SoftDtwConfig::default(),
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        for t in [LossTerm::DtwT, LossTerm::DtwSd] {
            assert!(b.value(t).abs() < 1e-9, "{t}: {}", b.value(t));
        }
        for t in [
            LossTerm::VarianceT,
            LossTerm::VarianceF,
            LossTerm::VarianceSd,
        ] {
            assert_eq!(b.value(t), 0.0);
        }
        assert_eq!(b.value(LossTerm::SparsityT), sparsity_time(&x).value);
        assert_eq!(
            b.value(LossTerm::SparsitySd),
            sparsity_sd(&x).unwrap().value
        );
        let sf = sparsity_freq(&x, &SparsityFreqConfig::default()).unwrap();
        assert_eq!(b.value(LossTerm::SparsityF), sf.value);
    }

    #[test]
    fn hard_dtw_terms_vanish_on_matched_inputs() {
        let x = random_signal(32, 2);
        let cfg = SoftDtwConfig {
            debiased: false,
            ..SoftDtwConfig::with_gamma(0.0)
        };
        let b = total_loss(
            &x,
            &x,
            &LossWeights::default(),
            &cfg,
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        assert_eq!(b.value(LossTerm::DtwT), 0.0);
        assert_eq!(b.value(LossTerm::DtwSd), 0.0);
    }

    #[test]
    fn raw_dtw_term_matches_soft_dtw() {
        let x = random_signal(32, 3);
        let y = random_signal(32, 4);
        let cfg = SoftDtwConfig {
            debiased: false,
            ..SoftDtwConfig::with_gamma(0.5)
        };
        let b = total_loss(
            &x,
            &y,
            &LossWeights::default(),
            &cfg,
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        assert_eq!(b.value(LossTerm::DtwT), soft_dtw(&x, &y, &cfg).unwrap().0);
    }

    #[test]
    fn weighting_identity() {
        let x = random_signal(64, 5);
        let y = random_signal(64, 6);
        let w = LossWeights {
            alpha: 0.3,
            beta: 2.5,
            gamma_sd: 0.7,
        };
        let b = total_loss(
            &x,
            &y,
            &w,
            &SoftDtwConfig::default(),
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        let v = |t| b.value(t);
        use LossTerm::*;
        let want = 0.3 * (v(DtwT) + v(SparsityT) + v(VarianceT))
            + 2.5 * (v(SparsityF) + v(VarianceF))
            + 0.7 * (v(DtwSd) + v(SparsitySd) + v(VarianceSd));
        assert!((b.total - want).abs() < 1e-12);

        // hand-set term values
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let t = LossBreakdown::weighted_sum(&LossWeights::default(), &vals);
        assert_eq!(
            t,
            1.5 * (1.0 + 2.0 + 3.0) + 0.8 * (4.0 + 5.0) + 1.2 * (6.0 + 7.0 + 8.0)
        );
    }

    #[test]
    fn total_gradient_is_weighted_term_sum() {
        let x = random_signal(64, 7);
        let y = random_signal(64, 8);
        let w = LossWeights::default();
        let b = total_loss(
            &x,
            &y,
            &w,
            &SoftDtwConfig::default(),
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        for i in 0..64 {
            let s: f64 = LossTerm::ALL
                .iter()
                .map(|&t| w.weight_of(t) * b.term(t).grad[i])
                .sum();
            assert!((s - b.grad[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_errors() {
        let x = random_signal(64, 1);
        let short = random_signal(32, 1);
        let other = Signal::new(x.samples().to_vec(), 20.0).unwrap();
        let (w, c, f) = (
            LossWeights::default(),
            SoftDtwConfig::default(),
            SparsityFreqConfig::default(),
        );
        assert!(matches!(
            total_loss(&x, &short, &w, &c, &f),
            Err(Error::LengthMismatch(..))
        ));
        assert!(matches!(
            total_loss(&x, &other, &w, &c, &f),
            Err(Error::RateMismatch(..))
        ));
    }

    #[test]
    fn report_shape() {
        let x = random_signal(32, 9);
        let y = random_signal(32, 10);
        let b = total_loss(
            &x,
            &y,
            &LossWeights::default(),
            &SoftDtwConfig::default(),
            &SparsityFreqConfig::default(),
        )
        .unwrap();
        let r = b.report();
        assert_eq!(r["terms"].as_object().unwrap().len(), 8);
        assert_eq!(r["weights"]["alpha"], 1.5);
        assert_eq!(r["total"].as_f64().unwrap(), b.total);
        assert!(r["terms"]["variance_sd"]["value"].is_number());
    }
}
