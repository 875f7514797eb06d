use super::{check_pair, sign0, MassDistribution, TermValue};
use crate::error::{Error, Result};
use crate::signal::{second_difference_adjoint_slice, second_difference_slice, Signal};
use crate::spectral::{analysis_slice, synthesis_slice};

/// Mean squared difference between the CDFs of two mass vectors.
pub fn variance_loss(q: &MassDistribution, p: &MassDistribution) -> Result<f64> {
    if q.d() != p.d() {
        return Err(Error::DimensionMismatch(q.d(), p.d()));
    }
    let d = q.d() as f64;
    let s: f64 = q
        .cdf()
        .iter()
        .zip(p.cdf())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / d)
}

/// How a signal is turned into a mass vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `|x[n]|` per sample.
    Time,
    /// Energy per DB4 subband, lowest band first.
    Wavelet { levels: usize },
    /// `|x''[n]|` per sample.
    SecondDerivative,
}

/// Unnormalized mass of `x` in `domain`.
pub(crate) fn raw_mass(x: &[f64], domain: Domain) -> Result<Vec<f64>> {
    match domain {
        Domain::Time => Ok(x.iter().map(|v| v.abs()).collect()),
        Domain::SecondDerivative => Ok(second_difference_slice(x)?
            .iter()
            .map(|v| v.abs())
            .collect()),
        Domain::Wavelet { levels } => {
            let (approx, details) = analysis_slice(x, levels)?;
            let energy = |b: &[f64]| b.iter().map(|c| c * c).sum::<f64>();
            Ok(std::iter::once(energy(&approx))
                .chain(details.iter().rev().map(|d| energy(d)))
                .collect())
        }
    }
}

pub(crate) fn normalized_cdf(raw: &[f64]) -> Result<Vec<f64>> {
    Ok(MassDistribution::from_weights(raw)?.cdf())
}

/// CDF loss of `pred` against a precomputed reference CDF, with the gradient
/// chained back to the samples of `pred`.
pub(crate) fn variance_against_cdf(
    pred: &[f64],
    ref_cdf: &[f64],
    domain: Domain,
) -> Result<TermValue> {
    let raw = raw_mass(pred, domain)?;
    if raw.len() != ref_cdf.len() {
        return Err(Error::DimensionMismatch(raw.len(), ref_cdf.len()));
    }
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroMass);
    }
    let d = raw.len();
    let p: Vec<f64> = raw.iter().map(|m| m / total).collect();
    let mut cdf = Vec::with_capacity(d);
    let mut acc = 0.0;
    for v in &p {
        acc += v;
        cdf.push(acc);
    }
    let diff: Vec<f64> = cdf.iter().zip(ref_cdf).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|v| v * v).sum::<f64>() / d as f64;

    // dL/dp_j = sum_{i >= j} 2 diff_i / d
    let mut dp = vec![0.0; d];
    let mut suffix = 0.0;
    for j in (0..d).rev() {
        suffix += 2.0 * diff[j] / d as f64;
        dp[j] = suffix;
    }
    // through p = m / sum(m)
    let mean_dp: f64 = dp.iter().zip(&p).map(|(g, q)| g * q).sum();
    let dm: Vec<f64> = dp.iter().map(|g| (g - mean_dp) / total).collect();

    let grad = match domain {
        Domain::Time => pred.iter().zip(&dm).map(|(x, g)| sign0(*x) * g).collect(),
        Domain::SecondDerivative => {
            let dx = second_difference_slice(pred)?;
            let inner: Vec<f64> = dx.iter().zip(&dm).map(|(v, g)| sign0(*v) * g).collect();
            second_difference_adjoint_slice(&inner)?
        }
        Domain::Wavelet { levels } => {
            // d(sum c^2)/dc = 2c; the transform is orthonormal, so its
            // transpose is the synthesis operator.
            let (mut approx, mut details) = analysis_slice(pred, levels)?;
            approx.iter_mut().for_each(|c| *c *= 2.0 * dm[0]);
            for (j, band) in details.iter_mut().enumerate() {
                let g = dm[levels - j];
                band.iter_mut().for_each(|c| *c *= 2.0 * g);
            }
            synthesis_slice(&approx, &details)
        }
    };
    Ok(TermValue { value, grad })
}

/// CDF loss between the domain masses of `x_pred` and `x_ref`. The gradient is
/// with respect to `x_pred`; `x_ref` is a constant.
pub fn variance_loss_domain(x_pred: &Signal, x_ref: &Signal, domain: Domain) -> Result<TermValue> {
    check_pair(x_pred, x_ref)?;
    let ref_cdf = normalized_cdf(&raw_mass(x_ref.samples(), domain)?)?;
    variance_against_cdf(x_pred.samples(), &ref_cdf, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::finite_diff_gradient;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_mass(d: usize, seed: u64) -> MassDistribution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        MassDistribution::from_weights(&w).unwrap()
    }

    #[test]
    fn hand_case_half() {
        let q = MassDistribution::new(vec![1.0, 0.0]).unwrap();
        let p = MassDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(variance_loss(&q, &p).unwrap(), 0.5);
        assert_eq!(variance_loss(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let q = random_mass(3, 1);
        let p = random_mass(4, 2);
        assert_eq!(variance_loss(&q, &p), Err(Error::DimensionMismatch(3, 4)));
    }

    #[test]
    fn matches_independent_prefix_sum() {
        let q = random_mass(16, 10);
        let p = random_mass(16, 11);
        // second implementation: explicit double loop over prefixes
        let mut acc = 0.0;
        for i in 0..16 {
            let cq: f64 = q.mass()[..=i].iter().sum();
            let cp: f64 = p.mass()[..=i].iter().sum();
            acc += (cq - cp).powi(2);
        }
        assert!((variance_loss(&q, &p).unwrap() - acc / 16.0).abs() < 1e-12);
    }

    #[test]
    fn time_domain_hand_case() {
        let a = Signal::new(vec![1.0, 0.0], 1.0).unwrap();
        let b = Signal::new(vec![0.0, 1.0], 1.0).unwrap();
        assert_eq!(
            variance_loss_domain(&a, &b, Domain::Time).unwrap().value,
            0.5
        );
    }

    #[test]
    fn identical_inputs_zero_loss_and_gradient() {
        let x = Signal::new(random(64, 3), 16.0).unwrap();
        for domain in [
            Domain::Time,
            Domain::SecondDerivative,
            Domain::Wavelet { levels: 3 },
        ] {
            let tv = variance_loss_domain(&x, &x, domain).unwrap();
            assert_eq!(tv.value, 0.0);
            assert!(tv.grad.iter().all(|g| g.abs() < 1e-9));
        }
    }

    #[test]
    fn zero_mass_and_mismatch_errors() {
        let z = Signal::new(vec![0.0; 8], 4.0).unwrap();
        let x = Signal::new(random(8, 1), 4.0).unwrap();
        assert_eq!(
            variance_loss_domain(&z, &x, Domain::Time),
            Err(Error::ZeroMass)
        );
        assert_eq!(
            variance_loss_domain(&x, &z, Domain::Time),
            Err(Error::ZeroMass)
        );
        let short = Signal::new(random(6, 1), 4.0).unwrap();
        assert!(matches!(
            variance_loss_domain(&x, &short, Domain::Time),
            Err(Error::LengthMismatch(8, 6))
        ));
        let other_rate = Signal::new(random(8, 1), 5.0).unwrap();
        assert!(matches!(
            variance_loss_domain(&x, &other_rate, Domain::Time),
            Err(Error::RateMismatch(..))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pred = random(64, 31);
        let reference = random(64, 32);
        for domain in [
            Domain::Time,
            Domain::SecondDerivative,
            Domain::Wavelet { levels: 4 },
        ] {
            let ref_cdf = normalized_cdf(&raw_mass(&reference, domain).unwrap()).unwrap();
            let tv = variance_against_cdf(&pred, &ref_cdf, domain).unwrap();
            let fd = finite_diff_gradient(
                |p| Ok(variance_against_cdf(p, &ref_cdf, domain)?.value),
                &pred,
                1e-6,
            )
            .unwrap();
            let rel = tv
                .grad
                .iter()
                .zip(&fd)
                .filter(|(g, _)| g.abs() > 1e-8)
                .map(|(g, f)| (g - f).abs() / g.abs())
                .fold(0.0, f64::max);
            assert!(rel < 1e-3, "{domain:?}: {rel}");
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(seed in 0u64..10_000, d in 1usize..40) {
            let q = random_mass(d, seed);
            let p = random_mass(d, seed + 1);
            let a = variance_loss(&q, &p).unwrap();
            let b = variance_loss(&p, &q).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(variance_loss(&q, &q).unwrap(), 0.0);
        }
    }
}
