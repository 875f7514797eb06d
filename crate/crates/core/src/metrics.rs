//! Waveform-fidelity and heart-rate accuracy metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Pearson correlation of two equal-length, nonconstant signals.
pub fn pearson(x: &Signal, y: &Signal) -> Result<f64> {
    pearson_slice(x.samples(), y.samples())
}

pub(crate) fn pearson_slice(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    // sqrt of the product keeps x vs x at exactly 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Discrete Fréchet distance between two value sequences.
pub fn frechet(x: &Signal, y: &Signal) -> Result<f64> {
    frechet_slice(x.samples(), y.samples())
}

pub(crate) fn frechet_slice(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    let m = y.len();
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    for (i, &a) in x.iter().enumerate() {
        for j in 0..m {
            let d = (a - y[j]).abs();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d.max(cur[j - 1]),
                (_, 0) => d.max(prev[0]),
                _ => d.max(prev[j].min(prev[j - 1]).min(cur[j - 1])),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Root mean squared difference.
pub fn rmse(x: &Signal, y: &Signal) -> Result<f64> {
    rmse_slice(x.samples(), y.samples())
}

pub(crate) fn rmse_slice(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Predicted and reference heart rates, one per recording or window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrSeriesPair {
    hr_pred: Vec<f64>,
    hr_true: Vec<f64>,
}

impl HrSeriesPair {
    pub fn new(hr_pred: Vec<f64>, hr_true: Vec<f64>) -> Result<Self> {
        if hr_pred.len() != hr_true.len() {
            return Err(Error::LengthMismatch(hr_pred.len(), hr_true.len()));
        }
        if hr_pred.is_empty() {
            return Err(Error::Empty);
        }
        if hr_pred
            .iter()
            .chain(&hr_true)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::BadConfig(
                "heart rates must be finite and > 0".into(),
            ));
        }
        Ok(HrSeriesPair { hr_pred, hr_true })
    }

    pub fn hr_pred(&self) -> &[f64] {
        &self.hr_pred
    }

    pub fn hr_true(&self) -> &[f64] {
        &self.hr_true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrErrorStats {
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub r: f64,
}

/// MAE, RMSE and Pearson r of predicted against true heart rates.
pub fn hr_error_stats(pair: &HrSeriesPair) -> Result<HrErrorStats> {
    let n = pair.hr_pred.len() as f64;
    let mae = pair
        .hr_pred
        .iter()
        .zip(&pair.hr_true)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    Ok(HrErrorStats {
        mae_bpm: mae,
        rmse_bpm: rmse_slice(&pair.hr_pred, &pair.hr_true)?,
        r: pearson_slice(&pair.hr_pred, &pair.hr_true)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sig(x: &[f64]) -> Signal {
        Signal::new(x.to_vec(), 10.0).unwrap()
    }

    /// Brute force over every monotone coupling.
    fn frechet_brute(x: &[f64], y: &[f64]) -> f64 {
        fn walk(x: &[f64], y: &[f64], i: usize, j: usize, worst: f64) -> f64 {
            let worst = worst.max((x[i] - y[j]).abs());
            if i == x.len() - 1 && j == y.len() - 1 {
                return worst;
            }
            let mut best = f64::INFINITY;
            if i + 1 < x.len() {
                best = best.min(walk(x, y, i + 1, j, worst));
            }
            if j + 1 < y.len() {
                best = best.min(walk(x, y, i, j + 1, worst));
            }
            if i + 1 < x.len() && j + 1 < y.len() {
                best = best.min(walk(x, y, i + 1, j + 1, worst));
            }
            best
        }
        walk(x, y, 0, 0, 0.0)
    }

    #[test]
    fn pearson_identity_and_negation() {
        let x = random(50, 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&sig(&x), &sig(&x)).unwrap(), 1.0);
        assert_eq!(pearson(&sig(&x), &sig(&neg)).unwrap(), -1.0);
        assert_eq!(
            pearson(&sig(&[1.0, 1.0]), &sig(&[1.0, 2.0])),
            Err(Error::ConstantInput)
        );
        assert!(pearson(&sig(&[1.0]), &sig(&[1.0])).is_err());
    }

    #[test]
    fn pearson_matches_covariance_formula() {
        let x = random(256, 2);
        let y = random(256, 3);
        let n = 256.0;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let want = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        assert!((pearson(&sig(&x), &sig(&y)).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn frechet_examples() {
        let x = random(20, 4);
        assert_eq!(frechet(&sig(&x), &sig(&x)).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.75).collect();
        assert!((frechet(&sig(&x), &sig(&shifted)).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(frechet_slice(&[], &[1.0]), Err(Error::Empty));
    }

    #[test]
    fn frechet_matches_brute_force() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8);
            let m = rng.random_range(1..=8);
            let x = random(n, seed * 2 + 1000);
            let y = random(m, seed * 2 + 1001);
            assert_eq!(frechet_slice(&x, &y).unwrap(), frechet_brute(&x, &y));
        }
    }

    #[test]
    fn rmse_examples() {
        let x = random(10, 5);
        assert_eq!(rmse(&sig(&x), &sig(&x)).unwrap(), 0.0);
        assert_eq!(
            rmse(&sig(&[0.0, 0.0]), &sig(&[3.0, 4.0])).unwrap(),
            12.5f64.sqrt()
        );
        assert_eq!(
            rmse(&sig(&[0.0]), &sig(&[3.0, 4.0])),
            Err(Error::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn rmse_matches_second_implementation() {
        let x = random(128, 6);
        let y = random(128, 7);
        let mut acc = 0.0;
        for i in 0..128 {
            acc += (x[i] - y[i]).powi(2) / 128.0;
        }
        assert!((rmse(&sig(&x), &sig(&y)).unwrap() - acc.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hr_stats() {
        let t = vec![60.0, 72.0, 90.0, 120.0];
        let same = hr_error_stats(&HrSeriesPair::new(t.clone(), t.clone()).unwrap()).unwrap();
        assert_eq!((same.mae_bpm, same.rmse_bpm, same.r), (0.0, 0.0, 1.0));
        let shifted: Vec<f64> = t.iter().map(|v| v + 2.0).collect();
        let s = hr_error_stats(&HrSeriesPair::new(shifted, t).unwrap()).unwrap();
        assert!((s.mae_bpm - 2.0).abs() < 1e-12);
        assert!((s.rmse_bpm - 2.0).abs() < 1e-12);
        assert!((s.r - 1.0).abs() < 1e-12);
        let flat = HrSeriesPair::new(vec![61.0, 62.0], vec![60.0, 60.0]).unwrap();
        assert_eq!(hr_error_stats(&flat), Err(Error::ConstantInput));
    }

    #[test]
    fn hr_stats_match_second_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t: Vec<f64> = (0..40).map(|_| rng.random_range(50.0..150.0)).collect();
        let p: Vec<f64> = t.iter().map(|v| v + rng.random_range(-5.0..5.0)).collect();
        let s = hr_error_stats(&HrSeriesPair::new(p.clone(), t.clone()).unwrap()).unwrap();
        let mut mae = 0.0;
        let mut mse = 0.0;
        for i in 0..40 {
            mae += (p[i] - t[i]).abs();
            mse += (p[i] - t[i]).powi(2);
        }
        assert!((s.mae_bpm - mae / 40.0).abs() < 1e-12);
        assert!((s.rmse_bpm - (mse / 40.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hr_pair_validation() {
        assert!(HrSeriesPair::new(vec![60.0], vec![]).is_err());
        assert!(HrSeriesPair::new(vec![], vec![]).is_err());
        assert!(HrSeriesPair::new(vec![0.0], vec![60.0]).is_err());
    }

    proptest! {
        #[test]
        fn frechet_symmetric_and_append_bound(seed in 0u64..10_000, n in 1usize..30, m in 1usize..30, v in -2.0f64..2.0) {
            let x = random(n, seed);
            let y = random(m, seed + 1);
            let f = frechet_slice(&x, &y).unwrap();
            prop_assert_eq!(f, frechet_slice(&y, &x).unwrap());
            let mut xa = x.clone();
            xa.push(v);
            let mut ya = y.clone();
            ya.push(v);
            let fa = frechet_slice(&xa, &ya).unwrap();
            prop_assert!(fa <= f);
            prop_assert!(fa >= (x[0] - y[0]).abs());
        }

        #[test]
        fn pearson_affine_invariant(seed in 0u64..10_000, a in 0.1f64..10.0, c in -5.0f64..5.0) {
            let x = random(64, seed);
            let y = random(64, seed + 1);
            let r = pearson_slice(&x, &y).unwrap();
            let xt: Vec<f64> = x.iter().map(|v| a * v + c).collect();
            prop_assert!((pearson_slice(&xt, &y).unwrap() - r).abs() < 1e-12);
            prop_assert!((pearson_slice(&y, &xt).unwrap() - r).abs() < 1e-12);
        }

        #[test]
        fn rmse_zero_iff_equal(seed in 0u64..10_000, n in 1usize..50) {
            let x = random(n, seed);
            let y = random(n, seed + 1);
            prop_assert!(rmse_slice(&x, &y).unwrap() > 0.0);
            prop_assert_eq!(rmse_slice(&x, &x).unwrap(), 0.0);
        }
    }
}
