//! Sampled signals and the linear operators shared by every domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled, finite, non-empty real series.
///
/// Signals are immutable once built; every operator returns a new value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal")]
pub struct Signal {
    fs: f64,
    samples: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSignal {
    fs: f64,
    samples: Vec<f64>,
}

impl TryFrom<RawSignal> for Signal {
    type Error = Error;

    fn try_from(raw: RawSignal) -> Result<Self> {
        Signal::new(raw.samples, raw.fs)
    }
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sampling rate {fs} must be > 0"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Signal { fs, samples })
    }

    /// Builds a signal with the same sampling rate as `self`.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Signal::new(samples, self.fs)
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn fs(&self) -> f64 {
        self.fs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with slices.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Length in seconds, `len / fs`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn normalize(&self, mode: NormMode) -> Result<Signal> {
        normalize(self, mode)
    }

    pub fn second_difference(&self) -> Result<Signal> {
        second_difference(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Zero mean, unit sample standard deviation.
    Zscore,
    /// Affine map onto `[0, 1]`.
    Minmax,
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample (n - 1) standard deviation. Zero for a single sample.
pub(crate) fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

pub fn normalize(signal: &Signal, mode: NormMode) -> Result<Signal> {
    let x = signal.samples();
    let out = match mode {
        NormMode::Zscore => {
            let m = mean(x);
            let sd = sample_std(x);
            if sd == 0.0 || !sd.is_finite() {
                return Err(Error::ConstantSignal);
            }
            // Centre first, then rescale with the moments of the centred data
            // so that the output moments are as close to (0, 1) as f64 allows.
            let centred: Vec<f64> = x.iter().map(|v| v - m).collect();
            let m2 = mean(&centred);
            let centred: Vec<f64> = centred.iter().map(|v| v - m2).collect();
            let sd2 = sample_std(&centred);
            centred.iter().map(|v| v / sd2).collect()
        }
        NormMode::Minmax => {
            let (lo, hi) = min_max(x);
            if hi <= lo {
                return Err(Error::ConstantSignal);
            }
            let span = hi - lo;
            x.iter().map(|v| (v - lo) / span).collect()
        }
    };
    signal.with_samples(out)
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Unscaled central second difference with zeroed end points.
///
/// `y[n] = x[n+1] - 2 x[n] + x[n-1]` for interior `n`, `y[0] = y[N-1] = 0`.
/// No `fs^2` factor is applied.
pub fn second_difference(signal: &Signal) -> Result<Signal> {
    let y = second_difference_slice(signal.samples())?;
    signal.with_samples(y)
}

/// Transpose of [`second_difference`] as a linear map.
pub fn second_difference_adjoint(grad_out: &Signal) -> Result<Signal> {
    let y = second_difference_adjoint_slice(grad_out.samples())?;
    grad_out.with_samples(y)
}

pub(crate) fn second_difference_slice(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let mut y = vec![0.0; n];
    for i in 1..n - 1 {
        y[i] = x[i + 1] - 2.0 * x[i] + x[i - 1];
    }
    Ok(y)
}

pub(crate) fn second_difference_adjoint_slice(g: &[f64]) -> Result<Vec<f64>> {
    let n = g.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    // Row i of D (1 <= i <= n-2) touches columns i-1, i, i+1.
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let gi = g[i];
        out[i - 1] += gi;
        out[i] -= 2.0 * gi;
        out[i + 1] += gi;
    }
    Ok(out)
}

/// Fixed-length windows cut from a source signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Signal>,
    pub window_len: usize,
    pub stride: usize,
    pub source_len: usize,
}

impl PatchSet {
    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.patches.len()).map(move |i| i * self.stride)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Cuts every full window of `window_len` samples at multiples of `stride`.
/// A trailing partial window is dropped.
pub fn segment_patches(signal: &Signal, window_len: usize, stride: usize) -> Result<PatchSet> {
    let len = signal.len();
    if window_len == 0 || window_len > len || stride == 0 {
        return Err(Error::BadWindow {
            window_len,
            stride,
            len,
        });
    }
    let count = (len - window_len) / stride + 1;
    let patches = (0..count)
        .map(|k| {
            let start = k * stride;
            signal.with_samples(signal.samples()[start..start + window_len].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchSet {
        patches,
        window_len,
        stride,
        source_len: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(x: &[f64]) -> Signal {
        Signal::new(x.to_vec(), 30.0).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn rejects_invalid_construction() {
        assert!(Signal::new(vec![], 10.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0], -3.0).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 10.0).is_err());
        assert!(Signal::new(vec![f64::INFINITY], 10.0).is_err());
    }

    #[test]
    fn duration_is_len_over_fs() {
        let s = Signal::new(vec![0.0; 300], 30.0).unwrap();
        assert_eq!(s.duration(), 10.0);
    }

    #[test]
    fn zscore_small_example() {
        let z = sig(&[1.0, 2.0, 3.0]).normalize(NormMode::Zscore).unwrap();
        assert_eq!(z.samples(), &[-1.0, 0.0, 1.0]);
        assert_eq!(mean(z.samples()), 0.0);
        assert_eq!(sample_std(z.samples()), 1.0);
    }

    #[test]
    fn zscore_constant_is_error() {
        assert_eq!(
            sig(&[5.0, 5.0, 5.0]).normalize(NormMode::Zscore),
            Err(Error::ConstantSignal)
        );
        assert_eq!(
            sig(&[2.0, 2.0]).normalize(NormMode::Minmax),
            Err(Error::ConstantSignal)
        );
    }

    #[test]
    fn zscore_random_moments() {
        let z = sig(&random_vec(128, 11))
            .normalize(NormMode::Zscore)
            .unwrap();
        // moments recomputed independently on the output
        let n = z.len() as f64;
        let m: f64 = z.samples().iter().sum::<f64>() / n;
        let var: f64 = z.samples().iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(m.abs() < 1e-12, "mean {m}");
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minmax_range() {
        let z = sig(&[3.0, -1.0, 7.0, 0.0])
            .normalize(NormMode::Minmax)
            .unwrap();
        assert_eq!(z.samples(), &[0.5, 0.0, 1.0, 0.125]);
        assert_eq!(z.fs(), 30.0);
    }

    #[test]
    fn second_difference_ramp_and_quadratic() {
        let d = second_difference(&sig(&[0.0, 1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(d.samples(), &[0.0; 5]);
        let q: Vec<f64> = (0..5).map(|n| (n * n) as f64).collect();
        let d = second_difference(&sig(&q)).unwrap();
        assert_eq!(d.samples(), &[0.0, 2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn second_difference_too_short() {
        assert_eq!(
            second_difference(&sig(&[1.0, 2.0])),
            Err(Error::TooShort { needed: 3, got: 2 })
        );
        assert!(second_difference_adjoint(&sig(&[1.0])).is_err());
    }

    #[test]
    fn adjoint_of_zero_and_impulse() {
        let z = second_difference_adjoint(&sig(&[0.0; 7])).unwrap();
        assert_eq!(z.samples(), &[0.0; 7]);
        let mut e = vec![0.0; 7];
        e[3] = 1.0;
        let a = second_difference_adjoint(&sig(&e)).unwrap();
        assert_eq!(a.samples(), &[0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0]);
        // boundary impulses are annihilated by the zeroed rows
        let mut e0 = vec![0.0; 7];
        e0[0] = 1.0;
        assert_eq!(
            second_difference_adjoint(&sig(&e0)).unwrap().samples(),
            &[0.0; 7]
        );
    }

    #[test]
    fn adjoint_identity_random() {
        for (n, seed) in [(32usize, 1u64), (64, 2)] {
            let x = random_vec(n, seed);
            let y = random_vec(n, seed + 100);
            let dx = second_difference_slice(&x).unwrap();
            let dty = second_difference_adjoint_slice(&y).unwrap();
            assert!((dot(&dx, &y) - dot(&x, &dty)).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_counts() {
        let s = sig(&(0..10).map(f64::from).collect::<Vec<_>>());
        let p = segment_patches(&s, 10, 1).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.patches[0], s);

        let p = segment_patches(&s, 4, 3).unwrap();
        assert_eq!(p.starts().collect::<Vec<_>>(), vec![0, 3, 6]);
        assert_eq!(p.patches[2].samples(), &[6.0, 7.0, 8.0, 9.0]);

        let long = Signal::new(vec![0.0; 300], 30.0).unwrap();
        let p = segment_patches(&long, 60, 30).unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.patches.iter().all(|q| q.duration() == 2.0));
    }

    #[test]
    fn patch_errors() {
        let s = sig(&[1.0; 5]);
        assert!(matches!(
            segment_patches(&s, 0, 1),
            Err(Error::BadWindow { .. })
        ));
        assert!(matches!(
            segment_patches(&s, 6, 1),
            Err(Error::BadWindow { .. })
        ));
        assert!(matches!(
            segment_patches(&s, 2, 0),
            Err(Error::BadWindow { .. })
        ));
    }

    proptest! {
        #[test]
        fn second_difference_is_linear(seed in 0u64..1000, n in 3usize..128, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let x = random_vec(n, seed);
            let y = random_vec(n, seed ^ 0xabcd);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = second_difference_slice(&combo).unwrap();
            let dx = second_difference_slice(&x).unwrap();
            let dy = second_difference_slice(&y).unwrap();
            for i in 0..n {
                prop_assert!((lhs[i] - (a * dx[i] + b * dy[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn adjoint_identity_all_sizes(seed in 0u64..1000, n in 3usize..=256) {
            let x = random_vec(n, seed);
            let y = random_vec(n, seed + 7);
            let lhs = dot(&second_difference_slice(&x).unwrap(), &y);
            let rhs = dot(&x, &second_difference_adjoint_slice(&y).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn stride_equal_window_tiles_prefix(n in 1usize..200, w in 1usize..50) {
            prop_assume!(w <= n);
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
            let p = segment_patches(&Signal::new(x.clone(), 10.0).unwrap(), w, w).unwrap();
            prop_assert_eq!(p.len(), (n - w) / w + 1);
            let cat: Vec<f64> = p.patches.iter().flat_map(|q| q.samples().to_vec()).collect();
            prop_assert_eq!(&cat[..], &x[..cat.len()]);
        }

        #[test]
        fn zscore_idempotent(seed in 0u64..1000, n in 2usize..200) {
            let s = Signal::new(random_vec(n, seed), 25.0).unwrap();
            let once = s.normalize(NormMode::Zscore).unwrap();
            let twice = once.normalize(NormMode::Zscore).unwrap();
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
