//! Central finite-difference verification of the analytic gradients.

use std::str::FromStr;

use super::soft_dtw::{soft_dtw_pair_grad, soft_dtw_value};
use super::sparsity::{sparsity_freq_slice, sparsity_sd_slice, sparsity_time_slice};
use super::total::{effective_wavelet_levels, LossContext};
use super::variance::{normalized_cdf, raw_mass, variance_against_cdf};
use super::{Domain, LossWeights, SoftDtwConfig, SparsityFreqConfig};
use crate::error::{Error, Result};
use crate::signal::{second_difference_slice, Signal};

/// Gradients below this magnitude are not compared.
const GRAD_FLOOR: f64 = 1e-8;
/// Distance from a kink of `|.|` inside which a coordinate is skipped.
const KINK_MARGIN: f64 = 1e-6;

/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps` for every coordinate.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut p = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + eps;
        let hi = f(&p)?;
        p[i] = x[i] - eps;
        let lo = f(&p)?;
        p[i] = x[i];
        out.push((hi - lo) / (2.0 * eps));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped near a kink.
    pub skipped: usize,
}

/// Compares `analytic` against central differences of `f`.
///
/// Relative error is `|a - n| / |a|`, taken over coordinates with
/// `|a| > 1e-8` that `skip` does not exclude.
pub fn finite_diff_check<F, S>(
    f: F,
    x: &[f64],
    analytic: &[f64],
    eps: f64,
    skip: S,
) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<f64>,
    S: Fn(usize) -> bool,
{
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::BadConfig(format!("eps {eps} must be > 0")));
    }
    if analytic.len() != x.len() {
        return Err(Error::LengthMismatch(analytic.len(), x.len()));
    }
    let mut p = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped: 0,
    };
    for i in 0..x.len() {
        if skip(i) {
            report.skipped += 1;
            continue;
        }
        if analytic[i].abs() <= GRAD_FLOOR {
            continue;
        }
        p[i] = x[i] + eps;
        let hi = f(&p)?;
        p[i] = x[i] - eps;
        let lo = f(&p)?;
        p[i] = x[i];
        let numeric = (hi - lo) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs();
        report.checked += 1;
        if rel > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}

/// The differentiable losses that can be checked by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossId {
    SparsityTime,
    SparsitySd,
    SparsityFreq,
    VarianceTime,
    VarianceFreq,
    VarianceSd,
    SoftDtw,
    Total,
}

impl LossId {
    pub const ALL: [LossId; 8] = [
        LossId::SparsityTime,
        LossId::SparsitySd,
        LossId::SparsityFreq,
        LossId::VarianceTime,
        LossId::VarianceFreq,
        LossId::VarianceSd,
        LossId::SoftDtw,
        LossId::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossId::SparsityTime => "sparsity_time",
            LossId::SparsitySd => "sparsity_sd",
            LossId::SparsityFreq => "sparsity_freq",
            LossId::VarianceTime => "variance_time",
            LossId::VarianceFreq => "variance_freq",
            LossId::VarianceSd => "variance_sd",
            LossId::SoftDtw => "soft_dtw",
            LossId::Total => "total",
        }
    }

    fn needs_reference(self) -> bool {
        !matches!(
            self,
            LossId::SparsityTime | LossId::SparsitySd | LossId::SparsityFreq
        )
    }
}

impl FromStr for LossId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown loss `{s}`")))
    }
}

/// Everything besides the predicted signal that a loss may need.
#[derive(Debug, Clone)]
pub struct GradCheckContext {
    pub reference: Option<Signal>,
    pub weights: LossWeights,
    pub dtw: SoftDtwConfig,
    pub freq: SparsityFreqConfig,
}

impl GradCheckContext {
    pub fn new(reference: Option<Signal>) -> Self {
        GradCheckContext {
            reference,
            weights: LossWeights::default(),
            dtw: SoftDtwConfig::default(),
            freq: SparsityFreqConfig::default(),
        }
    }
}

fn near_time_kink(x: &[f64], i: usize, eps: f64) -> bool {
    x[i].abs() <= KINK_MARGIN + eps
}

fn near_sd_kink(sd: &[f64], i: usize, eps: f64) -> bool {
    let n = sd.len();
    let lo = i.saturating_sub(1).max(1);
    let hi = (i + 1).min(n - 2);
    (lo..=hi).any(|k| sd[k].abs() <= KINK_MARGIN + 2.0 * eps)
}

/// Runs [`finite_diff_check`] on a named loss at `x`.
///
/// Kinks of `|.|` are excluded for the losses that have them, and the
/// frequency-sparsity peak is frozen at its location for `x`.
pub fn check_loss(
    id: LossId,
    x: &Signal,
    ctx: &GradCheckContext,
    eps: f64,
) -> Result<GradCheckReport> {
    let xs = x.samples();
    let fs = x.fs();
    let reference = if id.needs_reference() {
        let r = ctx
            .reference
            .as_ref()
            .ok_or_else(|| Error::BadConfig(format!("{} needs a reference signal", id.name())))?;
        super::check_pair(x, r)?;
        Some(r.samples())
    } else {
        None
    };
    let no_skip = |_: usize| false;
    let sd = if xs.len() >= 3 {
        second_difference_slice(xs)?
    } else {
        Vec::new()
    };
    let time_skip = |i: usize| near_time_kink(xs, i, eps);
    let sd_skip = |i: usize| !sd.is_empty() && near_sd_kink(&sd, i, eps);

    match id {
        LossId::SparsityTime => {
            let g = sparsity_time_slice(xs).grad;
            finite_diff_check(|p| Ok(sparsity_time_slice(p).value), xs, &g, eps, time_skip)
        }
        LossId::SparsitySd => {
            let g = sparsity_sd_slice(xs)?.grad;
            finite_diff_check(|p| Ok(sparsity_sd_slice(p)?.value), xs, &g, eps, sd_skip)
        }
        LossId::SparsityFreq => {
            let (tv, peak) = sparsity_freq_slice(xs, fs, &ctx.freq, None)?;
            finite_diff_check(
                |p| Ok(sparsity_freq_slice(p, fs, &ctx.freq, Some(peak))?.0.value),
                xs,
                &tv.grad,
                eps,
                no_skip,
            )
        }
        LossId::VarianceTime | LossId::VarianceFreq | LossId::VarianceSd => {
            let y = reference.expect("checked above");
            let domain = match id {
                LossId::VarianceTime => Domain::Time,
                LossId::VarianceSd => Domain::SecondDerivative,
                _ => Domain::Wavelet {
                    levels: effective_wavelet_levels(xs.len(), ctx.freq.wavelet_levels)?,
                },
            };
            let ref_cdf = normalized_cdf(&raw_mass(y, domain)?)?;
            let g = variance_against_cdf(xs, &ref_cdf, domain)?.grad;
            let f = |p: &[f64]| Ok(variance_against_cdf(p, &ref_cdf, domain)?.value);
            match domain {
                Domain::Time => finite_diff_check(f, xs, &g, eps, time_skip),
                Domain::SecondDerivative => finite_diff_check(f, xs, &g, eps, sd_skip),
                Domain::Wavelet { .. } => finite_diff_check(f, xs, &g, eps, no_skip),
            }
        }
        LossId::SoftDtw => {
            let y = reference.expect("checked above");
            let (_, g, _) = soft_dtw_pair_grad(xs, y, &ctx.dtw)?;
            let gamma = ctx.dtw.gamma;
            finite_diff_check(|p| Ok(soft_dtw_value(p, y, gamma)), xs, &g, eps, no_skip)
        }
        LossId::Total => {
            let r = ctx.reference.as_ref().expect("checked above");
            let lc = LossContext::new(r, ctx.weights, ctx.dtw, ctx.freq)?;
            let (b, peak) = lc.evaluate_slice(xs, None)?;
            finite_diff_check(
                |p| Ok(lc.evaluate_slice(p, Some(peak))?.0.total),
                xs,
                &b.grad,
                eps,
                |i| time_skip(i) || sd_skip(i),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(n: usize, seed: u64, lo: f64, hi: f64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Signal::new((0..n).map(|_| rng.random_range(lo..hi)).collect(), 16.0).unwrap()
    }

    #[test]
    fn finite_diff_of_quadratic() {
        let g = finite_diff_gradient(|v| Ok(v[0] * v[0] + 3.0 * v[1]), &[2.0, -1.0], 1e-5).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x = [1.0, 2.0];
        let r = finite_diff_check(|v| Ok(v[0] * v[1]), &x, &[2.0, 1.5], 1e-6, |_| false).unwrap();
        assert_eq!(r.worst_index, Some(1));
        assert!((r.max_rel_error - 1.0 / 3.0).abs() < 1e-6);
        assert!(finite_diff_check(|v| Ok(v[0]), &x, &[1.0, 0.0], 0.0, |_| false).is_err());
    }

    #[test]
    fn sparsity_time_positive_signal() {
        let x = random_signal(64, 1, 0.1, 2.0);
        let r = check_loss(LossId::SparsityTime, &x, &GradCheckContext::new(None), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6);
        assert_eq!(r.checked, 64);
    }

    #[test]
    fn soft_dtw_gamma_one() {
        let x = random_signal(16, 2, -1.0, 1.0);
        let y = random_signal(16, 3, -1.0, 1.0);
        let r = check_loss(LossId::SoftDtw, &x, &GradCheckContext::new(Some(y)), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn total_loss_n64() {
        let x = random_signal(64, 4, -1.0, 1.0);
        let y = random_signal(64, 5, -1.0, 1.0);
        let r = check_loss(LossId::Total, &x, &GradCheckContext::new(Some(y)), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-3, "{r:?}");
        assert!(r.checked > 32);
    }

    #[test]
    fn missing_reference_is_reported() {
        let x = random_signal(16, 6, -1.0, 1.0);
        assert!(matches!(
            check_loss(LossId::Total, &x, &GradCheckContext::new(None), 1e-5),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn loss_names_parse() {
        for id in LossId::ALL {
            assert_eq!(id.name().parse::<LossId>().unwrap(), id);
        }
        assert!("bogus".parse::<LossId>().is_err());
    }
}
