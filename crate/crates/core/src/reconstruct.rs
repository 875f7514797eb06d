//! First-order descent on the total loss, with the raw samples as the
//! optimization variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::losses::{
    check_pair, LossBreakdown, LossContext, LossTerm, LossWeights, SoftDtwConfig,
    SparsityFreqConfig,
};
use crate::metrics::{frechet_slice, pearson_slice, rmse_slice};
use crate::signal::Signal;
use crate::spectral::spectral_peak_hr;

/// Totals above this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Window, in iterations, for the relative-decrease stopping rule.
pub const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimMethod {
    PlainGd,
    Momentum,
    /// Per-coordinate steps from decayed first and second gradient moments.
    AdaptiveMoments,
}

impl std::str::FromStr for OptimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_gd" => Ok(OptimMethod::PlainGd),
            "momentum" => Ok(OptimMethod::Momentum),
            "adaptive_moments" => Ok(OptimMethod::AdaptiveMoments),
            other => Err(Error::Parse(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_iters: usize,
    pub step: f64,
    pub method: OptimMethod,
    /// Stop once the best total has dropped by less than this fraction over
    /// the last [`STALL_WINDOW`] iterations.
    pub tol: f64,
    /// Recorded for provenance; the descent itself draws no random numbers.
    pub seed: u64,
    pub log_every: usize,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iters: 2000,
            step: 0.05,
            method: OptimMethod::AdaptiveMoments,
            tol: 1e-6,
            seed: 0,
            log_every: 1,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::BadConfig("step must be finite and > 0".into()));
        }
        if self.max_iters == 0 || self.log_every == 0 {
            return Err(Error::BadConfig(
                "max_iters and log_every must be >= 1".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::BadConfig("tol must be >= 0".into()));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(unit(self.momentum) && unit(self.beta1) && unit(self.beta2)) || !(self.eps > 0.0) {
            return Err(Error::BadConfig(
                "momentum and moment decays must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Best-so-far loss at one logged iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub total: f64,
    pub terms: [f64; 8],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    /// `None` when the result is constant.
    pub pearson: Option<f64>,
    pub rmse: f64,
    pub frechet: f64,
    /// `None` when either record is too short for a spectral estimate.
    pub hr_error_bpm: Option<f64>,
}

impl FinalMetrics {
    pub fn compute(result: &Signal, reference: &Signal) -> Result<Self> {
        let (x, y) = (result.samples(), reference.samples());
        let pearson = match pearson_slice(x, y) {
            Ok(r) => Some(r),
            Err(Error::ConstantInput) => None,
            Err(e) => return Err(e),
        };
        let hr_error_bpm = match (spectral_peak_hr(result), spectral_peak_hr(reference)) {
            (Ok(a), Ok(b)) => Some((a - b).abs()),
            _ => None,
        };
        Ok(FinalMetrics {
            pearson,
            rmse: rmse_slice(x, y)?,
            frechet: frechet_slice(x, y)?,
            hr_error_bpm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub final_signal: Signal,
    pub loss_trace: Vec<TraceEntry>,
    pub iters_run: usize,
    pub final_metrics: FinalMetrics,
    /// Breakdown at the returned candidate.
    pub final_loss: LossBreakdown,
}

impl ReconstructionResult {
    pub const TRACE_HEADER: &'static str =
        "iter,total,dtw_t,sparsity_t,variance_t,sparsity_f,variance_f,dtw_sd,sparsity_sd,variance_sd";

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(Self::TRACE_HEADER);
        out.push('\n');
        for e in &self.loss_trace {
            out.push_str(&e.iter.to_string());
            out.push(',');
            out.push_str(&fmt_num(e.total));
            for v in e.terms {
                out.push(',');
                out.push_str(&fmt_num(v));
            }
            out.push('\n');
        }
        out
    }
}

enum Stepper {
    Plain,
    Momentum { v: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Stepper {
    fn new(method: OptimMethod, n: usize) -> Self {
        match method {
            OptimMethod::PlainGd => Stepper::Plain,
            OptimMethod::Momentum => Stepper::Momentum { v: vec![0.0; n] },
            OptimMethod::AdaptiveMoments => Stepper::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn apply(&mut self, x: &mut [f64], g: &[f64], c: &OptimConfig) {
        match self {
            Stepper::Plain => {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= c.step * gi;
                }
            }
            Stepper::Momentum { v } => {
                for ((xi, vi), gi) in x.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = c.momentum * *vi - c.step * gi;
                    *xi += *vi;
                }
            }
            Stepper::Adam { m, v, t } => {
                *t += 1;
                let b1t = 1.0 - c.beta1.powi(*t);
                let b2t = 1.0 - c.beta2.powi(*t);
                for i in 0..x.len() {
                    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                    let mh = m[i] / b1t;
                    let vh = v[i] / b2t;
                    x[i] -= c.step * mh / (vh.sqrt() + c.eps);
                }
            }
        }
    }
}

fn trace_entry(iter: usize, b: &LossBreakdown) -> TraceEntry {
    TraceEntry {
        iter,
        total: b.total,
        terms: std::array::from_fn(|i| b.terms[i].value),
    }
}

/// Descends on the total loss of the candidate against `target`, starting
/// from `init`, and returns the best candidate seen.
pub fn reconstruct(
    target: &Signal,
    init: &Signal,
    weights: &LossWeights,
    ocfg: &OptimConfig,
    dtw_cfg: &SoftDtwConfig,
    fcfg: &SparsityFreqConfig,
) -> Result<ReconstructionResult> {
    check_pair(init, target)?;
    ocfg.validate()?;
    if !(dtw_cfg.gamma > 0.0) {
        return Err(Error::BadConfig(
            "reconstruction needs soft-DTW gamma > 0".into(),
        ));
    }
    let ctx = LossContext::new(target, *weights, *dtw_cfg, *fcfg)?;

    let mut x = init.samples().to_vec();
    let mut stepper = Stepper::new(ocfg.method, x.len());
    let mut best_x = x.clone();
    let mut best: Option<LossBreakdown> = None;
    let mut history: Vec<f64> = Vec::with_capacity(ocfg.max_iters);
    let mut trace = Vec::new();
    let mut iters_run = 0;

    for iter in 0..ocfg.max_iters {
        let (b, _) = ctx.evaluate_slice(&x, None)?;
        iters_run = iter + 1;
        if !b.total.is_finite() || b.total > DIVERGENCE_LIMIT {
            return Err(Error::Diverged(b.total));
        }
        if best.as_ref().is_none_or(|bb| b.total < bb.total) {
            best_x.clone_from(&x);
            best = Some(b.clone());
        }
        let best_now = best.as_ref().expect("set above");
        history.push(best_now.total);
        if iter % ocfg.log_every == 0 {
            trace.push(trace_entry(iter, best_now));
        }

        let stationary = b.grad.iter().all(|g| *g == 0.0);
        let stalled = iter >= STALL_WINDOW && {
            let then = history[iter - STALL_WINDOW];
            let now = history[iter];
            then - now <= ocfg.tol * then.abs()
        };
        if stationary || stalled {
            break;
        }
        stepper.apply(&mut x, &b.grad, ocfg);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(f64::INFINITY));
        }
    }

    let best = best.expect("at least one iteration runs");
    let last_iter = iters_run - 1;
    if trace.last().is_none_or(|e| e.iter != last_iter) {
        trace.push(trace_entry(last_iter, &best));
    }
    let final_signal = target.with_samples(best_x)?;
    Ok(ReconstructionResult {
        final_metrics: FinalMetrics::compute(&final_signal, target)?,
        final_signal,
        loss_trace: trace,
        iters_run,
        final_loss: best,
    })
}

/// Names of the eight loss columns, in trace order.
pub fn trace_columns() -> [&'static str; 8] {
    LossTerm::ALL.map(LossTerm::name)
}
