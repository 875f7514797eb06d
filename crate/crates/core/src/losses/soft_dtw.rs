//! Soft dynamic time warping with squared-difference cost.
//!
//! Forward: `R[i][j] = d(i, j) + softmin_gamma(R[i-1][j-1], R[i-1][j], R[i][j-1])`
//! with `R[0][0] = 0` and an infinite border. The backward pass computes the
//! expected alignment `E`, and the gradient with respect to `x` is
//! `sum_j E[i][j] * 2 (x_i - y_j)`.

use super::{SoftDtwConfig, TermValue};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// `-gamma log sum exp(-a_i / gamma)`; the plain minimum when `gamma == 0`.
pub fn soft_min(values: &[f64], gamma: f64) -> f64 {
    let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if gamma == 0.0 || m == f64::INFINITY {
        return m;
    }
    let s: f64 = values.iter().map(|v| (-(v - m) / gamma).exp()).sum();
    m - gamma * s.ln()
}

#[inline]
fn cost(a: f64, b: f64) -> f64 {
    (a - b) * (a - b)
}

/// Tables of one soft-DTW evaluation.
///
/// `r` is the `(n + 2) x (m + 2)` accumulated-cost table (row-major, with the
/// padding row/column used by the backward pass); `e` is the `n x m` expected
/// alignment, filled by the backward pass.
#[derive(Debug, Clone)]
pub struct SoftDtwWorkspace {
    n: usize,
    m: usize,
    gamma: f64,
    r: Vec<f64>,
    /// Soft-min weights of the diagonal, upper and left predecessor of each
    /// cell, kept by the forward pass when a gradient will follow.
    p: Option<Vec<[f64; 3]>>,
    e: Option<Vec<f64>>,
}

/// Rows per strip in the forward sweep.
const STRIP: usize = 8;

/// exp(-t) below double precision relative to 1.
const EXP_CUTOFF: f64 = 40.0;

#[inline]
fn rel_exp(v: f64, m: f64, gamma: f64) -> f64 {
    if v == m {
        return 1.0;
    }
    let t = (v - m) / gamma;
    if t > EXP_CUTOFF {
        0.0
    } else {
        (-t).exp()
    }
}

impl SoftDtwWorkspace {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.m + 2) + j
    }

    /// Accumulated cost at 1-based cell `(i, j)`; `(0, 0)` is the origin.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r[self.idx(i, j)]
    }

    pub fn value(&self) -> f64 {
        self.r(self.n, self.m)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Expected occupancy of 0-based cell `(i, j)`, once the backward pass ran.
    pub fn expected_alignment(&self, i: usize, j: usize) -> Option<f64> {
        self.e.as_ref().map(|e| e[(i + 1) * (self.m + 2) + (j + 1)])
    }

    fn forward(x: &[f64], y: &[f64], gamma: f64, keep_weights: bool) -> Self {
        let (n, m) = (x.len(), y.len());
        let w = m + 2;
        let mut r = vec![f64::INFINITY; (n + 2) * w];
        r[0] = 0.0;
        let soft = gamma > 0.0;
        let mut p = (keep_weights && soft).then(|| vec![[0.0; 3]; (n + 2) * w]);
        // Rows are processed in strips swept along their anti-diagonals: the
        // cells of one strip diagonal are independent, which lets their exp/ln
        // latencies overlap while memory access stays within a few rows.
        for i0 in (1..=n).step_by(STRIP) {
            let rows = STRIP.min(n + 1 - i0);
            for t in 1..m + rows {
                for k in 0..rows {
                    if t <= k || t - k > m {
                        continue;
                    }
                    let (i, j) = (i0 + k, t - k);
                    let a = r[(i - 1) * w + (j - 1)];
                    let b = r[(i - 1) * w + j];
                    let c = r[i * w + (j - 1)];
                    let mn = a.min(b).min(c);
                    let best = if !soft {
                        mn
                    } else {
                        let (ea, eb, ec) = (
                            rel_exp(a, mn, gamma),
                            rel_exp(b, mn, gamma),
                            rel_exp(c, mn, gamma),
                        );
                        let s = ea + eb + ec;
                        if let Some(p) = p.as_mut() {
                            let inv = 1.0 / s;
                            p[i * w + j] = [ea * inv, eb * inv, ec * inv];
                        }
                        mn - gamma * s.ln()
                    };
                    r[i * w + j] = cost(x[i - 1], y[j - 1]) + best;
                }
            }
        }
        SoftDtwWorkspace {
            n,
            m,
            gamma,
            r,
            p,
            e: None,
        }
    }

    fn backward(&mut self) {
        let (n, m) = (self.n, self.m);
        let w = m + 2;
        let mut e = vec![0.0; (n + 2) * w];
        if let Some(p) = &self.p {
            // Each cell passes its occupancy back to its predecessors in
            // proportion to their soft-min weights.
            for i in (1..=n).rev() {
                for j in (1..=m).rev() {
                    e[i * w + j] = if i == n && j == m {
                        1.0
                    } else {
                        e[(i + 1) * w + j] * p[(i + 1) * w + j][1]
                            + e[i * w + j + 1] * p[i * w + j + 1][2]
                            + e[(i + 1) * w + j + 1] * p[(i + 1) * w + j + 1][0]
                    };
                }
            }
        } else {
            // Hard DTW: follow the argmin predecessors back from (n, m).
            // Ties resolve diagonal, then (i-1, j), then (i, j-1).
            let r = &self.r;
            e[n * w + m] = 1.0;
            for i in (1..=n).rev() {
                for j in (1..=m).rev() {
                    let here = e[i * w + j];
                    if here == 0.0 || (i == 1 && j == 1) {
                        continue;
                    }
                    let diag = r[(i - 1) * w + (j - 1)];
                    let up = r[(i - 1) * w + j];
                    let left = r[i * w + (j - 1)];
                    let target = if diag <= up && diag <= left {
                        (i - 1) * w + (j - 1)
                    } else if up <= left {
                        (i - 1) * w + j
                    } else {
                        i * w + (j - 1)
                    };
                    e[target] += here;
                }
            }
        }
        self.e = Some(e);
    }

    /// Gradients with respect to both sequences, from the backward pass.
    fn grads(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let e = self.e.as_ref().expect("backward pass not run");
        let w = self.m + 2;
        let mut gx = vec![0.0; self.n];
        let mut gy = vec![0.0; self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                let occ = e[(i + 1) * w + (j + 1)];
                if occ != 0.0 {
                    let t = occ * 2.0 * (x[i] - y[j]);
                    gx[i] += t;
                    gy[j] -= t;
                }
            }
        }
        (gx, gy)
    }
}

fn check_inputs(x: &[f64], y: &[f64], cfg: &SoftDtwConfig) -> Result<()> {
    cfg.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// Soft-DTW value and the forward table.
pub fn soft_dtw(x: &Signal, y: &Signal, cfg: &SoftDtwConfig) -> Result<(f64, SoftDtwWorkspace)> {
    check_inputs(x.samples(), y.samples(), cfg)?;
    let ws = SoftDtwWorkspace::forward(x.samples(), y.samples(), cfg.gamma, false);
    Ok((ws.value(), ws))
}

/// Gradient of [`soft_dtw`] with respect to `x`.
///
/// For `gamma == 0` this is the gradient along the optimal path.
pub fn soft_dtw_grad(x: &Signal, y: &Signal, cfg: &SoftDtwConfig) -> Result<Vec<f64>> {
    Ok(soft_dtw_pair_grad(x.samples(), y.samples(), cfg)?.1)
}

/// Value, gradient in `x` and gradient in `y` of soft-DTW on raw slices.
pub fn soft_dtw_pair_grad(
    x: &[f64],
    y: &[f64],
    cfg: &SoftDtwConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_inputs(x, y, cfg)?;
    let mut ws = SoftDtwWorkspace::forward(x, y, cfg.gamma, true);
    ws.backward();
    let (gx, gy) = ws.grads(x, y);
    Ok((ws.value(), gx, gy))
}

pub(crate) fn soft_dtw_value(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    SoftDtwWorkspace::forward(x, y, gamma, false).value()
}

/// Soft-DTW with its self-alignment bias removed:
/// `dtw(x, y) - (dtw(x, x) + dtw(y, y)) / 2`.
///
/// Zero with zero gradient at `x == y`. Equal to [`soft_dtw`] when `gamma == 0`.
pub fn soft_dtw_divergence(x: &Signal, y: &Signal, cfg: &SoftDtwConfig) -> Result<TermValue> {
    check_inputs(x.samples(), y.samples(), cfg)?;
    let yy = soft_dtw_value(y.samples(), y.samples(), cfg.gamma);
    divergence_with_self_ref(x.samples(), y.samples(), yy, cfg)
}

/// Divergence with `dtw(y, y)` supplied by the caller.
pub(crate) fn divergence_with_self_ref(
    x: &[f64],
    y: &[f64],
    ref_self: f64,
    cfg: &SoftDtwConfig,
) -> Result<TermValue> {
    let (xy, gxy, _) = soft_dtw_pair_grad(x, y, cfg)?;
    let (xx, gxx_a, gxx_b) = soft_dtw_pair_grad(x, x, cfg)?;
    let value = xy - 0.5 * (xx + ref_self);
    let grad = gxy
        .iter()
        .zip(gxx_a.iter().zip(&gxx_b))
        .map(|(g, (a, b))| g - 0.5 * (a + b))
        .collect();
    Ok(TermValue { value, grad })
}

/// Classical DTW by hard-min dynamic programming on squared differences.
pub fn hard_dtw(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            cur[j] = cost(xi, y[j - 1]) + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = f64::INFINITY;
    }
    Ok(prev[m])
}
