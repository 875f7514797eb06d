//! Scaled cosine attention similarity.

use crate::error::{Error, Result};

/// Queries, keys, temperature and additive bias for one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionKernelInput {
    /// `n` query rows of dimension `d`.
    pub queries: Vec<Vec<f64>>,
    /// `m` key rows of dimension `d`.
    pub keys: Vec<Vec<f64>>,
    pub tau: f64,
    /// `n x m` bias.
    pub bias: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `S[i][j] = cos(q_i, k_j) / tau + B[i][j]`.
pub fn scaled_cosine_attention(input: &AttentionKernelInput) -> Result<Vec<Vec<f64>>> {
    let AttentionKernelInput {
        queries,
        keys,
        tau,
        bias,
    } = input;
    if !(tau.is_finite() && *tau > 0.0) {
        return Err(Error::BadConfig(format!("tau {tau} must be > 0")));
    }
    let d = queries.first().or(keys.first()).map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::Empty);
    }
    for row in queries.iter().chain(keys) {
        if row.len() != d {
            return Err(Error::DimensionMismatch(row.len(), d));
        }
    }
    if bias.len() != queries.len() {
        return Err(Error::DimensionMismatch(bias.len(), queries.len()));
    }
    if let Some(row) = bias.iter().find(|r| r.len() != keys.len()) {
        return Err(Error::DimensionMismatch(row.len(), keys.len()));
    }

    let unit = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                let n = norm(r);
                if n == 0.0 {
                    Err(Error::ZeroVector)
                } else {
                    Ok(r.iter().map(|v| v / n).collect())
                }
            })
            .collect()
    };
    let q = unit(queries)?;
    let k = unit(keys)?;

    Ok(q.iter()
        .zip(bias)
        .map(|(qi, brow)| {
            k.iter()
                .zip(brow)
                .map(|(kj, b)| {
                    let cos: f64 = qi.iter().zip(kj).map(|(a, c)| a * c).sum();
                    cos.clamp(-1.0, 1.0) / tau + b
                })
                .collect()
        })
        .collect())
}
