//! Richardson extrapolation of samples taken at halving step sizes.

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of trailing samples combined; the table has order `USED - 1`.
pub const USED: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub error: f64,
    /// Diagonal of the Richardson table, lowest order first.
    pub diagonal: Vec<f64>,
}

/// Limit at `eps -> 0` of `value(eps) = L + c1 eps + c2 eps^2 + ...`.
///
/// Uses the `USED` smallest step sizes, which must halve. Rejects samples
/// whose successive differences change sign by more than `tol` times their
/// magnitude.
pub fn extrapolate_to_zero(samples: &[(f64, f64)], tol: f64) -> Result<Extrapolation> {
    if samples.len() < USED {
        return Err(Error::Extrapolation(format!(
            "need at least {USED} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(e, v)| !(e.is_finite() && *e > 0.0 && v.is_finite())) {
        return Err(Error::Extrapolation("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tail = &sorted[sorted.len() - USED..];
    for w in tail.windows(2) {
        let ratio = w[0].0 / w[1].0;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(Error::Extrapolation(format!(
                "step sizes {} and {} do not halve",
                w[0].0, w[1].0
            )));
        }
    }
    let values: Vec<f64> = tail.iter().map(|s| s.1).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let significant: Vec<f64> = diffs
        .iter()
        .copied()
        .filter(|d| d.abs() > tol * scale)
        .collect();
    if significant.iter().any(|d| d.signum() != significant[0].signum()) {
        return Err(Error::Extrapolation(format!(
            "samples not monotone in eps: {values:?}"
        )));
    }
    let mut table = vec![values.clone()];
    for k in 1..USED {
        let prev = &table[k - 1];
        let factor = (1u32 << k) as f64 - 1.0;
        let row: Vec<f64> = (1..prev.len())
            .map(|i| prev[i] + (prev[i] - prev[i - 1]) / factor)
            .collect();
        table.push(row);
    }
    let diagonal: Vec<f64> = table.iter().map(|row| *row.last().expect("non-empty row")).collect();
    let limit = diagonal[USED - 1];
    let error = (diagonal[USED - 1] - diagonal[USED - 2]).abs();
    Ok(Extrapolation {
        limit,
        error,
        diagonal,
    })
}
