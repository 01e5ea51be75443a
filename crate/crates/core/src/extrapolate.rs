//! Richardson extrapolation of sequences computed at geometrically refined
//! spacings.

use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub estimate: f64,
    /// Difference between the last two extrapolated values.
    pub error: f64,
}

/// Extrapolates `values[i] = f(h_0 / ratio^i)` to `h → 0`, assuming an error
/// expansion in powers `h^order, h^{2·order}, ...`.
///
/// Fails if the sequence does not settle, i.e. if the last correction is larger
/// than the one before it.
pub fn richardson(values: &[f64], ratio: f64, order: u32) -> Result<Extrapolation> {
    if values.len() < 2 {
        return Err(OsrError::ExtrapolationDivergence("need at least two values".into()));
    }
    if !(ratio > 1.0) || order == 0 {
        return Err(OsrError::InvalidParameter(format!("ratio {ratio}, order {order}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OsrError::ExtrapolationDivergence("non-finite input".into()));
    }
    let tiny = 1e-12 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if let Some(w) = steps.windows(2).find(|w| w[1] > w[0] && w[1] > tiny) {
        return Err(OsrError::ExtrapolationDivergence(format!(
            "refinement steps grow: {:e} then {:e}",
            w[0], w[1]
        )));
    }
    let mut table = values.to_vec();
    let mut power = order as i32;
    let mut previous_diag = *table.last().unwrap();
    let mut diag = Vec::with_capacity(values.len());
    diag.push(previous_diag);
    while table.len() > 1 {
        let f = ratio.powi(power);
        table = table.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        previous_diag = *table.last().unwrap();
        diag.push(previous_diag);
        power += order as i32;
    }
    let n = diag.len();
    let error = (diag[n - 1] - diag[n - 2]).abs();
    if n >= 3 {
        let before = (diag[n - 2] - diag[n - 3]).abs();
        if error > before && error > 1e-12 * diag[n - 1].abs().max(1.0) {
            return Err(OsrError::ExtrapolationDivergence(format!(
                "corrections grow: {before:e} then {error:e}"
            )));
        }
    }
    Ok(Extrapolation {
        estimate: diag[n - 1],
        error,
    })
}
