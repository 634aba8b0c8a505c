//! Elementwise combination of forecast tables.

use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::error::{Error, Result};
use crate::linalg::median;

/// Floor applied before taking logarithms in the geometric mean.
pub const GEOMETRIC_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EnsembleMethod {
    Mean,
    Median,
    GeometricMean,
    /// Weights are normalized to sum to one.
    Weighted { weights: Vec<f64> },
}

pub fn ensemble(inputs: &[&MonthlyTable], method: &EnsembleMethod) -> Result<MonthlyTable> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("ensemble needs at least one forecast".into()))?;
    for t in &inputs[1..] {
        if t.len() != first.len() || t.keys().zip(first.keys()).any(|(a, b)| a != b) {
            return Err(Error::MeterMismatch("ensemble inputs cover different meters".into()));
        }
    }
    let weights = match method {
        EnsembleMethod::Weighted { weights } => {
            if weights.len() != inputs.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {} forecasts",
                    weights.len(),
                    inputs.len()
                )));
            }
            if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidParameter("weights sum to zero".into()));
            }
            weights.iter().map(|w| w / total).collect()
        }
        _ => Vec::new(),
    };
    let combine = |values: &[f64]| -> f64 {
        match method {
            EnsembleMethod::Mean => values.iter().sum::<f64>() / values.len() as f64,
            EnsembleMethod::Median => median(values).expect("non-empty"),
            EnsembleMethod::GeometricMean => {
                (values.iter().map(|v| v.max(GEOMETRIC_FLOOR).ln()).sum::<f64>() / values.len() as f64).exp()
            }
            EnsembleMethod::Weighted { .. } => values.iter().zip(&weights).map(|(v, w)| v * w).sum(),
        }
    };
    let mut values = vec![0.0; inputs.len()];
    Ok(first
        .keys()
        .map(|id| {
            let mut out = [0.0; MONTHS];
            for (m, o) in out.iter_mut().enumerate() {
                for (slot, t) in values.iter_mut().zip(inputs) {
                    *slot = t[id][m];
                }
                *o = combine(&values);
            }
            (id.clone(), out)
        })
        .collect())
}
