//! Exact Shapley values by full coalition enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest feature count accepted by [`exact_shapley`] (2^15 model calls).
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: String,
    /// kWh contribution relative to the background prediction.
    pub shapley_value: f64,
    pub actionable: bool,
}

/// `φ_j = Σ_S |S|!(n−|S|−1)!/n! · (f(S ∪ {j}) − f(S))` over coalitions `S`
/// not containing `j`; features outside a coalition take background values.
pub fn exact_shapley(
    model: impl Fn(&[f64]) -> f64,
    instance: &[f64],
    background: &[f64],
) -> Result<Vec<f64>> {
    let n = instance.len();
    if background.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "instance has {n} features, background {}",
            background.len()
        )));
    }
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            got: n,
            max: MAX_EXACT_FEATURES,
        });
    }
    let coalitions = 1usize << n;
    let mut x = background.to_vec();
    let values: Vec<f64> = (0..coalitions)
        .map(|mask| {
            for j in 0..n {
                x[j] = if mask >> j & 1 == 1 { instance[j] } else { background[j] };
            }
            model(&x)
        })
        .collect();
    // weight[s] = s!(n−s−1)!/n!
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - s - 1] / fact[n]).collect();
    let mut phi = vec![0.0; n];
    for mask in 0..coalitions {
        let size = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[size] * (values[mask | 1 << j] - values[mask]);
            }
        }
    }
    Ok(phi)
}
