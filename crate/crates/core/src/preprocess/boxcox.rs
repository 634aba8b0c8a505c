//! Box-Cox power transform with maximum-likelihood λ selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxParam {
    pub lambda: f64,
    /// Added to every input before transforming.
    pub shift: f64,
}

impl BoxCoxParam {
    pub fn new(lambda: f64, shift: f64) -> Result<Self> {
        if !lambda.is_finite() || !(shift >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Box-Cox lambda {lambda} / shift {shift} invalid"
            )));
        }
        Ok(Self { lambda, shift })
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        let z = x + self.shift;
        if !(z > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Box-Cox input {x} + shift {} is not positive",
                self.shift
            )));
        }
        Ok(if self.lambda == 0.0 {
            z.ln()
        } else {
            (z.powf(self.lambda) - 1.0) / self.lambda
        })
    }

    /// Inverse transform. Values outside the image of the forward map are
    /// clamped to the boundary of the domain.
    pub fn inverse(&self, y: f64) -> f64 {
        let z = if self.lambda == 0.0 {
            y.exp()
        } else {
            let base = self.lambda * y + 1.0;
            if base <= 0.0 {
                0.0
            } else {
                base.powf(1.0 / self.lambda)
            }
        };
        z - self.shift
    }
}

pub fn boxcox(values: &[f64], param: BoxCoxParam) -> Result<Vec<f64>> {
    values.iter().map(|x| param.forward(*x)).collect()
}

pub fn inv_boxcox(values: &[f64], param: BoxCoxParam) -> Vec<f64> {
    values.iter().map(|y| param.inverse(*y)).collect()
}

/// Shift that makes every value strictly positive (0 when already positive).
pub fn positive_shift(values: &[f64]) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        0.0
    } else {
        1.0 - min
    }
}

fn log_likelihood(values: &[f64], param: BoxCoxParam) -> f64 {
    let n = values.len() as f64;
    let y: Vec<f64> = values.iter().map(|x| param.forward(*x).unwrap_or(f64::NAN)).collect();
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let jacobian: f64 = values.iter().map(|x| (x + param.shift).ln()).sum();
    -0.5 * n * var.ln() + (param.lambda - 1.0) * jacobian
}

/// λ maximizing the profile log-likelihood on the grid −1, −0.99, …, 2.
pub fn fit_lambda(values: &[f64]) -> Result<BoxCoxParam> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("Box-Cox fit needs at least 2 values".into()));
    }
    let shift = positive_shift(values);
    let mut best = BoxCoxParam { lambda: 1.0, shift };
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=300 {
        let lambda = ((-100 + i) as f64) / 100.0;
        let p = BoxCoxParam { lambda, shift };
        let ll = log_likelihood(values, p);
        if ll.is_finite() && ll > best_ll {
            best_ll = ll;
            best = p;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn definition_cases() {
        let p = BoxCoxParam::new(1.0, 0.0).unwrap();
        assert_eq!(p.forward(5.0).unwrap(), 4.0);
        let p = BoxCoxParam::new(0.0, 0.0).unwrap();
        assert!((p.forward(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!(p.forward(0.0).is_err());
    }

    #[test]
    fn lognormal_data_prefers_log() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, LogNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = LogNormal::new(2.0, 0.6).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| d.sample(&mut rng)).collect();
        let p = fit_lambda(&xs).unwrap();
        assert!(p.lambda.abs() < 0.1, "{p:?}");
    }

    proptest! {
        #[test]
        fn round_trip(x in 1e-3..1e4f64, lambda in -1.0..2.0f64) {
            let p = BoxCoxParam::new(lambda, 0.0).unwrap();
            let back = p.inverse(p.forward(x).unwrap());
            prop_assert!((back - x).abs() <= 1e-10 * x.max(1.0));
        }
    }
}
