//! Expectile (asymmetric least squares) regression by iteratively reweighted
//! least squares, and the recursive daily forecaster built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::io::MonthlyTable;
use crate::data::{DailySeries, DailyWeather, MonthlySeries};
use crate::error::{Error, Result};
use crate::linalg::lstsq;

use super::daily::DailyFeatures;
use super::regression::{fit_pooled, forecast_pooled, LinearModel, Penalty, PooledConfig, TemperatureSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectileFit {
    pub model: LinearModel,
    pub iterations: usize,
    /// False when the weight pattern was still changing at the iteration cap.
    pub converged: bool,
}

/// Minimizes `Σ w_i (y_i − b₀ − x_iᵀb)²` with `w_i = τ` for positive residuals
/// and `1 − τ` otherwise, starting from ordinary least squares.
pub fn fit_expectile(x: &[Vec<f64>], y: &[f64], tau: f64, max_iter: usize) -> Result<ExpectileFit> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("τ = {tau} must lie in (0, 1)")));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let p = x[0].len();
    let design = DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let solve = |weights: &[f64]| -> Result<DVector<f64>> {
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let a = DMatrix::from_fn(design.nrows(), design.ncols(), |i, j| design[(i, j)] * sw[i]);
        let b = DVector::from_fn(target.len(), |i, _| target[i] * sw[i]);
        lstsq(&a, &b)
    };
    let mut beta = solve(&vec![1.0; y.len()])?;
    let mut above: Vec<bool> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let resid = &target - &design * &beta;
        let next: Vec<bool> = resid.iter().map(|r| *r > 0.0).collect();
        if next == above {
            converged = true;
            break;
        }
        above = next;
        let weights: Vec<f64> = above.iter().map(|a| if *a { tau } else { 1.0 - tau }).collect();
        beta = solve(&weights)?;
        iterations += 1;
    }
    if !converged {
        log::warn!("expectile IRLS stopped after {max_iter} iterations without a stable weight pattern");
    }
    Ok(ExpectileFit {
        model: LinearModel {
            intercept: beta[0],
            coef: beta.iter().skip(1).copied().collect(),
        },
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpectileConfig {
    pub tau: f64,
    pub lag_days: usize,
    pub block_length: usize,
    pub max_train_rows: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ExpectileConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            lag_days: 20,
            block_length: crate::preprocess::DEFAULT_BLOCK_LENGTH,
            max_train_rows: 100_000,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl ExpectileConfig {
    pub fn features(&self) -> DailyFeatures {
        DailyFeatures {
            lags: self.lag_days,
            temperature: true,
            day_of_week: false,
            month: true,
        }
    }
}

pub fn expectile_forecaster(
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    weather_2017: &[DailyWeather],
    config: ExpectileConfig,
) -> Result<MonthlyTable> {
    let features = config.features();
    let pooled = PooledConfig {
        features,
        temperature_source: TemperatureSource::BlockBootstrap,
        penalty: Penalty::None,
        lambda: 0.0,
        block_length: config.block_length,
        max_train_rows: config.max_train_rows,
        seed: config.seed,
    };
    let fit = fit_pooled(daily, monthly, weather_2017, &pooled, |x, y| {
        fit_expectile(x, y, config.tau, config.max_iter).map(|f| f.model)
    })?;
    let model = fit.model.clone();
    Ok(forecast_pooled(&fit, &features, |r| model.predict(r)))
}
