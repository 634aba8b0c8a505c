//! Linear solvers (least squares, ridge, lasso by coordinate descent) and the
//! pooled daily lag-regression forecaster.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::calendar::{BASE_YEAR, MONTHS};
use crate::data::io::MonthlyTable;
use crate::data::{DailySeries, DailyWeather, MonthlySeries};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::preprocess::{bootstrap_temperature, cf_temperature_forecast};
use crate::rng;

use super::clip_month_values;
use super::daily::{monthly_sums, roll_out, training_rows, DailyFeatures, NormalizedDaily};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    #[default]
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols()).map(|j| x.column(j).mean()).collect()
}

/// Lasso with an unpenalized intercept on the given (unstandardized) columns:
/// minimizes `(1/2n)‖y − b₀ − Xb‖² + λ‖b‖₁` by cyclic coordinate descent.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, tol: f64, max_iter: usize) -> Result<LinearModel> {
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("λ must be non-negative".into()));
    }
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::DimensionMismatch("design and target rows differ or are empty".into()));
    }
    let n = x.nrows() as f64;
    let means = column_means(x);
    let y_mean = y.mean();
    let mut xc = x.clone();
    for (j, m) in means.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-m);
    }
    let yc = y.add_scalar(-y_mean);
    let norms: Vec<f64> = (0..xc.ncols()).map(|j| xc.column(j).norm_squared() / n).collect();
    let mut b = DVector::<f64>::zeros(xc.ncols());
    let mut r = yc.clone();
    for _ in 0..max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..xc.ncols() {
            if norms[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.dot(&r) / n + norms[j] * b[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            let delta = new - b[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                b[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            break;
        }
    }
    let intercept = y_mean - b.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coef: b.iter().copied().collect(),
    })
}

pub fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Fits an intercept plus coefficients. Penalized fits standardize the
/// columns internally (λ applies on that scale) and report coefficients on the
/// original scale; the unpenalized fit returns the least-norm solution.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64], penalty: Penalty, lambda: f64) -> Result<LinearModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("λ must be non-negative".into()));
    }
    let p = x[0].len();
    let xm = DMatrix::from_fn(x.len(), p, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let n = x.len() as f64;
    let means = column_means(&xm);
    let stds: Vec<f64> = (0..p)
        .map(|j| {
            let m = means[j];
            (xm.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let y_mean = yv.mean();
    let xs = DMatrix::from_fn(x.len(), p, |i, j| if stds[j] > 0.0 { (xm[(i, j)] - means[j]) / stds[j] } else { 0.0 });
    let yc = yv.add_scalar(-y_mean);
    let bs: Vec<f64> = match penalty {
        Penalty::None => lstsq(&xs, &yc)?.iter().copied().collect(),
        Penalty::L2 => {
            let mut gram = xs.transpose() * &xs;
            for i in 0..p {
                gram[(i, i)] += n * lambda;
            }
            let rhs = xs.transpose() * &yc;
            match gram.clone().cholesky() {
                Some(c) => c.solve(&rhs).iter().copied().collect(),
                None => lstsq(&gram, &rhs)?.iter().copied().collect(),
            }
        }
        Penalty::L1 => lasso_cd(&xs, &yc, lambda, 1e-10, 10_000)?.coef,
    };
    let coef: Vec<f64> = bs
        .iter()
        .zip(&stds)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = y_mean - coef.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel { intercept, coef })
}

/// How forecast-year daily temperatures are simulated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureSource {
    #[default]
    BlockBootstrap,
    CollaborativeFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PooledConfig {
    pub features: DailyFeatures,
    pub temperature_source: TemperatureSource,
    pub penalty: Penalty,
    pub lambda: f64,
    pub block_length: usize,
    pub max_train_rows: usize,
    pub seed: u64,
}

impl Default for PooledConfig {
    fn default() -> Self {
        Self {
            features: DailyFeatures::default(),
            temperature_source: TemperatureSource::BlockBootstrap,
            penalty: Penalty::L1,
            lambda: 1e-3,
            block_length: crate::preprocess::DEFAULT_BLOCK_LENGTH,
            max_train_rows: 100_000,
            seed: 0,
        }
    }
}

/// Fitted pooled model together with the inputs needed for the roll-out.
pub struct PooledFit {
    pub model: LinearModel,
    pub meters: Vec<NormalizedDaily>,
    pub temps_2018: Vec<f64>,
}

pub fn fit_pooled(
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    weather_2017: &[DailyWeather],
    config: &PooledConfig,
    fit: impl Fn(&[Vec<f64>], &[f64]) -> Result<LinearModel>,
) -> Result<PooledFit> {
    if config.features.lags == 0 {
        return Err(Error::InvalidParameter("at least one lag is required".into()));
    }
    let meters: Vec<NormalizedDaily> = daily.iter().zip(monthly).map(|(d, m)| NormalizedDaily::new(d, m)).collect();
    let temps_2017: Vec<f64> = weather_2017.iter().map(|w| w.avg).collect();
    let (x, y) = training_rows(&meters, &config.features, &temps_2017, config.max_train_rows, config.seed);
    if x.is_empty() {
        return Err(Error::InsufficientData(format!("no {BASE_YEAR} day has a complete lag window")));
    }
    let model = fit(&x, &y)?;
    let temp_seed = rng::derive_seed(config.seed, "temperature");
    let temps_2018 = match config.temperature_source {
        TemperatureSource::BlockBootstrap => bootstrap_temperature(weather_2017, config.block_length, temp_seed)?
            .iter()
            .map(|w| w.avg)
            .collect(),
        TemperatureSource::CollaborativeFilter => cf_temperature_forecast(weather_2017, temp_seed)?,
    };
    Ok(PooledFit {
        model,
        meters,
        temps_2018,
    })
}

pub fn forecast_pooled(fit: &PooledFit, features: &DailyFeatures, predict: impl Fn(&[f64]) -> f64) -> MonthlyTable {
    fit.meters
        .iter()
        .map(|m| {
            let days = roll_out(&predict, m, features, &fit.temps_2018);
            let months: [f64; MONTHS] = monthly_sums(&days).map(|v| v * m.scale);
            (m.meter_id.clone(), clip_month_values(months))
        })
        .collect()
}

pub fn pooled_penalized_regression(
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    weather_2017: &[DailyWeather],
    config: PooledConfig,
) -> Result<MonthlyTable> {
    let fit = fit_pooled(daily, monthly, weather_2017, &config, |x, y| fit_linear(x, y, config.penalty, config.lambda))?;
    let model = fit.model.clone();
    Ok(forecast_pooled(&fit, &config.features, |r| model.predict(r)))
}
