//! Availability-group forecaster: Box-Cox on average daily consumption per
//! month, robust SVD of the complete-year group, per-meter OLS on the leading
//! right singular vectors, and an exponentially weighted residual term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::calendar::{DAYS_IN_MONTH, MONTHS};
use crate::data::io::MonthlyTable;
use crate::data::MonthlySeries;
use crate::error::{Error, Result};
use crate::linalg::{median, ols_with_ridge_fallback, svd};
use crate::preprocess::boxcox::{fit_lambda, positive_shift, BoxCoxParam};

use super::clip_month_values;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdGroupConfig {
    /// Fixed λ; estimated by maximum likelihood when absent.
    pub lambda: Option<f64>,
    /// Upper bound on components used per meter.
    pub max_components: usize,
    /// Ratio between successive residual weights (older → smaller).
    pub rho: f64,
    /// Damping applied to the weighted residual sum.
    pub delta: f64,
    /// Winsorization rounds; 0 disables the robust step.
    pub robust_rounds: usize,
    /// Rank of the low-rank fit whose residuals are winsorized.
    pub robust_rank: usize,
}

impl Default for SvdGroupConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            max_components: 3,
            rho: 0.6,
            delta: 0.8,
            robust_rounds: 3,
            robust_rank: 3,
        }
    }
}

/// Right singular vectors (columns, by decreasing singular value) and singular values.
pub fn right_singular_vectors(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let d = svd(x);
    (d.v_t.transpose(), d.singular_values)
}

fn low_rank(x: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    svd(x).truncated(rank)
}

/// Residuals of a rank-`rank` fit are clipped at 3 robust standard deviations
/// (1.4826·MAD), repeated `rounds` times.
pub fn winsorize(x: &DMatrix<f64>, rank: usize, rounds: usize) -> DMatrix<f64> {
    let mut work = x.clone();
    let rank = rank.min(x.nrows().min(x.ncols()));
    for _ in 0..rounds {
        let l = low_rank(&work, rank);
        let r = x - &l;
        let vals: Vec<f64> = r.iter().copied().collect();
        let med = median(&vals).unwrap_or(0.0);
        let dev: Vec<f64> = vals.iter().map(|v| (v - med).abs()).collect();
        let sigma = 1.4826 * median(&dev).unwrap_or(0.0);
        if sigma <= 0.0 {
            break;
        }
        let lim = 3.0 * sigma;
        work = l + r.map(|v| v.clamp(med - lim, med + lim));
    }
    work
}

#[derive(Debug, Clone)]
pub struct SvdGroupModel {
    pub param: BoxCoxParam,
    /// 12 × r matrix of right singular vectors.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Range of all observed transformed values; forecasts are clamped to it
    /// before the inverse transform.
    pub bounds: (f64, f64),
    pub config: SvdGroupConfig,
}

impl SvdGroupModel {
    pub fn fit(monthly: &[MonthlySeries], config: SvdGroupConfig) -> Result<Self> {
        let daily_avg = |m: &MonthlySeries| -> Vec<(usize, f64)> {
            m.observed().map(|(i, v)| (i, v / DAYS_IN_MONTH[i] as f64)).collect()
        };
        let pooled: Vec<f64> = monthly.iter().flat_map(|m| daily_avg(m).into_iter().map(|(_, v)| v)).collect();
        let param = match config.lambda {
            Some(l) => BoxCoxParam::new(l, positive_shift(&pooled))?,
            None => fit_lambda(&pooled)?,
        };
        let g0: Vec<Vec<f64>> = monthly
            .iter()
            .filter(|m| m.is_complete())
            .map(|m| daily_avg(m).into_iter().map(|(_, v)| param.forward(v)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        if g0.is_empty() {
            return Err(Error::InsufficientData("group G0 (complete meters) is empty".into()));
        }
        let x = DMatrix::from_fn(g0.len(), MONTHS, |i, j| g0[i][j]);
        let x = if config.robust_rounds > 0 {
            winsorize(&x, config.robust_rank, config.robust_rounds)
        } else {
            x
        };
        let (components, singular_values) = right_singular_vectors(&x);
        let transformed = pooled.iter().map(|v| param.forward(*v)).collect::<Result<Vec<_>>>()?;
        let bounds = transformed
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        Ok(Self {
            param,
            components,
            singular_values,
            bounds,
            config,
        })
    }

    /// Number of components with a non-negligible singular value.
    pub fn rank(&self) -> usize {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|s| **s > max * 1e-10).count()
    }

    /// Preliminary forecast and residual term in the transformed space.
    pub fn transformed_forecast(&self, obs: &[(usize, f64)]) -> Result<([f64; MONTHS], f64)> {
        let m = obs.len().min(self.config.max_components).min(self.rank()).max(1);
        let design = DMatrix::from_fn(obs.len(), m, |r, c| self.components[(obs[r].0, c)]);
        let target = DVector::from_iterator(obs.len(), obs.iter().map(|(_, v)| *v));
        let coef = ols_with_ridge_fallback(&design, &target)?;
        let mut prelim = [0.0; MONTHS];
        for (i, p) in prelim.iter_mut().enumerate() {
            *p = (0..m).map(|c| coef[c] * self.components[(i, c)]).sum();
        }
        let latest = obs.iter().map(|(i, _)| *i).max().unwrap_or(0);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, v) in obs {
            let w = self.config.rho.powi((latest - i) as i32);
            num += w * (v - prelim[*i]);
            den += w;
        }
        let residual = if den > 0.0 { self.config.delta * num / den } else { 0.0 };
        Ok((prelim, residual))
    }

    pub fn predict(&self, series: &MonthlySeries) -> Result<[f64; MONTHS]> {
        let obs: Vec<(usize, f64)> = series
            .observed()
            .map(|(i, v)| self.param.forward(v / DAYS_IN_MONTH[i] as f64).map(|t| (i, t)))
            .collect::<Result<_>>()?;
        if obs.is_empty() {
            return Err(Error::EmptyMeter(series.meter_id.0.clone()));
        }
        let (prelim, residual) = self.transformed_forecast(&obs)?;
        let mut out = [0.0; MONTHS];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.param.inverse((prelim[i] + residual).clamp(self.bounds.0, self.bounds.1)) * DAYS_IN_MONTH[i] as f64;
        }
        Ok(clip_month_values(out))
    }
}

pub fn svd_group_forecaster(monthly: &[MonthlySeries], config: SvdGroupConfig) -> Result<MonthlyTable> {
    let model = SvdGroupModel::fit(monthly, config)?;
    monthly
        .iter()
        .map(|m| Ok((m.meter_id.clone(), model.predict(m)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MeterId;

    fn series(id: &str, values: [Option<f64>; 12]) -> MonthlySeries {
        MonthlySeries {
            meter_id: MeterId::from(id),
            months: values,
        }
    }

    fn monthly_from_daily_avg(avg: [f64; 12]) -> [Option<f64>; 12] {
        let mut out = [None; 12];
        for i in 0..12 {
            out[i] = Some(avg[i] * DAYS_IN_MONTH[i] as f64);
        }
        out
    }

    #[test]
    fn rank_one_group_is_reconstructed() {
        let shape = [3.0, 2.8, 2.5, 2.0, 1.6, 1.4, 1.3, 1.4, 1.6, 2.0, 2.5, 3.0];
        let monthly: Vec<MonthlySeries> = [1.0, 2.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, c)| series(&format!("m{i}"), monthly_from_daily_avg(shape.map(|s| s * c + 1.0))))
            .collect();
        // λ = 1 maps x to x − 1, so the transformed matrix is exactly rank 1.
        let config = SvdGroupConfig {
            lambda: Some(1.0),
            delta: 0.0,
            robust_rounds: 0,
            ..Default::default()
        };
        let model = SvdGroupModel::fit(&monthly, config).unwrap();
        assert!(model.singular_values[1] < 1e-9 * model.singular_values[0]);
        assert_eq!(model.rank(), 1);
        for m in &monthly {
            let pred = model.predict(m).unwrap();
            for (p, t) in pred.iter().zip(m.months) {
                assert!((p - t.unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_residuals_leave_preliminary_forecast() {
        let shape = [3.0, 2.8, 2.5, 2.0, 1.6, 1.4, 1.3, 1.4, 1.6, 2.0, 2.5, 3.0];
        let mut monthly: Vec<MonthlySeries> = [1.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, c)| series(&format!("m{i}"), monthly_from_daily_avg(shape.map(|s| s * c))))
            .collect();
        let mut partial = monthly_from_daily_avg(shape.map(|s| s * 3.0));
        partial[..5].iter_mut().for_each(|v| *v = None);
        monthly.push(series("late", partial));
        let config = SvdGroupConfig {
            lambda: Some(1.0),
            robust_rounds: 0,
            ..Default::default()
        };
        let model = SvdGroupModel::fit(&monthly, config).unwrap();
        let pred = model.predict(&monthly[2]).unwrap();
        for (i, p) in pred.iter().enumerate() {
            assert!((p - shape[i] * 3.0 * DAYS_IN_MONTH[i] as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn full_rank_reproduces_observed_transformed_months() {
        let rows: Vec<[f64; 12]> = (0..14)
            .map(|r| std::array::from_fn(|c| 1.0 + ((r * 7 + c * 3) % 11) as f64 + 0.1 * r as f64))
            .collect();
        let monthly: Vec<MonthlySeries> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| series(&format!("m{i:02}"), monthly_from_daily_avg(*r)))
            .collect();
        let config = SvdGroupConfig {
            lambda: Some(0.5),
            max_components: 12,
            delta: 0.0,
            robust_rounds: 0,
            ..Default::default()
        };
        let model = SvdGroupModel::fit(&monthly, config).unwrap();
        for r in &rows {
            let obs: Vec<(usize, f64)> = r.iter().enumerate().map(|(i, v)| (i, model.param.forward(*v).unwrap())).collect();
            let (prelim, residual) = model.transformed_forecast(&obs).unwrap();
            assert_eq!(residual, 0.0);
            for (i, v) in &obs {
                assert!((prelim[*i] - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn empty_g0_is_an_error() {
        let mut months = [Some(1.0); 12];
        months[0] = None;
        assert!(svd_group_forecaster(&[series("a", months)], SvdGroupConfig::default()).is_err());
    }
}
