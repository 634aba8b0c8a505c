//! Rule-based post-processing of a monthly forecast: malfunction zeroing,
//! low-recent-consumption override, 3-month smoothing and seasonal scaling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::calendar::{DAYS_PER_YEAR, MONTHS};
use crate::data::io::MonthlyTable;
use crate::data::{DailySeries, MeterId, MonthlySeries};

use super::{clip_month_values, smooth3};

const TAIL_DAYS: usize = 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    /// kWh over the final 31 days of the base year below which a meter is
    /// treated as malfunctioning.
    pub malfunction_threshold: f64,
    /// A latest month this fraction below the meter's mean triggers the
    /// flat latest-month prediction.
    pub low_ratio: f64,
    pub winter_factor: f64,
    pub summer_factor: f64,
    /// 1-based months scaled by `winter_factor`.
    pub winter_months: Vec<usize>,
    /// 1-based months scaled by `summer_factor`.
    pub summer_months: Vec<usize>,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            malfunction_threshold: 1.0,
            low_ratio: 0.2,
            winter_factor: 1.15,
            summer_factor: 0.85,
            winter_months: vec![12, 1, 2],
            summer_months: vec![6, 7, 8],
        }
    }
}

/// Sum of present daily values over the last 31 days of the base year.
pub fn tail_total(daily: &DailySeries) -> f64 {
    daily.days[DAYS_PER_YEAR - TAIL_DAYS..DAYS_PER_YEAR].iter().flatten().sum()
}

pub fn postprocess_meter(
    forecast: &[f64; MONTHS],
    daily: &DailySeries,
    monthly: &MonthlySeries,
    config: &PostprocessConfig,
) -> [f64; MONTHS] {
    if tail_total(daily) < config.malfunction_threshold {
        return [0.0; MONTHS];
    }
    let mut out = *forecast;
    let obs: Vec<(usize, f64)> = monthly.observed().collect();
    if let Some(&(_, latest)) = obs.last() {
        let mean = obs.iter().map(|(_, v)| v).sum::<f64>() / obs.len() as f64;
        if latest < (1.0 - config.low_ratio) * mean {
            out = [latest; MONTHS];
        }
    }
    out = smooth3(&out);
    for m in &config.winter_months {
        if (1..=MONTHS).contains(m) {
            out[m - 1] *= config.winter_factor;
        }
    }
    for m in &config.summer_months {
        if (1..=MONTHS).contains(m) {
            out[m - 1] *= config.summer_factor;
        }
    }
    clip_month_values(out)
}

/// Applies [`postprocess_meter`] to every meter of `forecast`; meters without
/// base-year data are left unchanged.
pub fn postprocess_wu(
    forecast: &MonthlyTable,
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    config: &PostprocessConfig,
) -> MonthlyTable {
    let index: BTreeMap<&MeterId, usize> = monthly.iter().enumerate().map(|(i, m)| (&m.meter_id, i)).collect();
    forecast
        .iter()
        .map(|(id, f)| {
            let out = match index.get(id) {
                Some(&i) => postprocess_meter(f, &daily[i], &monthly[i], config),
                None => *f,
            };
            (id.clone(), out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::calendar::BASE_YEAR;

    fn meter(day_value: f64, months: [Option<f64>; MONTHS]) -> (DailySeries, MonthlySeries) {
        let id = MeterId::from("m");
        (
            DailySeries {
                meter_id: id.clone(),
                year: BASE_YEAR,
                days: vec![Some(day_value); DAYS_PER_YEAR],
            },
            MonthlySeries { meter_id: id, months },
        )
    }

    #[test]
    fn malfunction_gives_zero() {
        let (d, m) = meter(0.0, [Some(100.0); MONTHS]);
        assert_eq!(postprocess_meter(&[100.0; MONTHS], &d, &m, &PostprocessConfig::default()), [0.0; MONTHS]);
    }

    #[test]
    fn seasonal_factors() {
        let (d, m) = meter(3.0, [Some(100.0); MONTHS]);
        let out = postprocess_meter(&[100.0; MONTHS], &d, &m, &PostprocessConfig::default());
        assert!((out[0] - 115.0).abs() < 1e-9);
        assert!((out[6] - 85.0).abs() < 1e-9);
        assert!((out[3] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn low_latest_month_is_used() {
        let mut months = [Some(100.0); MONTHS];
        months[11] = Some(50.0);
        let (d, m) = meter(3.0, months);
        let out = postprocess_meter(&[200.0; MONTHS], &d, &m, &PostprocessConfig::default());
        assert!((out[4] - 50.0).abs() < 1e-9);
    }
}
