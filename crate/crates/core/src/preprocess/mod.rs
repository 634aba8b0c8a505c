//! Imputation, transformation and exogenous-data simulation steps.

pub mod bootstrap;
pub mod boxcox;
pub mod completion;
pub mod fill;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_temperature, DEFAULT_BLOCK_LENGTH};
pub use boxcox::{boxcox, fit_lambda, inv_boxcox, BoxCoxParam};
pub use completion::{cf_fill, complete_monthly_matrix, Completion, CompletionConfig, PartialMatrix};
pub use fill::{drop_dead_windows, fill_nearest_day, fill_seasonal_median, interpolate_daily};

use crate::data::calendar::{DAYS_PER_YEAR, MONTHS};
use crate::data::{aggregate_daily, aggregate_monthly, Cohort, DailySeries, DailyWeather, DayRule, MeterSeries, MonthlySeries};
use crate::error::{Error, Result};

/// Splits a monthly series into fractions of its yearly total.
pub fn normalize_fraction(monthly: &MonthlySeries) -> Result<[f64; MONTHS]> {
    let values = monthly.complete_values().ok_or_else(|| {
        Error::InsufficientData(format!("meter {} has missing months", monthly.meter_id))
    })?;
    normalize_values(&values)
}

pub fn normalize_values(values: &[f64; MONTHS]) -> Result<[f64; MONTHS]> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("yearly total is not positive".into()));
    }
    Ok(values.map(|v| v / total))
}

/// Fills missing avg/min/max temperatures of a days × 3 table by rank-`rank`
/// collaborative filtering.
pub fn cf_fill_temperature(m: &PartialMatrix, rank: usize, iters: usize, seed: u64) -> Result<nalgebra::DMatrix<f64>> {
    cf_fill(m, rank, iters, seed)
}

/// Forecast-year daily mean temperature by collaborative filtering: a
/// 730-day table of standardized [avg, min, max] plus [1, sin, cos] of the
/// day of year, with the forecast year's temperatures missing, completed at
/// rank 2.
pub fn cf_temperature_forecast(weather_base: &[DailyWeather], seed: u64) -> Result<Vec<f64>> {
    if weather_base.len() != DAYS_PER_YEAR {
        return Err(Error::InsufficientData(format!(
            "expected {DAYS_PER_YEAR} days of weather, got {}",
            weather_base.len()
        )));
    }
    let cols: [Vec<f64>; 3] = [
        weather_base.iter().map(|w| w.avg).collect(),
        weather_base.iter().map(|w| w.min).collect(),
        weather_base.iter().map(|w| w.max).collect(),
    ];
    let stats: Vec<(f64, f64)> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let sd = (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
            (m, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    let mut table: PartialMatrix = Vec::with_capacity(2 * DAYS_PER_YEAR);
    for year in 0..2 {
        for d in 0..DAYS_PER_YEAR {
            let angle = 2.0 * std::f64::consts::PI * d as f64 / DAYS_PER_YEAR as f64;
            let mut row: Vec<Option<f64>> = (0..3)
                .map(|c| (year == 0).then(|| (cols[c][d] - stats[c].0) / stats[c].1))
                .collect();
            row.extend([Some(1.0), Some(angle.sin()), Some(angle.cos())]);
            table.push(row);
        }
    }
    let filled = cf_fill(&table, 2, 200, seed)?;
    Ok((0..DAYS_PER_YEAR)
        .map(|d| filled[(DAYS_PER_YEAR + d, 0)] * stats[0].1 + stats[0].0)
        .collect())
}

/// One named preprocessing step of a pipeline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PrepStep {
    DropDeadWindows { window_days: usize },
    FillNearestDay,
    AggregateDaily { rule: DayRule },
    FillSeasonalMedian,
    InterpolateDaily,
    AggregateMonthly { max_missing_days: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    HalfHourly,
    Daily,
    Monthly,
}

impl PrepStep {
    fn stage(&self) -> Stage {
        match self {
            PrepStep::DropDeadWindows { .. } | PrepStep::FillNearestDay => Stage::HalfHourly,
            PrepStep::AggregateDaily { .. } | PrepStep::FillSeasonalMedian | PrepStep::InterpolateDaily => Stage::Daily,
            PrepStep::AggregateMonthly { .. } => Stage::Monthly,
        }
    }
}

/// Daily and monthly views of every meter after a step list.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub daily: Vec<DailySeries>,
    pub monthly: Vec<MonthlySeries>,
    /// Meters whose monthly view had to be rebuilt with a lenient month rule.
    pub lenient_meters: Vec<usize>,
}

pub fn validate_steps(steps: &[PrepStep]) -> Result<()> {
    let mut last = Stage::HalfHourly;
    let mut aggregated_daily = false;
    for s in steps {
        let stage = s.stage();
        if stage < last {
            return Err(Error::InvalidConfig(format!("step {s:?} is out of order")));
        }
        if matches!(s, PrepStep::AggregateDaily { .. }) {
            if aggregated_daily {
                return Err(Error::InvalidConfig("aggregate_daily appears twice".into()));
            }
            aggregated_daily = true;
        }
        last = stage;
    }
    Ok(())
}

/// Runs the half-hourly → daily → monthly part of a pipeline for one meter.
/// Missing aggregation steps default to any-missing days and 5-day months.
pub fn prepare_meter(meter: &MeterSeries, steps: &[PrepStep]) -> (DailySeries, MonthlySeries, bool) {
    let mut series: Option<MeterSeries> = None;
    let mut daily: Option<DailySeries> = None;
    let mut monthly: Option<MonthlySeries> = None;
    for step in steps {
        let current = || series.as_ref().unwrap_or(meter);
        match step {
            PrepStep::DropDeadWindows { window_days } => series = Some(drop_dead_windows(current(), *window_days)),
            PrepStep::FillNearestDay => series = Some(fill_nearest_day(current())),
            PrepStep::AggregateDaily { rule } => daily = Some(aggregate_daily(current(), *rule)),
            PrepStep::FillSeasonalMedian | PrepStep::InterpolateDaily => {
                let d = daily.take().unwrap_or_else(|| aggregate_daily(current(), DayRule::AnyMissing));
                daily = Some(match step {
                    PrepStep::FillSeasonalMedian => fill_seasonal_median(&d),
                    _ => interpolate_daily(&d),
                });
            }
            PrepStep::AggregateMonthly { max_missing_days } => {
                let d = daily.get_or_insert_with(|| aggregate_daily(series.as_ref().unwrap_or(meter), DayRule::AnyMissing));
                monthly = Some(aggregate_monthly(d, *max_missing_days));
            }
        }
    }
    let daily = daily.unwrap_or_else(|| aggregate_daily(series.as_ref().unwrap_or(meter), DayRule::AnyMissing));
    let mut monthly = monthly.unwrap_or_else(|| aggregate_monthly(&daily, 5));
    let mut lenient = false;
    if monthly.observed_count() == 0 {
        lenient = true;
        let loose = aggregate_daily(series.as_ref().unwrap_or(meter), DayRule::MaxMissing(47));
        monthly = aggregate_monthly(&loose, 30);
        if monthly.observed_count() == 0 {
            monthly = aggregate_monthly(&loose, DAYS_PER_YEAR);
        }
    }
    (daily, monthly, lenient)
}

pub fn prepare(cohort: &Cohort, steps: &[PrepStep]) -> Result<Prepared> {
    validate_steps(steps)?;
    let mut out = Prepared {
        daily: Vec::with_capacity(cohort.meters.len()),
        monthly: Vec::with_capacity(cohort.meters.len()),
        lenient_meters: Vec::new(),
    };
    for (i, m) in cohort.meters.iter().enumerate() {
        let (d, mo, lenient) = prepare_meter(m, steps);
        if mo.observed_count() == 0 {
            return Err(Error::EmptyMeter(m.meter_id().0.clone()));
        }
        if lenient {
            log::debug!("meter {}: no month passed the month rule; aggregated leniently", m.meter_id());
            out.lenient_meters.push(i);
        }
        out.daily.push(d);
        out.monthly.push(mo);
    }
    if !out.lenient_meters.is_empty() {
        log::info!(
            "{} meters had no month passing the month rule and were aggregated leniently",
            out.lenient_meters.len()
        );
    }
    Ok(out)
}
