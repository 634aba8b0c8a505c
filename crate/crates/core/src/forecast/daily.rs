//! Shared plumbing for pooled daily models: per-meter normalization, lag
//! features, training-row assembly and the recursive 2018 roll-out.
//!
//! Each meter's daily series is divided by its mean present value so one
//! pooled model serves every household; forecasts are scaled back.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::calendar::{self, BASE_YEAR, DAYS_IN_MONTH, DAYS_PER_YEAR, FORECAST_YEAR, MONTHS};
use crate::data::{DailySeries, MeterId, MonthlySeries};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DailyFeatures {
    pub lags: usize,
    pub temperature: bool,
    pub day_of_week: bool,
    pub month: bool,
}

impl Default for DailyFeatures {
    fn default() -> Self {
        Self {
            lags: 14,
            temperature: true,
            day_of_week: true,
            month: true,
        }
    }
}

impl DailyFeatures {
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (1..=self.lags).map(|l| format!("lag_{l}")).collect();
        if self.temperature {
            out.push("temperature".into());
        }
        if self.day_of_week {
            out.extend(["tue", "wed", "thu", "fri", "sat", "sun"].map(String::from));
        }
        if self.month {
            out.extend(calendar::MONTH_NAMES[1..].iter().map(|m| m.to_lowercase()));
        }
        out
    }

    pub fn width(&self) -> usize {
        self.lags + self.temperature as usize + 6 * self.day_of_week as usize + 11 * self.month as usize
    }

    /// Feature row; `lags[0]` is the previous day.
    pub fn row(&self, lags: &[f64], temperature: f64, year: i32, day: usize) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.width());
        r.extend_from_slice(&lags[..self.lags]);
        if self.temperature {
            r.push(temperature);
        }
        if self.day_of_week {
            let wd = calendar::weekday_of_day(year, day);
            r.extend((1..7).map(|k| (wd == k) as u8 as f64));
        }
        if self.month {
            let m = calendar::month_of_day(day);
            r.extend((2..=MONTHS).map(|k| (m == k) as u8 as f64));
        }
        r
    }
}

/// One meter's daily series in units of its own mean present day.
#[derive(Debug, Clone)]
pub struct NormalizedDaily {
    pub meter_id: MeterId,
    pub values: Vec<Option<f64>>,
    pub scale: f64,
}

impl NormalizedDaily {
    /// Falls back to the monthly view for the scale when no day is present.
    pub fn new(daily: &DailySeries, monthly: &MonthlySeries) -> Self {
        let present: Vec<f64> = daily.days.iter().flatten().copied().collect();
        let mut scale = if present.is_empty() {
            let obs: Vec<f64> = monthly.observed().map(|(i, v)| v / DAYS_IN_MONTH[i] as f64).collect();
            if obs.is_empty() { 0.0 } else { obs.iter().sum::<f64>() / obs.len() as f64 }
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        if !(scale > 0.0) {
            scale = 0.0;
        }
        let values = if scale > 0.0 {
            daily.days.iter().map(|v| v.map(|x| x / scale)).collect()
        } else {
            vec![None; daily.days.len()]
        };
        Self {
            meter_id: daily.meter_id.clone(),
            values,
            scale,
        }
    }

    /// The last `lags` days of the base year (most recent first); gaps become 1.0.
    pub fn final_lags(&self, lags: usize) -> Vec<f64> {
        (0..lags)
            .map(|l| self.values.get(DAYS_PER_YEAR - 1 - l).copied().flatten().unwrap_or(1.0))
            .collect()
    }
}

/// Pooled training rows: every day whose value and all lags are present.
/// Above `max_rows`, a deterministic seeded subset is kept.
pub fn training_rows(
    meters: &[NormalizedDaily],
    features: &DailyFeatures,
    temps: &[f64],
    max_rows: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut lags = vec![0.0; features.lags];
    for m in meters {
        'day: for d in features.lags..DAYS_PER_YEAR {
            let Some(target) = m.values[d] else { continue };
            for (l, slot) in lags.iter_mut().enumerate() {
                match m.values[d - 1 - l] {
                    Some(v) => *slot = v,
                    None => continue 'day,
                }
            }
            x.push(features.row(&lags, temps[d], BASE_YEAR, d));
            y.push(target);
        }
    }
    if x.len() > max_rows {
        let mut rng = rng::stream(seed, "training_rows");
        let mut keep = sample(&mut rng, x.len(), max_rows).into_vec();
        keep.sort_unstable();
        x = keep.iter().map(|i| std::mem::take(&mut x[*i])).collect();
        y = keep.iter().map(|i| y[*i]).collect();
    }
    (x, y)
}

/// Recursive one-day-ahead forecast over the forecast year, in normalized units.
pub fn roll_out(
    predict: impl Fn(&[f64]) -> f64,
    meter: &NormalizedDaily,
    features: &DailyFeatures,
    temps_2018: &[f64],
) -> Vec<f64> {
    let mut lags = meter.final_lags(features.lags);
    let mut out = Vec::with_capacity(DAYS_PER_YEAR);
    for (d, t) in temps_2018.iter().enumerate().take(DAYS_PER_YEAR) {
        let row = features.row(&lags, *t, FORECAST_YEAR, d);
        let v = predict(&row);
        let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
        out.push(v);
        if features.lags > 0 {
            lags.rotate_right(1);
            lags[0] = v;
        }
    }
    out
}

pub fn monthly_sums(days: &[f64]) -> [f64; MONTHS] {
    let mut out = [0.0; MONTHS];
    for (m, o) in out.iter_mut().enumerate() {
        *o = days[calendar::month_days(m + 1)].iter().sum();
    }
    out
}
