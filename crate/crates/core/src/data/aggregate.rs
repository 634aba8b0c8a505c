//! Temporal aggregation: half-hourly → daily → monthly, and availability groups.

use serde::{Deserialize, Serialize};

use super::calendar::{self, DAYS_PER_YEAR, MONTHS, SLOTS_PER_DAY};
use super::{DailySeries, MeterSeries, MonthlySeries};
use crate::error::{Error, Result};

/// When a day with missing half-hours still yields a total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayRule {
    /// Any missing slot makes the whole day missing.
    AnyMissing,
    /// Days with at most this many missing slots are kept, rescaled by 48/present.
    MaxMissing(usize),
}

impl Default for DayRule {
    fn default() -> Self {
        DayRule::AnyMissing
    }
}

pub fn aggregate_daily(series: &MeterSeries, rule: DayRule) -> DailySeries {
    let max_missing = match rule {
        DayRule::AnyMissing => 0,
        DayRule::MaxMissing(m) => m,
    };
    let days = (0..DAYS_PER_YEAR)
        .map(|day| {
            let slots = series.day(day);
            let mut sum = 0.0f64;
            let mut present = 0usize;
            for v in slots {
                if !v.is_nan() {
                    sum += *v as f64;
                    present += 1;
                }
            }
            let missing = SLOTS_PER_DAY - present;
            if present == 0 || missing > max_missing {
                None
            } else if missing == 0 {
                Some(sum)
            } else {
                Some(sum * SLOTS_PER_DAY as f64 / present as f64)
            }
        })
        .collect();
    DailySeries {
        meter_id: series.meter_id().clone(),
        year: calendar::BASE_YEAR,
        days,
    }
}

/// Months with more than `max_missing_days` missing days are unknown; otherwise
/// the present days are summed and scaled by days_in_month / present_days.
pub fn aggregate_monthly(daily: &DailySeries, max_missing_days: usize) -> MonthlySeries {
    let mut months = [None; MONTHS];
    for (m, out) in months.iter_mut().enumerate() {
        let range = calendar::month_days(m + 1);
        let len = range.len();
        let mut sum = 0.0;
        let mut present = 0usize;
        for d in range {
            if let Some(v) = daily.days.get(d).copied().flatten() {
                sum += v;
                present += 1;
            }
        }
        let missing = len - present;
        *out = if present == 0 || missing > max_missing_days {
            None
        } else if missing == 0 {
            Some(sum)
        } else {
            Some(sum * len as f64 / present as f64)
        };
    }
    MonthlySeries {
        meter_id: daily.meter_id.clone(),
        months,
    }
}

/// Availability group `g`: the number of leading missing months.
pub fn availability_group(series: &MonthlySeries) -> Result<usize> {
    series
        .months
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::EmptyMeter(series.meter_id.0.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::calendar::SLOTS_PER_YEAR;
    use crate::data::MeterId;
    use proptest::prelude::*;

    fn series(values: Vec<Option<f64>>) -> MeterSeries {
        MeterSeries::new(MeterId::from("m"), &values).unwrap()
    }

    #[test]
    fn full_day_sums() {
        let s = series(vec![Some(0.5); SLOTS_PER_YEAR]);
        let d = aggregate_daily(&s, DayRule::AnyMissing);
        assert_eq!(d.days[0], Some(24.0));
    }

    #[test]
    fn one_missing_slot_rules() {
        let mut v = vec![Some(0.5); SLOTS_PER_YEAR];
        v[7] = None;
        let s = series(v);
        assert_eq!(aggregate_daily(&s, DayRule::AnyMissing).days[0], None);
        let kept = aggregate_daily(&s, DayRule::MaxMissing(2)).days[0].unwrap();
        // 47 × 0.5 = 23.5, rescaled by 48/47.
        assert!((kept - 23.5 * 48.0 / 47.0).abs() < 1e-12);
        assert!((kept - 24.0).abs() < 1e-12);
    }

    fn daily(days: Vec<Option<f64>>) -> DailySeries {
        DailySeries {
            meter_id: MeterId::from("m"),
            year: 2017,
            days,
        }
    }

    #[test]
    fn monthly_plain_sum_and_threshold() {
        let mut days = vec![Some(10.0); DAYS_PER_YEAR];
        let jan = aggregate_monthly(&daily(days.clone()), 5);
        assert_eq!(jan.months[0], Some(310.0));
        for d in 0..6 {
            days[d] = None;
        }
        assert_eq!(aggregate_monthly(&daily(days), 5).months[0], None);
    }

    #[test]
    fn monthly_rescales_partial_month() {
        // April has 30 days; 27 present days of 10 kWh → 270 → 300.
        let mut days = vec![Some(10.0); DAYS_PER_YEAR];
        let april = calendar::month_start_day(4);
        for d in april..april + 3 {
            days[d] = None;
        }
        let m = aggregate_monthly(&daily(days), 5);
        assert!((m.months[3].unwrap() - 300.0).abs() < 1e-12);
    }

    fn monthly(vals: [Option<f64>; 12]) -> MonthlySeries {
        MonthlySeries {
            meter_id: MeterId::from("m"),
            months: vals,
        }
    }

    #[test]
    fn availability_groups() {
        assert_eq!(availability_group(&monthly([Some(1.0); 12])).unwrap(), 0);
        let mut dec = [None; 12];
        dec[11] = Some(5.0);
        assert_eq!(availability_group(&monthly(dec)).unwrap(), 11);
        let mut march = [Some(1.0); 12];
        march[0] = None;
        march[1] = None;
        march[6] = None; // interior gap does not matter
        assert_eq!(availability_group(&monthly(march)).unwrap(), 2);
        assert!(matches!(
            availability_group(&monthly([None; 12])),
            Err(Error::EmptyMeter(_))
        ));
    }

    proptest! {
        #[test]
        fn daily_then_monthly_equals_direct_sum(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<Option<f64>> = (0..SLOTS_PER_YEAR)
                .map(|_| Some((rng.gen_range(0.0..4.0f64) * 1000.0).round() / 1000.0))
                .collect();
            let s = series(vals);
            let m = aggregate_monthly(&aggregate_daily(&s, DayRule::AnyMissing), 0);
            for month in 1..=12 {
                let range = calendar::month_days(month);
                let direct: f64 = s.raw()[range.start * SLOTS_PER_DAY..range.end * SLOTS_PER_DAY]
                    .iter()
                    .map(|v| *v as f64)
                    .sum();
                prop_assert_eq!(m.months[month - 1], Some(direct));
            }
        }

        #[test]
        fn availability_group_is_monotone(mask in proptest::collection::vec(any::<bool>(), 12)) {
            let mut vals = [None; 12];
            for (v, keep) in vals.iter_mut().zip(&mask) {
                if *keep { *v = Some(1.0); }
            }
            if let Ok(g) = availability_group(&monthly(vals)) {
                let mut dropped = vals;
                dropped[g] = None;
                if let Ok(g2) = availability_group(&monthly(dropped)) {
                    prop_assert!(g2 > g);
                }
            }
        }
    }
}
