//! Gap handling on half-hourly and daily series.

use crate::data::calendar::{DAYS_PER_YEAR, SLOTS_PER_DAY};
use crate::data::{DailySeries, MeterSeries};
use crate::linalg::median;

fn day_is_dead(slots: &[f32]) -> bool {
    slots.iter().all(|v| v.is_nan() || *v == 0.0)
}

/// Marks every run of at least `window_days` consecutive days that are entirely
/// zero or missing as missing.
pub fn drop_dead_windows(series: &MeterSeries, window_days: usize) -> MeterSeries {
    let mut out = series.clone();
    let window = window_days.max(1);
    let dead: Vec<bool> = (0..DAYS_PER_YEAR).map(|d| day_is_dead(series.day(d))).collect();
    let mut d = 0;
    while d < DAYS_PER_YEAR {
        if !dead[d] {
            d += 1;
            continue;
        }
        let start = d;
        while d < DAYS_PER_YEAR && dead[d] {
            d += 1;
        }
        if d - start >= window {
            out.raw_mut()[start * SLOTS_PER_DAY..d * SLOTS_PER_DAY]
                .iter_mut()
                .for_each(|v| *v = f32::NAN);
        }
    }
    out
}

/// Same-time-of-day fill from days d−1, d+1, d−2, d+2 (first present wins),
/// then linear interpolation of remaining interior runs of at most two slots.
///
/// Donor values are read from the input, so one pass never chains fills.
pub fn fill_nearest_day(series: &MeterSeries) -> MeterSeries {
    let src = series.raw();
    let n = src.len();
    let mut out = src.to_vec();
    let offsets: [isize; 4] = [-1, 1, -2, 2];
    for (slot, v) in out.iter_mut().enumerate() {
        if !v.is_nan() {
            continue;
        }
        for off in offsets {
            let donor = slot as isize + off * SLOTS_PER_DAY as isize;
            if donor >= 0 && (donor as usize) < n && !src[donor as usize].is_nan() {
                *v = src[donor as usize];
                break;
            }
        }
    }
    interpolate_short_runs(&mut out, 2);
    MeterSeries::from_raw(series.meter_id().clone(), out)
}

fn interpolate_short_runs(values: &mut [f32], max_run: usize) {
    let n = values.len();
    let mut i = 0;
    while i < n {
        if !values[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i].is_nan() {
            i += 1;
        }
        let len = i - start;
        if start == 0 || i == n || len > max_run {
            continue;
        }
        let left = values[start - 1] as f64;
        let right = values[i] as f64;
        for k in 0..len {
            let t = (k + 1) as f64 / (len + 1) as f64;
            values[start + k] = (left + (right - left) * t) as f32;
        }
    }
}

/// Fills each missing day with the median of the meter's present values on the
/// same weekday; weekdays with no present values stay missing.
pub fn fill_seasonal_median(daily: &DailySeries) -> DailySeries {
    let weekday = |d: usize| crate::data::calendar::weekday_of_day(daily.year, d);
    let mut by_weekday: [Vec<f64>; 7] = Default::default();
    for (d, v) in daily.days.iter().enumerate() {
        if let Some(x) = v {
            by_weekday[weekday(d)].push(*x);
        }
    }
    let medians: Vec<Option<f64>> = by_weekday.iter().map(|v| median(v)).collect();
    let days = daily
        .days
        .iter()
        .enumerate()
        .map(|(d, v)| v.or(medians[weekday(d)]))
        .collect();
    DailySeries {
        days,
        ..daily.clone()
    }
}

/// Linear interpolation across interior gaps; leading and trailing gaps stay.
pub fn interpolate_daily(daily: &DailySeries) -> DailySeries {
    let mut days = daily.days.clone();
    let present: Vec<usize> = days
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    for w in present.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1 {
            continue;
        }
        let (va, vb) = (days[a].unwrap(), days[b].unwrap());
        for (i, slot) in days.iter_mut().enumerate().take(b).skip(a + 1) {
            let t = (i - a) as f64 / (b - a) as f64;
            *slot = Some(va + (vb - va) * t);
        }
    }
    DailySeries {
        days,
        ..daily.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::calendar::SLOTS_PER_YEAR;
    use crate::data::MeterId;
    use proptest::prelude::*;

    fn series(values: Vec<f32>) -> MeterSeries {
        MeterSeries::from_raw(MeterId::from("m"), values)
    }

    fn set_day(v: &mut [f32], day: usize, x: f32) {
        v[day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY].iter_mut().for_each(|s| *s = x);
    }

    #[test]
    fn dead_windows() {
        let mut v = vec![1.0f32; SLOTS_PER_YEAR];
        for d in 10..13 {
            set_day(&mut v, d, 0.0);
        }
        for d in 20..22 {
            set_day(&mut v, d, 0.0);
        }
        let out = drop_dead_windows(&series(v.clone()), 3);
        assert!(out.day(11).iter().all(|x| x.is_nan()));
        assert!(out.day(20).iter().all(|x| *x == 0.0));
        let mut alt = vec![1.0f32; SLOTS_PER_YEAR];
        for d in (0..40).step_by(2) {
            set_day(&mut alt, d, 0.0);
        }
        assert_eq!(drop_dead_windows(&series(alt.clone()), 3), series(alt));
    }

    #[test]
    fn nearest_day_priority() {
        let mut v = vec![f32::NAN; SLOTS_PER_YEAR];
        let t = 10;
        let d = 100;
        v[(d - 1) * SLOTS_PER_DAY + t] = 5.0;
        v[(d + 1) * SLOTS_PER_DAY + t] = 6.0;
        assert_eq!(fill_nearest_day(&series(v.clone())).raw()[d * SLOTS_PER_DAY + t], 5.0);
        v[(d - 1) * SLOTS_PER_DAY + t] = f32::NAN;
        v[(d + 1) * SLOTS_PER_DAY + t] = f32::NAN;
        v[(d - 2) * SLOTS_PER_DAY + t] = 7.0;
        v[(d + 2) * SLOTS_PER_DAY + t] = 8.0;
        assert_eq!(fill_nearest_day(&series(v)).raw()[d * SLOTS_PER_DAY + t], 7.0);
    }

    #[test]
    fn nearest_day_interpolates_isolated_slot() {
        let mut v = vec![f32::NAN; SLOTS_PER_YEAR];
        let d = 50;
        v[d * SLOTS_PER_DAY + 4] = 1.0;
        v[d * SLOTS_PER_DAY + 6] = 3.0;
        let out = fill_nearest_day(&series(v));
        assert_eq!(out.raw()[d * SLOTS_PER_DAY + 5], 2.0);
    }

    fn daily(days: Vec<Option<f64>>) -> DailySeries {
        DailySeries {
            meter_id: MeterId::from("m"),
            year: 2017,
            days,
        }
    }

    #[test]
    fn seasonal_median_by_weekday() {
        // 2017-01-02 (day 1) is a Monday.
        let mut days = vec![None; DAYS_PER_YEAR];
        days[1] = Some(10.0);
        days[8] = Some(12.0);
        days[15] = Some(14.0);
        let out = fill_seasonal_median(&daily(days.clone()));
        assert_eq!(out.days[22], Some(12.0));
        // Sunday (day 0) has no present values.
        assert_eq!(out.days[0], None);
        days[15] = None;
        assert_eq!(fill_seasonal_median(&daily(days)).days[22], Some(11.0));
    }

    #[test]
    fn interpolation() {
        let out = interpolate_daily(&daily(vec![Some(10.0), None, Some(14.0)]));
        assert_eq!(out.days, vec![Some(10.0), Some(12.0), Some(14.0)]);
        let out = interpolate_daily(&daily(vec![None, Some(10.0), Some(12.0)]));
        assert_eq!(out.days[0], None);
        let out = interpolate_daily(&daily(vec![Some(10.0), None, None, Some(16.0)]));
        assert_eq!(out.days, vec![Some(10.0), Some(12.0), Some(14.0), Some(16.0)]);
    }

    fn masked_daily() -> impl Strategy<Value = Vec<Option<f64>>> {
        proptest::collection::vec(proptest::option::weighted(0.7, 0.0..50.0f64), DAYS_PER_YEAR)
    }

    proptest! {
        #[test]
        fn daily_fills_are_idempotent_and_keep_present(days in masked_daily()) {
            let d = daily(days);
            for f in [fill_seasonal_median as fn(&DailySeries) -> DailySeries, interpolate_daily] {
                let once = f(&d);
                prop_assert_eq!(&f(&once), &once);
                for (a, b) in d.days.iter().zip(&once.days) {
                    if a.is_some() { prop_assert_eq!(a, b); }
                }
            }
        }

        #[test]
        fn dead_window_drop_is_idempotent(zero_days in proptest::collection::vec(0usize..DAYS_PER_YEAR, 0..60)) {
            let mut v = vec![1.0f32; SLOTS_PER_YEAR];
            for d in zero_days { set_day(&mut v, d, 0.0); }
            let once = drop_dead_windows(&series(v), 3);
            prop_assert_eq!(drop_dead_windows(&once, 3), once);
        }

        #[test]
        fn nearest_day_keeps_present_values(mask in proptest::collection::vec(any::<bool>(), SLOTS_PER_DAY * 10)) {
            let mut v = vec![f32::NAN; SLOTS_PER_YEAR];
            for (i, keep) in mask.iter().enumerate() {
                if *keep { v[i] = (i % 7) as f32; }
            }
            let out = fill_nearest_day(&series(v.clone()));
            for (a, b) in v.iter().zip(out.raw()) {
                if !a.is_nan() { prop_assert_eq!(a, b); }
            }
        }
    }
}
