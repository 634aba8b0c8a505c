//! Calendar arithmetic for the fixed half-hourly grid.
//!
//! Both 2017 and 2018 are non-leap years, so a single 365-day layout serves the
//! observed year and the forecast year. Times are naive local clock times; there
//! is no time-zone or DST handling.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

pub const BASE_YEAR: i32 = 2017;
pub const FORECAST_YEAR: i32 = 2018;
pub const SLOTS_PER_DAY: usize = 48;
pub const DAYS_PER_YEAR: usize = 365;
pub const SLOTS_PER_YEAR: usize = SLOTS_PER_DAY * DAYS_PER_YEAR;
pub const MONTHS: usize = 12;

pub const DAYS_IN_MONTH: [usize; MONTHS] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

pub const MONTH_NAMES: [&str; MONTHS] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Whether `year` uses the 365-day layout assumed throughout the crate.
pub fn is_supported_year(year: i32) -> bool {
    NaiveDate::from_ymd_opt(year, 2, 29).is_none()
}

/// Zero-based day-of-year on which 1-based `month` starts.
pub fn month_start_day(month: usize) -> usize {
    DAYS_IN_MONTH[..month - 1].iter().sum()
}

/// Day-of-year range (zero-based, half-open) covered by 1-based `month`.
pub fn month_days(month: usize) -> std::ops::Range<usize> {
    let start = month_start_day(month);
    start..start + DAYS_IN_MONTH[month - 1]
}

/// 1-based month containing zero-based day-of-year `day`.
pub fn month_of_day(day: usize) -> usize {
    let mut acc = 0;
    for (i, len) in DAYS_IN_MONTH.iter().enumerate() {
        acc += len;
        if day < acc {
            return i + 1;
        }
    }
    MONTHS
}

pub fn date_of_day(year: i32, day: usize) -> NaiveDate {
    NaiveDate::from_yo_opt(year, day as u32 + 1).expect("day within year")
}

/// Zero-based day-of-year of `date`.
pub fn day_of_date(date: NaiveDate) -> usize {
    date.ordinal0() as usize
}

/// Weekday of a day, 0 = Monday … 6 = Sunday.
pub fn weekday_of_day(year: i32, day: usize) -> usize {
    date_of_day(year, day).weekday().num_days_from_monday() as usize
}

pub fn slot_timestamp(slot: usize) -> NaiveDateTime {
    let day = slot / SLOTS_PER_DAY;
    let within = slot % SLOTS_PER_DAY;
    date_of_day(BASE_YEAR, day)
        .and_hms_opt((within / 2) as u32, (within % 2 * 30) as u32, 0)
        .expect("valid half-hour")
}

/// Slot index of a 2017 timestamp on a half-hour boundary.
pub fn slot_of_timestamp(ts: NaiveDateTime) -> Option<usize> {
    if ts.year() != BASE_YEAR || ts.second() != 0 || ts.minute() % 30 != 0 {
        return None;
    }
    let day = ts.ordinal0() as usize;
    Some(day * SLOTS_PER_DAY + ts.hour() as usize * 2 + ts.minute() as usize / 30)
}

pub fn format_slot(slot: usize) -> String {
    slot_timestamp(slot).format("%Y-%m-%dT%H:%M").to_string()
}

pub fn format_month(year: i32, month: usize) -> String {
    format!("{year}-{month:02}")
}

/// Parses `YYYY-MM` into `(year, month)`.
pub fn parse_month(text: &str) -> Option<(i32, usize)> {
    let (y, m) = text.split_once('-')?;
    if m.len() != 2 {
        return None;
    }
    let year = y.parse().ok()?;
    let month: usize = m.parse().ok()?;
    (1..=MONTHS).contains(&month).then_some((year, month))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_layout_covers_year() {
        assert_eq!(DAYS_IN_MONTH.iter().sum::<usize>(), DAYS_PER_YEAR);
        assert_eq!(month_start_day(1), 0);
        assert_eq!(month_start_day(12), 334);
        assert_eq!(month_of_day(0), 1);
        assert_eq!(month_of_day(58), 2);
        assert_eq!(month_of_day(59), 3);
        assert_eq!(month_of_day(364), 12);
    }

    #[test]
    fn slots_round_trip() {
        for slot in [0, 1, 47, 48, 17_519] {
            assert_eq!(slot_of_timestamp(slot_timestamp(slot)), Some(slot));
        }
        assert_eq!(format_slot(17_519), "2017-12-31T23:30");
    }

    #[test]
    fn first_day_is_sunday() {
        assert_eq!(weekday_of_day(2017, 0), 6);
        assert_eq!(weekday_of_day(2018, 0), 0);
    }

    #[test]
    fn both_years_are_non_leap() {
        assert!(is_supported_year(2017));
        assert!(is_supported_year(2018));
        assert!(!is_supported_year(2020));
    }

    #[test]
    fn month_labels() {
        assert_eq!(format_month(2018, 3), "2018-03");
        assert_eq!(parse_month("2018-12"), Some((2018, 12)));
        assert_eq!(parse_month("2018-13"), None);
    }
}
