//! Seasonal moving-block bootstrap of a year of daily weather: each
//! temperature column is split into a two-harmonic annual cycle and a
//! remainder, the remainder is resampled in contiguous blocks, and the cycle
//! is added back at the original day of year.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::data::calendar::{self, DAYS_PER_YEAR, FORECAST_YEAR};
use crate::data::DailyWeather;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::rng;

pub const DEFAULT_BLOCK_LENGTH: usize = 30;

fn harmonics(day: usize) -> [f64; 5] {
    let a = 2.0 * std::f64::consts::PI * day as f64 / DAYS_PER_YEAR as f64;
    [1.0, a.sin(), a.cos(), (2.0 * a).sin(), (2.0 * a).cos()]
}

/// Least-squares annual cycle of one column.
pub fn seasonal_cycle(values: &[f64]) -> Result<Vec<f64>> {
    let x = DMatrix::from_fn(values.len(), 5, |d, j| harmonics(d)[j]);
    let c = lstsq(&x, &DVector::from_column_slice(values))?;
    Ok((0..values.len())
        .map(|d| harmonics(d).iter().zip(c.iter()).map(|(h, c)| h * c).sum())
        .collect())
}

/// 365 simulated days: the base year's annual cycle plus remainder blocks of
/// `block_length` days sampled with replacement (the last block truncated).
/// One block start is shared by avg, min and max. Output dates are relabelled
/// to the forecast year.
pub fn bootstrap_temperature(weather_2017: &[DailyWeather], block_length: usize, seed: u64) -> Result<Vec<DailyWeather>> {
    if weather_2017.len() != DAYS_PER_YEAR {
        return Err(Error::InsufficientData(format!(
            "bootstrap needs {DAYS_PER_YEAR} days of weather, got {}",
            weather_2017.len()
        )));
    }
    if !(2..=DAYS_PER_YEAR).contains(&block_length) {
        return Err(Error::InvalidParameter(format!(
            "block length {block_length} outside [2, {DAYS_PER_YEAR}]"
        )));
    }
    let columns: [Vec<f64>; 3] = [
        weather_2017.iter().map(|w| w.avg).collect(),
        weather_2017.iter().map(|w| w.min).collect(),
        weather_2017.iter().map(|w| w.max).collect(),
    ];
    let cycles = columns.iter().map(|c| seasonal_cycle(c)).collect::<Result<Vec<_>>>()?;
    let remainders: Vec<Vec<f64>> = columns
        .iter()
        .zip(&cycles)
        .map(|(c, s)| c.iter().zip(s).map(|(x, s)| x - s).collect())
        .collect();
    let mut rng = rng::stream(seed, "bootstrap_temperature");
    let mut sources = Vec::with_capacity(DAYS_PER_YEAR);
    while sources.len() < DAYS_PER_YEAR {
        let start = rng.gen_range(0..=DAYS_PER_YEAR - block_length);
        let take = block_length.min(DAYS_PER_YEAR - sources.len());
        sources.extend(start..start + take);
    }
    Ok(sources
        .iter()
        .enumerate()
        .map(|(d, &src)| {
            let v: Vec<f64> = (0..3).map(|c| cycles[c][d] + remainders[c][src]).collect();
            DailyWeather {
                date: calendar::date_of_day(FORECAST_YEAR, d),
                avg: v[0],
                min: v[1].min(v[0]),
                max: v[2].max(v[0]),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_weather;

    fn base() -> Vec<DailyWeather> {
        generate_weather(5).year(2017)
    }

    #[test]
    fn full_block_is_the_base_year() {
        let w = base();
        let out = bootstrap_temperature(&w, 365, 1).unwrap();
        for (a, b) in out.iter().zip(&w) {
            assert!((a.avg - b.avg).abs() < 1e-9 && (a.min - b.min).abs() < 1e-9 && (a.max - b.max).abs() < 1e-9);
        }
    }

    #[test]
    fn remainder_blocks_are_contiguous_substrings() {
        let w = base();
        let avgs: Vec<f64> = w.iter().map(|d| d.avg).collect();
        let cycle = seasonal_cycle(&avgs).unwrap();
        let rem: Vec<f64> = avgs.iter().zip(&cycle).map(|(x, s)| x - s).collect();
        let l = 30;
        let out = bootstrap_temperature(&w, l, 9).unwrap();
        for start in (0..DAYS_PER_YEAR).step_by(l) {
            let end = (start + l).min(DAYS_PER_YEAR);
            let block: Vec<f64> = (start..end).map(|d| out[d].avg - cycle[d]).collect();
            assert!(rem
                .windows(block.len())
                .any(|win| win.iter().zip(&block).all(|(a, b)| (a - b).abs() < 1e-9)));
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let w = base();
        assert_eq!(bootstrap_temperature(&w, 30, 3).unwrap(), bootstrap_temperature(&w, 30, 3).unwrap());
        assert!(bootstrap_temperature(&w, 1, 3).is_err());
        assert!(bootstrap_temperature(&w, 366, 3).is_err());
    }

    #[test]
    fn keeps_the_annual_cycle() {
        let w = crate::datagen::generate_weather(5).year(2017);
        let out = bootstrap_temperature(&w, 30, 4).unwrap();
        let jan: f64 = out[..31].iter().map(|d| d.avg).sum::<f64>() / 31.0;
        let jul: f64 = out[181..212].iter().map(|d| d.avg).sum::<f64>() / 31.0;
        assert!(jul - jan > 5.0, "{jan} {jul}");
    }
}
