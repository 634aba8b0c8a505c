//! Median seasonal profile with a per-meter shift/scale fit.

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::MonthlySeries;
use crate::error::{Error, Result};
use crate::linalg::median;
use crate::preprocess::normalize_values;

use super::clip_month_values;

/// Per-month median of the normalized profiles of fully observed meters.
pub fn median_profile(monthly: &[MonthlySeries]) -> Result<[f64; MONTHS]> {
    let fractions: Vec<[f64; MONTHS]> = monthly
        .iter()
        .filter_map(|m| m.complete_values())
        .filter_map(|v| normalize_values(&v).ok())
        .collect();
    if fractions.is_empty() {
        return Err(Error::InsufficientData("no fully observed meter for the median profile".into()));
    }
    let mut profile = [0.0; MONTHS];
    for (i, p) in profile.iter_mut().enumerate() {
        let col: Vec<f64> = fractions.iter().map(|f| f[i]).collect();
        *p = median(&col).expect("non-empty");
    }
    Ok(profile)
}

/// Least-squares `(a, b)` for `obs ≈ a + b·profile`. With fewer than two
/// observations, or when the profile is constant on them, `a = 0` and `b` is
/// the scale-only fit through the origin.
pub fn fit_shift_scale(profile: &[f64; MONTHS], obs: &[(usize, f64)]) -> (f64, f64) {
    let scale_only = || {
        let num: f64 = obs.iter().map(|(i, x)| x * profile[*i]).sum();
        let den: f64 = obs.iter().map(|(i, _)| profile[*i].powi(2)).sum();
        (0.0, if den > 0.0 { num / den } else { 0.0 })
    };
    if obs.len() < 2 {
        return scale_only();
    }
    let n = obs.len() as f64;
    let sp: f64 = obs.iter().map(|(i, _)| profile[*i]).sum();
    let spp: f64 = obs.iter().map(|(i, _)| profile[*i].powi(2)).sum();
    let sx: f64 = obs.iter().map(|(_, x)| x).sum();
    let spx: f64 = obs.iter().map(|(i, x)| profile[*i] * x).sum();
    let det = n * spp - sp * sp;
    if det.abs() <= 1e-12 * (n * spp).max(f64::MIN_POSITIVE) {
        return scale_only();
    }
    let b = (n * spx - sp * sx) / det;
    let a = (sx - b * sp) / n;
    (a, b)
}

pub fn median_profile_forecaster(monthly: &[MonthlySeries]) -> Result<MonthlyTable> {
    let profile = median_profile(monthly)?;
    monthly
        .iter()
        .map(|m| {
            let obs: Vec<(usize, f64)> = m.observed().collect();
            if obs.is_empty() {
                return Err(Error::EmptyMeter(m.meter_id.0.clone()));
            }
            let (a, b) = fit_shift_scale(&profile, &obs);
            Ok((m.meter_id.clone(), clip_month_values(profile.map(|p| a + b * p))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MeterId;

    const SHAPE: [f64; 12] = [3.0, 2.8, 2.5, 2.0, 1.6, 1.4, 1.3, 1.4, 1.6, 2.0, 2.5, 3.0];

    #[test]
    fn exact_multiples_are_reproduced() {
        let monthly: Vec<MonthlySeries> = [1.0, 5.0, 20.0]
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut months = SHAPE.map(|s| Some(s * c));
                if i == 2 {
                    months[..4].iter_mut().for_each(|v| *v = None);
                }
                MonthlySeries {
                    meter_id: MeterId(format!("m{i}")),
                    months,
                }
            })
            .collect();
        let out = median_profile_forecaster(&monthly).unwrap();
        for (i, c) in [1.0, 5.0, 20.0].iter().enumerate() {
            let pred = out[&MeterId(format!("m{i}"))];
            for (p, s) in pred.iter().zip(SHAPE) {
                assert!((p - s * c).abs() < 1e-9, "{p} vs {}", s * c);
            }
        }
    }

    #[test]
    fn flat_profile_constant_observations() {
        let m = MonthlySeries {
            meter_id: MeterId::from("a"),
            months: [Some(10.0); 12],
        };
        let out = median_profile_forecaster(&[m]).unwrap();
        assert!(out[&MeterId::from("a")].iter().all(|v| (v - 10.0).abs() < 1e-12));
    }

    #[test]
    fn two_point_fit() {
        let mut profile = [0.0; 12];
        profile[0] = 1.0;
        profile[1] = 2.0;
        let (a, b) = fit_shift_scale(&profile, &[(0, 3.0), (1, 5.0)]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        let (a, b) = fit_shift_scale(&profile, &[(1, 5.0)]);
        assert_eq!((a, b), (0.0, 2.5));
    }
}
