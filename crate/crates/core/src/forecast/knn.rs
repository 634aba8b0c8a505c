//! Nearest-base-meter forecaster on monthly consumption fractions.
//!
//! Base meters are fully observed meters whose isolation-forest score is not
//! above the configured quantile. A target is compared with every base meter on
//! the months it has observed, each side renormalized to sum to one over those
//! months. The prediction is the mean full-year fraction of the `k` nearest
//! base meters, scaled so that it matches the target's observed total.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::MonthlySeries;
use crate::error::{Error, Result};
use crate::linalg::quantile;
use crate::preprocess::normalize_values;
use crate::rng;

use super::clip_month_values;
use super::iforest::isolation_forest;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 − Pearson correlation`; falls back to Euclidean below 2 shared months.
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    /// Base meters scoring above this quantile of isolation-forest scores are dropped.
    pub outlier_quantile: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub repeats: usize,
    pub distance: Distance,
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            outlier_quantile: 0.92,
            k_min: 10,
            k_max: 40,
            repeats: 5,
            distance: Distance::Euclidean,
            n_trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

fn partial_normalize(values: &[f64]) -> Vec<f64> {
    let s: f64 = values.iter().sum();
    if s > 0.0 {
        values.iter().map(|v| v / s).collect()
    } else {
        vec![0.0; values.len()]
    }
}

pub fn distance(kind: Distance, a: &[f64], b: &[f64]) -> f64 {
    let euclid = || a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    match kind {
        Distance::Euclidean => euclid(),
        Distance::Correlation => {
            if a.len() < 2 {
                return euclid();
            }
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            if va <= 0.0 || vb <= 0.0 {
                euclid()
            } else {
                1.0 - cov / (va * vb).sqrt()
            }
        }
    }
}

/// Prediction from the `k` nearest base fractions (ties broken by base index).
pub fn knn_predict(base: &[[f64; MONTHS]], obs: &[(usize, f64)], k: usize, kind: Distance) -> [f64; MONTHS] {
    let months: Vec<usize> = obs.iter().map(|(i, _)| *i).collect();
    let target = partial_normalize(&obs.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    let mut order: Vec<(f64, usize)> = base
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let part = partial_normalize(&months.iter().map(|i| f[*i]).collect::<Vec<_>>());
            (distance(kind, &target, &part), j)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.clamp(1, base.len());
    let mut mean = [0.0; MONTHS];
    for (_, j) in &order[..k] {
        for (m, f) in mean.iter_mut().zip(&base[*j]) {
            *m += f / k as f64;
        }
    }
    let observed_total: f64 = obs.iter().map(|(_, v)| v).sum();
    let share: f64 = months.iter().map(|i| mean[*i]).sum();
    let yearly = if share > 0.0 {
        observed_total / share
    } else {
        observed_total / obs.len() as f64 * MONTHS as f64
    };
    mean.map(|f| f * yearly)
}

/// Fully observed meters with positive totals, minus isolation-forest outliers.
pub fn base_fractions(monthly: &[MonthlySeries], config: &KnnConfig) -> Result<Vec<[f64; MONTHS]>> {
    let complete: Vec<[f64; MONTHS]> = monthly
        .iter()
        .filter_map(|m| m.complete_values())
        .filter_map(|v| normalize_values(&v).ok())
        .collect();
    if complete.is_empty() {
        return Err(Error::InsufficientData("no fully observed meter to use as a base".into()));
    }
    if complete.len() < 2 {
        return Ok(complete);
    }
    let points: Vec<Vec<f64>> = complete.iter().map(|f| f.to_vec()).collect();
    let scores = isolation_forest(&points, config.n_trees, config.subsample, rng::derive_seed(config.seed, "knn/iforest"))?;
    let cut = quantile(&scores, config.outlier_quantile).expect("non-empty");
    Ok(complete
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| *s <= cut)
        .map(|(f, _)| f)
        .collect())
}

pub fn knn_base_forecaster(monthly: &[MonthlySeries], config: KnnConfig) -> Result<MonthlyTable> {
    if config.k_min == 0 || config.k_max < config.k_min || config.repeats == 0 {
        return Err(Error::InvalidParameter("need 1 ≤ k_min ≤ k_max and repeats ≥ 1".into()));
    }
    let base = base_fractions(monthly, &config)?;
    if base.len() < config.k_min {
        log::warn!("only {} base meters; k is clamped", base.len());
    }
    monthly
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            let obs: Vec<(usize, f64)> = m.observed().collect();
            if obs.is_empty() {
                return Err(Error::EmptyMeter(m.meter_id.0.clone()));
            }
            let mut rng = rng::indexed_stream(config.seed, "knn", idx as u64);
            let mut acc = [0.0; MONTHS];
            for _ in 0..config.repeats {
                let k = rng.gen_range(config.k_min..=config.k_max);
                let p = knn_predict(&base, &obs, k, config.distance);
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += v / config.repeats as f64);
            }
            Ok((m.meter_id.clone(), clip_month_values(acc)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_base_meter_with_k_one() {
        let mut a = [1.0 / 12.0; 12];
        a[0] = 0.2;
        a[1] = 1.0 / 12.0 - (0.2 - 1.0 / 12.0);
        let b = [1.0 / 12.0; 12];
        let target: Vec<(usize, f64)> = a.iter().enumerate().map(|(i, f)| (i, f * 1200.0)).collect();
        let p = knn_predict(&[b, a], &target, 1, Distance::Euclidean);
        for (x, f) in p.iter().zip(a) {
            assert!((x - f * 1200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_base_meters_make_k_irrelevant() {
        let shape = [3.0, 2.8, 2.5, 2.0, 1.6, 1.4, 1.3, 1.4, 1.6, 2.0, 2.5, 3.0];
        let f = normalize_values(&shape).unwrap();
        let base = vec![f; 30];
        let obs = [(10, 50.0), (11, 60.0)];
        let p1 = knn_predict(&base, &obs, 3, Distance::Euclidean);
        let p2 = knn_predict(&base, &obs, 25, Distance::Correlation);
        for (a, b) in p1.iter().zip(p2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn correlation_distance_of_scaled_copy_is_zero() {
        assert!(distance(Distance::Correlation, &[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).abs() < 1e-12);
    }
}
