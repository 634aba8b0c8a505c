//! Three-structure seasonal forecaster: a global model, one model per fuzzy
//! c-means cluster, and a model anchored on November–December consumption.
//! Each structure is a harmonic (annual sine/cosine) fraction profile fit by
//! least squares; every structure is post-processed before the weighted blend.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::{DailySeries, MonthlySeries};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::preprocess::normalize_values;
use crate::rng;

use super::cluster::{fit_fcm, sq_dist};
use super::ensemble::{ensemble, EnsembleMethod};
use super::postprocess::{postprocess_wu, PostprocessConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WuConfig {
    pub clusters: usize,
    pub fuzzifier: f64,
    pub tolerance: f64,
    /// Blend weights for the global, clustered and November–December structures.
    pub weights: [f64; 3],
    pub postprocess: PostprocessConfig,
    pub seed: u64,
}

impl Default for WuConfig {
    fn default() -> Self {
        Self {
            clusters: 12,
            fuzzifier: 2.0,
            tolerance: 1e-6,
            weights: [0.4, 0.4, 0.2],
            postprocess: PostprocessConfig::default(),
            seed: 0,
        }
    }
}

fn harmonic_basis(month: usize) -> [f64; 3] {
    let a = 2.0 * std::f64::consts::PI * month as f64 / MONTHS as f64;
    [1.0, a.sin(), a.cos()]
}

/// Least-squares fit of `c₀ + c₁ sin + c₂ cos` of the month to all profiles.
pub fn harmonic_profile(profiles: &[[f64; MONTHS]]) -> Result<[f64; MONTHS]> {
    if profiles.is_empty() {
        return Err(Error::InsufficientData("no profile to fit".into()));
    }
    let mut mean = [0.0; MONTHS];
    for p in profiles {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / profiles.len() as f64);
    }
    let x = DMatrix::from_fn(MONTHS, 3, |m, j| harmonic_basis(m)[j]);
    let c = lstsq(&x, &DVector::from_column_slice(&mean))?;
    let mut out = [0.0; MONTHS];
    for (m, o) in out.iter_mut().enumerate() {
        *o = harmonic_basis(m).iter().zip(c.iter()).map(|(b, c)| b * c).sum::<f64>().max(0.0);
    }
    Ok(out)
}

fn scale_to(profile: &[f64; MONTHS], obs: &[(usize, f64)]) -> [f64; MONTHS] {
    let observed: f64 = obs.iter().map(|(_, v)| v).sum();
    let share: f64 = obs.iter().map(|(i, _)| profile[*i]).sum();
    let total = if share > 0.0 {
        observed / share
    } else {
        observed / obs.len().max(1) as f64 * MONTHS as f64
    };
    profile.map(|p| p * total)
}

fn renormalized(values: &[f64]) -> Vec<f64> {
    let s: f64 = values.iter().sum();
    if s > 0.0 {
        values.iter().map(|v| v / s).collect()
    } else {
        vec![1.0 / values.len() as f64; values.len()]
    }
}

/// The three raw (un-post-processed) structural forecasts.
pub fn wu_structures(monthly: &[MonthlySeries], config: &WuConfig) -> Result<[MonthlyTable; 3]> {
    let fractions: Vec<[f64; MONTHS]> = monthly
        .iter()
        .filter_map(|m| m.complete_values())
        .filter_map(|v| normalize_values(&v).ok())
        .collect();
    let global = harmonic_profile(&fractions)?;
    let points: Vec<Vec<f64>> = fractions.iter().map(|f| f.to_vec()).collect();
    let k = config.clusters.clamp(1, points.len());
    let fcm = fit_fcm(&points, k, config.fuzzifier, config.tolerance, rng::derive_seed(config.seed, "wu/fcm"))?;
    let cluster_profiles: Vec<[f64; MONTHS]> = (0..fcm.k)
        .map(|c| {
            let members: Vec<[f64; MONTHS]> = fractions
                .iter()
                .zip(&fcm.labels)
                .filter(|(_, l)| **l == c)
                .map(|(f, _)| *f)
                .collect();
            if members.is_empty() {
                let mut centroid = [0.0; MONTHS];
                centroid.copy_from_slice(&fcm.centroids[c]);
                harmonic_profile(&[centroid])
            } else {
                harmonic_profile(&members)
            }
        })
        .collect::<Result<_>>()?;
    let tail_share = global[10] + global[11];

    let mut out: [MonthlyTable; 3] = Default::default();
    for m in monthly {
        let obs: Vec<(usize, f64)> = m.observed().collect();
        if obs.is_empty() {
            return Err(Error::EmptyMeter(m.meter_id.0.clone()));
        }
        out[0].insert(m.meter_id.clone(), scale_to(&global, &obs));

        let target = renormalized(&obs.iter().map(|(_, v)| *v).collect::<Vec<_>>());
        let best = fcm
            .centroids
            .iter()
            .enumerate()
            .map(|(c, centroid)| {
                let part = renormalized(&obs.iter().map(|(i, _)| centroid[*i]).collect::<Vec<_>>());
                (c, sq_dist(&target, &part))
            })
            .fold((0, f64::INFINITY), |b, cur| if cur.1 < b.1 { cur } else { b })
            .0;
        out[1].insert(m.meter_id.clone(), scale_to(&cluster_profiles[best], &obs));

        let tail: Vec<(usize, f64)> = obs.iter().copied().filter(|(i, _)| *i >= 10).collect();
        let anchored = if tail.is_empty() || tail_share <= 0.0 {
            scale_to(&global, &obs)
        } else {
            scale_to(&global, &tail)
        };
        out[2].insert(m.meter_id.clone(), anchored);
    }
    Ok(out)
}

pub fn wu_forecaster(daily: &[DailySeries], monthly: &[MonthlySeries], config: &WuConfig) -> Result<MonthlyTable> {
    let structures = wu_structures(monthly, config)?;
    let processed: Vec<MonthlyTable> = structures
        .iter()
        .map(|s| postprocess_wu(s, daily, monthly, &config.postprocess))
        .collect();
    let refs: Vec<&MonthlyTable> = processed.iter().collect();
    ensemble(
        &refs,
        &EnsembleMethod::Weighted {
            weights: config.weights.to_vec(),
        },
    )
}
