//! Cluster-centroid forecaster keyed on the sign-up month.
//!
//! For every assumed sign-up month `s` (January to November), reference
//! meters' fraction profiles over months `s..=12` are clustered (k-means,
//! elbow-selected). A target is matched to the nearest centroid on the months
//! it has observed from `s` on; the matched cluster's full-year profile is
//! rescaled by the ratio of observed totals for `s` in January–May and by the
//! observed monthly mean (× 12) otherwise. Predictions over all assumed sign-up
//! months from the real one onward are combined by an elementwise median.
//! December-only meters take the elementwise median of the `N` reference
//! meters closest in December consumption. A 3-month moving average finishes.

use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::MonthlySeries;
use crate::error::{Error, Result};
use crate::linalg::median;
use crate::preprocess::normalize_values;
use crate::rng;

use super::cluster::{fit_kmeans_elbow, sq_dist};
use super::{clip_month_values, smooth3};

/// Last 0-based sign-up month (May) whose prediction uses ratio rescaling.
const LAST_RESCALED_SIGNUP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CentroidConfig {
    pub k_max: usize,
    pub december_neighbors: usize,
    pub smooth: bool,
    pub seed: u64,
}

impl Default for CentroidConfig {
    fn default() -> Self {
        Self {
            k_max: 8,
            december_neighbors: 5,
            smooth: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct SignupClusters {
    /// Centroids over months `s..12`, normalized to sum 1.
    partial: Vec<Vec<f64>>,
    /// Full-year fraction profile per cluster.
    full: Vec<[f64; MONTHS]>,
}

#[derive(Debug, Clone)]
pub struct CentroidModel {
    clusters: Vec<SignupClusters>,
    reference_values: Vec<[f64; MONTHS]>,
    config: CentroidConfig,
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        vec![1.0 / v.len() as f64; v.len()]
    }
}

impl CentroidModel {
    pub fn fit(monthly: &[MonthlySeries], config: CentroidConfig) -> Result<Self> {
        let reference: Vec<([f64; MONTHS], [f64; MONTHS])> = monthly
            .iter()
            .filter_map(|m| m.complete_values())
            .filter_map(|v| normalize_values(&v).ok().map(|f| (v, f)))
            .collect();
        if reference.is_empty() {
            return Err(Error::InsufficientData("no fully observed reference meter".into()));
        }
        let mut clusters = Vec::with_capacity(MONTHS - 1);
        for s in 0..MONTHS - 1 {
            let points: Vec<Vec<f64>> = reference.iter().map(|(_, f)| normalize(&f[s..])).collect();
            let model = fit_kmeans_elbow(&points, config.k_max, rng::derive_seed(config.seed, &format!("centroid/{s}")))?;
            let mut partial = Vec::new();
            let mut full = Vec::new();
            for (c, centroid) in model.centroids.iter().enumerate() {
                let members: Vec<&[f64; MONTHS]> = reference
                    .iter()
                    .zip(&model.labels)
                    .filter(|(_, l)| **l == c)
                    .map(|((_, f), _)| f)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut profile = [0.0; MONTHS];
                for f in &members {
                    profile.iter_mut().zip(f.iter()).for_each(|(p, x)| *p += x / members.len() as f64);
                }
                partial.push(centroid.clone());
                full.push(profile);
            }
            clusters.push(SignupClusters { partial, full });
        }
        Ok(Self {
            clusters,
            reference_values: reference.into_iter().map(|(v, _)| v).collect(),
            config,
        })
    }

    /// Prediction assuming sign-up at 0-based month `s`, before smoothing.
    pub fn predict_for_signup(&self, obs: &[(usize, f64)], s: usize) -> Option<[f64; MONTHS]> {
        let used: Vec<(usize, f64)> = obs.iter().copied().filter(|(i, _)| *i >= s).collect();
        if used.is_empty() || s >= self.clusters.len() {
            return None;
        }
        let sc = &self.clusters[s];
        let target = normalize(&used.iter().map(|(_, v)| *v).collect::<Vec<_>>());
        let (best, _) = sc
            .partial
            .iter()
            .enumerate()
            .map(|(c, centroid)| {
                let part = normalize(&used.iter().map(|(i, _)| centroid[i - s]).collect::<Vec<_>>());
                (c, sq_dist(&target, &part))
            })
            .fold((0, f64::INFINITY), |b, cur| if cur.1 < b.1 { cur } else { b });
        let profile = sc.full[best];
        let observed: f64 = used.iter().map(|(_, v)| v).sum();
        let level = if s <= LAST_RESCALED_SIGNUP {
            let share: f64 = used.iter().map(|(i, _)| profile[*i]).sum();
            if share > 0.0 {
                observed / share
            } else {
                observed / used.len() as f64 * MONTHS as f64
            }
        } else {
            observed / used.len() as f64 * MONTHS as f64
        };
        Some(profile.map(|p| p * level))
    }

    fn december_only(&self, december: f64) -> [f64; MONTHS] {
        let mut order: Vec<(f64, usize)> = self
            .reference_values
            .iter()
            .enumerate()
            .map(|(j, v)| ((v[MONTHS - 1] - december).abs(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = self.config.december_neighbors.clamp(1, order.len());
        let mut out = [0.0; MONTHS];
        for (i, o) in out.iter_mut().enumerate() {
            let col: Vec<f64> = order[..n].iter().map(|(_, j)| self.reference_values[*j][i]).collect();
            *o = median(&col).expect("non-empty");
        }
        out
    }

    /// Unsmoothed prediction.
    pub fn predict_raw(&self, series: &MonthlySeries) -> Result<[f64; MONTHS]> {
        let obs: Vec<(usize, f64)> = series.observed().collect();
        let first = obs.first().ok_or_else(|| Error::EmptyMeter(series.meter_id.0.clone()))?.0;
        if first == MONTHS - 1 {
            return Ok(self.december_only(obs[0].1));
        }
        let preds: Vec<[f64; MONTHS]> = (first..MONTHS - 1).filter_map(|s| self.predict_for_signup(&obs, s)).collect();
        let mut out = [0.0; MONTHS];
        for (i, o) in out.iter_mut().enumerate() {
            let col: Vec<f64> = preds.iter().map(|p| p[i]).collect();
            *o = median(&col).expect("at least one assumed sign-up");
        }
        Ok(out)
    }

    pub fn predict(&self, series: &MonthlySeries) -> Result<[f64; MONTHS]> {
        let raw = self.predict_raw(series)?;
        Ok(clip_month_values(if self.config.smooth { smooth3(&raw) } else { raw }))
    }
}

pub fn cluster_centroid_forecaster(monthly: &[MonthlySeries], config: CentroidConfig) -> Result<MonthlyTable> {
    let model = CentroidModel::fit(monthly, config)?;
    monthly
        .iter()
        .map(|m| Ok((m.meter_id.clone(), model.predict(m)?)))
        .collect()
}
