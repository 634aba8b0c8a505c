//! Forecasting models: the naive baseline, the finalist pipelines, ensembling
//! and post-processing.

pub mod baseline;
pub mod centroid;
pub mod cluster;
pub mod daily;
pub mod ensemble;
pub mod expectile;
pub mod iforest;
pub mod knn;
pub mod pipeline;
pub mod postprocess;
pub mod profile;
pub mod regression;
pub mod svd_group;
pub mod wu;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::calendar::{FORECAST_YEAR, MONTHS};
use crate::data::io::{self, MonthlyTable, PREDICTIONS_HEADER};
use crate::data::MeterId;
use crate::error::{Error, Result};

pub use baseline::naive_baseline;
pub use cluster::{fit_fcm, fit_kmeans, fit_kmeans_elbow, ClusterMethod, ClusterModel};
pub use ensemble::{ensemble, EnsembleMethod};
pub use pipeline::{builtin_pipeline, run_pipeline, ModelSpec, PipelineSpec, BUILTIN_PIPELINES};

/// Twelve 2018 monthly predictions per meter from one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    pub pipeline_id: String,
    pub predictions: MonthlyTable,
}

impl ForecastSet {
    pub fn new(pipeline_id: impl Into<String>, predictions: MonthlyTable) -> Result<Self> {
        if let Some((id, _)) = predictions
            .iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite() || *x < 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "prediction for {id} is negative or not finite"
            )));
        }
        Ok(Self {
            pipeline_id: pipeline_id.into(),
            predictions,
        })
    }

    pub fn get(&self, id: &MeterId) -> Option<&[f64; MONTHS]> {
        self.predictions.get(id)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        io::write_monthly_table(writer, PREDICTIONS_HEADER, FORECAST_YEAR, &self.predictions)
    }
}

/// Replaces non-finite or negative values with zero.
pub(crate) fn clip_month_values(v: [f64; MONTHS]) -> [f64; MONTHS] {
    v.map(|x| if x.is_finite() { x.max(0.0) } else { 0.0 })
}

/// 3-month centred moving average; the first and last month average the
/// neighbours that exist.
pub fn smooth3(v: &[f64; MONTHS]) -> [f64; MONTHS] {
    let mut out = [0.0; MONTHS];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(MONTHS - 1);
        *o = v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
    }
    out
}
