//! Declarative pipeline specs (preprocessing steps, model, post-processing)
//! and the built-in finalist pipelines.

use serde::{Deserialize, Serialize};

use crate::data::calendar::BASE_YEAR;
use crate::data::io::MonthlyTable;
use crate::data::{Cohort, DailyWeather, DayRule};
use crate::error::{Error, Result};
use crate::preprocess::{prepare, PrepStep, Prepared};
use crate::rng;

use super::baseline::naive_baseline;
use super::centroid::{cluster_centroid_forecaster, CentroidConfig};
use super::daily::DailyFeatures;
use super::ensemble::{ensemble, EnsembleMethod};
use super::expectile::{expectile_forecaster, ExpectileConfig};
use super::knn::{knn_base_forecaster, Distance, KnnConfig};
use super::postprocess::{postprocess_wu, PostprocessConfig};
use super::profile::median_profile_forecaster;
use super::regression::{pooled_penalized_regression, Penalty, PooledConfig, TemperatureSource};
use super::svd_group::{svd_group_forecaster, SvdGroupConfig};
use super::wu::{wu_forecaster, WuConfig};
use super::ForecastSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Naive,
    MedianProfile,
    SvdGroup(SvdGroupConfig),
    Knn(KnnConfig),
    ClusterCentroid(CentroidConfig),
    PooledRegression(PooledConfig),
    Expectile(ExpectileConfig),
    Wu(WuConfig),
    Ensemble {
        members: Vec<ModelSpec>,
        #[serde(flatten)]
        method: EnsembleMethod,
    },
}

impl ModelSpec {
    fn run(&self, prepared: &Prepared, weather: &[DailyWeather], seed: u64) -> Result<MonthlyTable> {
        let (daily, monthly) = (&prepared.daily, &prepared.monthly);
        match self {
            ModelSpec::Naive => naive_baseline(monthly),
            ModelSpec::MedianProfile => median_profile_forecaster(monthly),
            ModelSpec::SvdGroup(c) => svd_group_forecaster(monthly, *c),
            ModelSpec::Knn(c) => knn_base_forecaster(monthly, KnnConfig { seed, ..*c }),
            ModelSpec::ClusterCentroid(c) => cluster_centroid_forecaster(monthly, CentroidConfig { seed, ..*c }),
            ModelSpec::PooledRegression(c) => {
                pooled_penalized_regression(daily, monthly, weather, PooledConfig { seed, ..*c })
            }
            ModelSpec::Expectile(c) => expectile_forecaster(daily, monthly, weather, ExpectileConfig { seed, ..*c }),
            ModelSpec::Wu(c) => wu_forecaster(daily, monthly, &WuConfig { seed, ..c.clone() }),
            ModelSpec::Ensemble { members, method } => {
                let tables = members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.run(prepared, weather, rng::derive_seed(seed, &format!("member/{i}"))))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&MonthlyTable> = tables.iter().collect();
                ensemble(&refs, method)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub id: String,
    #[serde(default)]
    pub steps: Vec<PrepStep>,
    pub model: ModelSpec,
    #[serde(default)]
    pub postprocess: Option<PostprocessConfig>,
}

pub const BUILTIN_PIPELINES: [&str; 10] = ["naive", "wu", "sr", "ad", "sl", "jl", "kb", "dr", "yc", "kbx"];

fn monthly_steps(max_missing_days: usize) -> Vec<PrepStep> {
    vec![
        PrepStep::AggregateDaily { rule: DayRule::AnyMissing },
        PrepStep::AggregateMonthly { max_missing_days },
    ]
}

fn filled_daily_steps(nearest_day: bool, interpolate: bool) -> Vec<PrepStep> {
    let mut steps = Vec::new();
    if nearest_day {
        steps.push(PrepStep::FillNearestDay);
    }
    steps.push(PrepStep::AggregateDaily { rule: DayRule::AnyMissing });
    if interpolate {
        steps.push(PrepStep::InterpolateDaily);
    }
    steps.push(PrepStep::FillSeasonalMedian);
    steps.push(PrepStep::AggregateMonthly { max_missing_days: 5 });
    steps
}

pub fn builtin_pipeline(name: &str) -> Result<PipelineSpec> {
    let (steps, model) = match name {
        "naive" => (monthly_steps(5), ModelSpec::Naive),
        "wu" => {
            let mut steps = vec![PrepStep::DropDeadWindows { window_days: 3 }];
            steps.extend(monthly_steps(5));
            (steps, ModelSpec::Wu(WuConfig::default()))
        }
        "sr" => (
            monthly_steps(0),
            ModelSpec::Ensemble {
                members: vec![
                    ModelSpec::MedianProfile,
                    ModelSpec::Knn(KnnConfig {
                        distance: Distance::Correlation,
                        ..Default::default()
                    }),
                ],
                method: EnsembleMethod::Mean,
            },
        ),
        "ad" => (monthly_steps(5), ModelSpec::SvdGroup(SvdGroupConfig::default())),
        "sl" => (monthly_steps(5), ModelSpec::Knn(KnnConfig::default())),
        "jl" => (monthly_steps(5), ModelSpec::ClusterCentroid(CentroidConfig::default())),
        "kb" => (
            filled_daily_steps(false, false),
            ModelSpec::Ensemble {
                members: vec![
                    ModelSpec::PooledRegression(PooledConfig {
                        penalty: Penalty::None,
                        lambda: 0.0,
                        features: DailyFeatures {
                            lags: 14,
                            temperature: true,
                            day_of_week: false,
                            month: false,
                        },
                        ..Default::default()
                    }),
                    ModelSpec::PooledRegression(PooledConfig::default()),
                    ModelSpec::PooledRegression(PooledConfig {
                        features: DailyFeatures {
                            lags: 20,
                            ..Default::default()
                        },
                        ..Default::default()
                    }),
                ],
                method: EnsembleMethod::GeometricMean,
            },
        ),
        "kbx" => (
            filled_daily_steps(false, false),
            ModelSpec::PooledRegression(PooledConfig {
                penalty: Penalty::L2,
                lambda: 1e-3,
                features: DailyFeatures {
                    lags: 20,
                    ..Default::default()
                },
                ..Default::default()
            }),
        ),
        "dr" => (filled_daily_steps(false, true), ModelSpec::Expectile(ExpectileConfig::default())),
        "yc" => (
            filled_daily_steps(true, false),
            ModelSpec::PooledRegression(PooledConfig {
                penalty: Penalty::L2,
                lambda: 1e-2,
                temperature_source: TemperatureSource::CollaborativeFilter,
                features: DailyFeatures {
                    lags: 7,
                    temperature: true,
                    day_of_week: true,
                    month: false,
                },
                ..Default::default()
            }),
        ),
        other => return Err(Error::UnknownPipeline(other.to_string())),
    };
    Ok(PipelineSpec {
        id: name.to_string(),
        steps,
        model,
        postprocess: None,
    })
}

/// Prepares the cohort, fits the model and applies any post-processing.
/// All randomness derives from `seed` and the pipeline id.
pub fn run_pipeline(cohort: &Cohort, spec: &PipelineSpec, seed: u64) -> Result<ForecastSet> {
    let prepared = prepare(cohort, &spec.steps)?;
    let weather = cohort.weather.year(BASE_YEAR);
    let model_seed = rng::derive_seed(seed, &format!("pipeline/{}", spec.id));
    let mut table = spec.model.run(&prepared, &weather, model_seed)?;
    if let Some(pp) = &spec.postprocess {
        table = postprocess_wu(&table, &prepared.daily, &prepared.monthly, pp);
    }
    ForecastSet::new(spec.id.clone(), table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip_through_json() {
        for name in BUILTIN_PIPELINES {
            let spec = builtin_pipeline(name).unwrap();
            let json = serde_json::to_string(&spec).unwrap();
            let back: PipelineSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec, "{name}");
        }
        assert!(builtin_pipeline("nope").is_err());
    }
}
