//! Canonical data model: meter series, weather, survey answers and cohorts.

pub mod aggregate;
pub mod calendar;
pub mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use calendar::{MONTHS, SLOTS_PER_DAY, SLOTS_PER_YEAR};

pub use aggregate::{aggregate_daily, aggregate_monthly, availability_group, DayRule};

/// Anonymized meter identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeterId(pub String);

impl MeterId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MeterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MeterId {
    fn from(s: &str) -> Self {
        MeterId(s.to_owned())
    }
}

impl From<String> for MeterId {
    fn from(s: String) -> Self {
        MeterId(s)
    }
}

/// One half-hourly slot of a meter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub timestamp: NaiveDateTime,
    pub value: Option<f64>,
}

/// A meter's 2017 half-hourly consumption, one slot per half hour.
///
/// Values are stored as `f32` with `NaN` marking a missing slot; a full
/// 3,248-meter cohort would otherwise need close to a gigabyte.
#[derive(Debug, Clone)]
pub struct MeterSeries {
    meter_id: MeterId,
    values: Vec<f32>,
}

/// Missing slots compare equal to each other.
impl PartialEq for MeterSeries {
    fn eq(&self, other: &Self) -> bool {
        self.meter_id == other.meter_id
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

impl MeterSeries {
    /// Builds a series from optional kWh values, one per slot.
    pub fn new(meter_id: MeterId, values: &[Option<f64>]) -> Result<Self> {
        if values.len() != SLOTS_PER_YEAR {
            return Err(Error::DimensionMismatch(format!(
                "meter {meter_id} has {} slots, expected {SLOTS_PER_YEAR}",
                values.len()
            )));
        }
        let mut raw = Vec::with_capacity(SLOTS_PER_YEAR);
        for v in values {
            match v {
                Some(x) if !x.is_finite() => {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite reading for meter {meter_id}"
                    )))
                }
                Some(x) if *x < 0.0 => {
                    return Err(Error::NegativeConsumption { line: 0, value: *x })
                }
                Some(x) => raw.push(*x as f32),
                None => raw.push(f32::NAN),
            }
        }
        Ok(Self {
            meter_id,
            values: raw,
        })
    }

    /// Builds a series from raw storage (`NaN` = missing). Negative or infinite
    /// values are treated as missing.
    pub fn from_raw(meter_id: MeterId, mut values: Vec<f32>) -> Self {
        assert_eq!(values.len(), SLOTS_PER_YEAR, "slot count");
        for v in values.iter_mut() {
            if !v.is_finite() || *v < 0.0 {
                *v = f32::NAN;
            }
        }
        Self { meter_id, values }
    }

    pub fn meter_id(&self) -> &MeterId {
        &self.meter_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|v| v.is_nan())
    }

    pub fn value(&self, slot: usize) -> Option<f64> {
        let v = self.values[slot];
        (!v.is_nan()).then_some(v as f64)
    }

    pub fn raw(&self) -> &[f32] {
        &self.values
    }

    pub fn raw_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn day(&self, day: usize) -> &[f32] {
        &self.values[day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY]
    }

    pub fn readings(&self) -> impl Iterator<Item = Reading> + '_ {
        (0..SLOTS_PER_YEAR).map(|slot| Reading {
            timestamp: calendar::slot_timestamp(slot),
            value: self.value(slot),
        })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// First month with any non-missing reading.
    pub fn signup_month(&self) -> Option<usize> {
        self.values
            .iter()
            .position(|v| !v.is_nan())
            .map(|slot| calendar::month_of_day(slot / SLOTS_PER_DAY))
    }
}

/// Daily totals for one calendar year (missing days are `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub meter_id: MeterId,
    pub year: i32,
    pub days: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn first_present(&self) -> Option<usize> {
        self.days.iter().position(Option::is_some)
    }
}

/// Twelve optional monthly totals (kWh) for one meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub meter_id: MeterId,
    pub months: [Option<f64>; MONTHS],
}

impl MonthlySeries {
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.months
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|x| (i, x)))
    }

    pub fn observed_count(&self) -> usize {
        self.months.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.observed_count() == MONTHS
    }

    /// All twelve values when complete.
    pub fn complete_values(&self) -> Option<[f64; MONTHS]> {
        let mut out = [0.0; MONTHS];
        for (o, m) in out.iter_mut().zip(self.months.iter()) {
            *o = (*m)?;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

/// Daily temperatures in °C.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub days: Vec<DailyWeather>,
}

impl WeatherSeries {
    pub fn new(mut days: Vec<DailyWeather>) -> Result<Self> {
        days.sort_by_key(|d| d.date);
        for w in days.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::InvalidParameter(format!(
                    "duplicate weather date {}",
                    w[0].date
                )));
            }
        }
        for d in &days {
            if !(d.min <= d.avg && d.avg <= d.max) {
                return Err(Error::InvalidParameter(format!(
                    "weather on {} violates min <= avg <= max",
                    d.date
                )));
            }
        }
        Ok(Self { days })
    }

    /// The days of `year`, in date order.
    pub fn year(&self, year: i32) -> Vec<DailyWeather> {
        use chrono::Datelike;
        self.days
            .iter()
            .filter(|d| d.date.year() == year)
            .copied()
            .collect()
    }

    /// Daily average temperatures of `year`, requiring a complete year.
    pub fn year_avg(&self, year: i32) -> Result<Vec<f64>> {
        let days = self.year(year);
        if days.len() != calendar::DAYS_PER_YEAR {
            return Err(Error::InsufficientData(format!(
                "weather covers {} days of {year}",
                days.len()
            )));
        }
        Ok(days.iter().map(|d| d.avg).collect())
    }
}

/// One household's survey answers; every field is independently optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub meter_id: MeterId,
    pub dwelling_type: Option<String>,
    pub num_occupants: Option<u32>,
    pub num_bedrooms: Option<u32>,
    pub heating_fuel: Option<String>,
    pub hot_water_fuel: Option<String>,
    pub boiler_age: Option<String>,
    pub loft_insulation: Option<String>,
    pub wall_insulation: Option<String>,
    pub heating_temperature: Option<f64>,
    pub efficient_lighting: Option<f64>,
    pub dishwasher: Option<u32>,
    pub freezer: Option<u32>,
    pub fridge_freezer: Option<u32>,
    pub refrigerator: Option<u32>,
    pub tumble_dryer: Option<u32>,
    pub washing_machine: Option<u32>,
    pub game_console: Option<u32>,
    pub laptop: Option<u32>,
    pub pc: Option<u32>,
    pub router: Option<u32>,
    pub set_top_box: Option<u32>,
    pub tablet: Option<u32>,
    pub tv: Option<u32>,
}

impl SurveyRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.efficient_lighting {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "efficient_lighting {p} for meter {} outside [0, 100]",
                    self.meter_id
                )));
            }
        }
        Ok(())
    }

    /// Appliance counts keyed by column name.
    pub fn appliances(&self) -> [(&'static str, Option<u32>); 13] {
        [
            ("dishwasher", self.dishwasher),
            ("freezer", self.freezer),
            ("fridge_freezer", self.fridge_freezer),
            ("refrigerator", self.refrigerator),
            ("tumble_dryer", self.tumble_dryer),
            ("washing_machine", self.washing_machine),
            ("game_console", self.game_console),
            ("laptop", self.laptop),
            ("pc", self.pc),
            ("router", self.router),
            ("set_top_box", self.set_top_box),
            ("tablet", self.tablet),
            ("tv", self.tv),
        ]
    }
}

/// A complete dataset: meters, weather, survey and optional 2018 truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub meters: Vec<MeterSeries>,
    pub weather: WeatherSeries,
    pub survey: Vec<SurveyRecord>,
    pub ground_truth_2018: Option<Vec<MonthlySeries>>,
}

impl Cohort {
    /// Validates and canonicalizes (meters and survey sorted by id).
    pub fn new(
        mut meters: Vec<MeterSeries>,
        weather: WeatherSeries,
        mut survey: Vec<SurveyRecord>,
        ground_truth_2018: Option<Vec<MonthlySeries>>,
    ) -> Result<Self> {
        meters.sort_by(|a, b| a.meter_id.cmp(&b.meter_id));
        for w in meters.windows(2) {
            if w[0].meter_id == w[1].meter_id {
                return Err(Error::InvalidParameter(format!(
                    "duplicate meter {}",
                    w[0].meter_id
                )));
            }
        }
        let ids: BTreeSet<&MeterId> = meters.iter().map(|m| &m.meter_id).collect();
        survey.sort_by(|a, b| a.meter_id.cmp(&b.meter_id));
        for rec in &survey {
            if !ids.contains(&rec.meter_id) {
                return Err(Error::UnknownSurveyMeter(rec.meter_id.0.clone()));
            }
            rec.validate()?;
        }
        let ground_truth_2018 = match ground_truth_2018 {
            Some(mut truth) => {
                truth.sort_by(|a, b| a.meter_id.cmp(&b.meter_id));
                let truth_ids: BTreeSet<&MeterId> = truth.iter().map(|t| &t.meter_id).collect();
                if truth_ids != ids || truth.iter().any(|t| !t.is_complete()) {
                    return Err(Error::MeterMismatch(
                        "ground truth must cover every meter with 12 months".into(),
                    ));
                }
                Some(truth)
            }
            None => None,
        };
        Ok(Self {
            meters,
            weather,
            survey,
            ground_truth_2018,
        })
    }

    pub fn meter_ids(&self) -> Vec<MeterId> {
        self.meters.iter().map(|m| m.meter_id.clone()).collect()
    }

    pub fn meter(&self, id: &MeterId) -> Option<&MeterSeries> {
        self.meters
            .binary_search_by(|m| m.meter_id.cmp(id))
            .ok()
            .map(|i| &self.meters[i])
    }

    pub fn survey_for(&self, id: &MeterId) -> Option<&SurveyRecord> {
        self.survey
            .binary_search_by(|s| s.meter_id.cmp(id))
            .ok()
            .map(|i| &self.survey[i])
    }

    /// Ground truth as a map of twelve monthly totals per meter.
    pub fn truth_table(&self) -> Option<BTreeMap<MeterId, [f64; MONTHS]>> {
        self.ground_truth_2018.as_ref().map(|truth| {
            truth
                .iter()
                .map(|t| (t.meter_id.clone(), t.complete_values().expect("validated")))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_with(first_slot: usize) -> MeterSeries {
        let mut vals = vec![None; SLOTS_PER_YEAR];
        for v in vals.iter_mut().skip(first_slot) {
            *v = Some(0.25);
        }
        MeterSeries::new("m".into(), &vals).unwrap()
    }

    #[test]
    fn signup_month_follows_first_reading() {
        assert_eq!(series_with(0).signup_month(), Some(1));
        let march = calendar::month_start_day(3) * SLOTS_PER_DAY + 5;
        assert_eq!(series_with(march).signup_month(), Some(3));
        let empty = MeterSeries::new("e".into(), &vec![None; SLOTS_PER_YEAR]).unwrap();
        assert_eq!(empty.signup_month(), None);
        assert!(empty.is_empty());
    }

    #[test]
    fn rejects_negative_and_wrong_length() {
        let mut vals = vec![Some(1.0); SLOTS_PER_YEAR];
        vals[3] = Some(-0.1);
        assert!(matches!(
            MeterSeries::new("m".into(), &vals),
            Err(Error::NegativeConsumption { .. })
        ));
        assert!(MeterSeries::new("m".into(), &[Some(1.0)]).is_err());
    }

    #[test]
    fn zero_is_data_not_missing() {
        let vals = vec![Some(0.0); SLOTS_PER_YEAR];
        let s = MeterSeries::new("z".into(), &vals).unwrap();
        assert_eq!(s.missing_count(), 0);
        assert_eq!(s.value(10), Some(0.0));
    }

    #[test]
    fn weather_invariant_checked() {
        let date = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        let bad = DailyWeather {
            date,
            avg: 5.0,
            min: 6.0,
            max: 7.0,
        };
        assert!(WeatherSeries::new(vec![bad]).is_err());
    }

    #[test]
    fn cohort_rejects_unknown_survey_meter() {
        let s = series_with(0);
        let rec = SurveyRecord {
            meter_id: "other".into(),
            ..Default::default()
        };
        let err = Cohort::new(vec![s], WeatherSeries::default(), vec![rec], None).unwrap_err();
        assert!(matches!(err, Error::UnknownSurveyMeter(id) if id == "other"));
    }
}
