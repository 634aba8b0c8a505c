//! Blinded review packets: per meter and horizon, one entry per finalist with
//! its prediction, explanation text and the actual monthly series for charting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::{Cohort, MeterId, SurveyRecord};
use crate::error::{Error, Result};
use crate::explain::{ExplanationBundle, Horizon};
use crate::forecast::ForecastSet;
use crate::preprocess::prepare;
use crate::rng;

/// Months reviewed besides the yearly forecast.
pub const REVIEW_MONTHS: [usize; 3] = [2, 5, 12];
pub const REVIEW_METERS: usize = 10;

/// The yearly horizon followed by the reviewed months.
pub fn review_horizons() -> Vec<Horizon> {
    std::iter::once(Horizon::Year)
        .chain(REVIEW_MONTHS.iter().map(|m| Horizon::Month(*m)))
        .collect()
}

/// Stable horizon key used in entry ids: `year` or `m02`.
pub fn horizon_key(h: Horizon) -> String {
    match h {
        Horizon::Year => "year".into(),
        Horizon::Month(m) => format!("m{m:02}"),
    }
}

/// Blinded finalist label: A, B, …, Z, AA, …
pub fn finalist_label(i: usize) -> String {
    let mut n = i + 1;
    let mut s = Vec::new();
    while n > 0 {
        n -= 1;
        s.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// A finalist's forecast and the explanations of its predictions.
#[derive(Debug, Clone)]
pub struct FinalistInput {
    pub forecast: ForecastSet,
    pub bundles: Vec<ExplanationBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub entry_id: String,
    pub meter_id: MeterId,
    pub horizon: Horizon,
    pub label: String,
    pub prediction_kwh: f64,
    pub predicted_monthly: [f64; MONTHS],
    pub explanation: String,
    pub actual_base_year: [Option<f64>; MONTHS],
    /// Hidden when the packet is built without revealing the forecast-year truth.
    pub actual_forecast_year: Option<[f64; MONTHS]>,
    pub survey: Option<SurveyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewPacket {
    pub packet_id: String,
    pub labels: Vec<String>,
    pub meters: Vec<MeterId>,
    pub horizons: Vec<Horizon>,
    pub entries: Vec<ReviewEntry>,
}

impl ReviewPacket {
    pub fn entry(&self, entry_id: &str) -> Option<&ReviewEntry> {
        self.entries.iter().find(|e| e.entry_id == entry_id)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|_| Error::MissingInput(path.to_path_buf()))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Label → pipeline id. Kept out of every reviewer-facing payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindingKey {
    pub packet_id: String,
    pub labels: BTreeMap<String, String>,
}

impl BlindingKey {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|_| Error::MissingInput(path.to_path_buf()))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackOptions {
    pub seed: u64,
    /// Include forecast-year truth in the chart series.
    pub reveal_truth: bool,
}

impl Default for PackOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            reveal_truth: true,
        }
    }
}

/// `n` meters drawn without replacement, in id order.
pub fn select_review_meters(cohort: &Cohort, n: usize, seed: u64) -> Result<Vec<MeterId>> {
    let mut ids = cohort.meter_ids();
    if ids.len() < n {
        return Err(Error::InsufficientData(format!(
            "{} meters available, {n} requested",
            ids.len()
        )));
    }
    ids.shuffle(&mut rng::stream(seed, "review/meters"));
    ids.truncate(n);
    ids.sort();
    Ok(ids)
}

pub fn pack_review(
    packet_id: &str,
    cohort: &Cohort,
    finalists: &[FinalistInput],
    meter_ids: &[MeterId],
    options: PackOptions,
) -> Result<(ReviewPacket, BlindingKey)> {
    if finalists.is_empty() || meter_ids.is_empty() {
        return Err(Error::InsufficientData("a packet needs finalists and meters".into()));
    }
    let mut order: Vec<usize> = (0..finalists.len()).collect();
    order.shuffle(&mut rng::stream(options.seed, &format!("review/blinding/{packet_id}")));
    // label i belongs to finalist order[i]
    let labels: Vec<String> = (0..finalists.len()).map(finalist_label).collect();
    let key = BlindingKey {
        packet_id: packet_id.to_string(),
        labels: labels
            .iter()
            .zip(&order)
            .map(|(l, f)| (l.clone(), finalists[*f].forecast.pipeline_id.clone()))
            .collect(),
    };

    let history = prepare(cohort, &[])?.monthly;
    let truth = if options.reveal_truth { cohort.truth_table() } else { None };
    let horizons = review_horizons();
    let mut entries = Vec::with_capacity(meter_ids.len() * horizons.len() * finalists.len());
    for id in meter_ids {
        let idx = cohort
            .meters
            .binary_search_by(|m| m.meter_id().cmp(id))
            .map_err(|_| Error::MeterMismatch(format!("unknown meter {id}")))?;
        let actual_forecast_year = truth.as_ref().and_then(|t: &MonthlyTable| t.get(id).copied());
        for &h in &horizons {
            for (label, &f) in labels.iter().zip(&order) {
                let finalist = &finalists[f];
                let missing = || Error::MissingExplanation {
                    meter_id: id.0.clone(),
                    horizon: horizon_key(h),
                    finalist: finalist.forecast.pipeline_id.clone(),
                };
                let predicted = *finalist.forecast.get(id).ok_or_else(missing)?;
                let text = finalist
                    .bundles
                    .iter()
                    .find(|b| &b.meter_id == id)
                    .and_then(|b| b.get(h))
                    .ok_or_else(missing)?
                    .text
                    .clone();
                entries.push(ReviewEntry {
                    entry_id: format!("{id}/{}/{label}", horizon_key(h)),
                    meter_id: id.clone(),
                    horizon: h,
                    label: label.clone(),
                    prediction_kwh: match h {
                        Horizon::Year => predicted.iter().sum(),
                        Horizon::Month(m) => predicted[m - 1],
                    },
                    predicted_monthly: predicted,
                    explanation: text,
                    actual_base_year: history[idx].months,
                    actual_forecast_year,
                    survey: cohort.survey_for(id).cloned(),
                });
            }
        }
    }
    Ok((
        ReviewPacket {
            packet_id: packet_id.to_string(),
            labels,
            meters: meter_ids.to_vec(),
            horizons,
            entries,
        },
        key,
    ))
}

impl fmt::Display for ReviewPacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "packet {}: {} meters × {} horizons × {} finalists",
            self.packet_id,
            self.meters.len(),
            self.horizons.len(),
            self.labels.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_continue_past_z() {
        assert_eq!(finalist_label(0), "A");
        assert_eq!(finalist_label(2), "C");
        assert_eq!(finalist_label(25), "Z");
        assert_eq!(finalist_label(26), "AA");
    }

    #[test]
    fn horizons_are_year_then_reviewed_months() {
        let keys: Vec<String> = review_horizons().into_iter().map(horizon_key).collect();
        assert_eq!(keys, ["year", "m02", "m05", "m12"]);
    }
}
