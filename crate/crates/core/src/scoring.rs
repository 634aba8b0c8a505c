//! Relative-absolute-error metrics, leaderboard and the combined final score.
//!
//! For truths `t` and predictions `y`:
//! - yearly: `mean_k |y_k − t_k| / mean_k |t_k − t̄|` over yearly totals;
//! - monthly: per meter `mean_i |y^i − t^i| / mean_i |t^i − t̄_k|`, averaged
//!   over meters with a non-zero denominator;
//! - total: `½·yearly + ½·monthly`.
//!
//! `t̄` is the mean of `|t|` by default; [`MeanReference::Values`] uses the
//! plain mean instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::calendar::MONTHS;
use crate::data::io::MonthlyTable;
use crate::data::MeterId;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanReference {
    /// `t̄ = mean(|t|)`.
    #[default]
    AbsoluteValues,
    /// `t̄ = mean(t)`.
    Values,
}

impl MeanReference {
    fn centre(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        match self {
            MeanReference::AbsoluteValues => xs.iter().map(|x| x.abs()).sum::<f64>() / n,
            MeanReference::Values => xs.iter().sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMeter {
    pub meter_id: MeterId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pipeline_id: Option<String>,
    pub mean_reference: MeanReference,
    pub n_meters: usize,
    pub year_rae: f64,
    pub month_rae: f64,
    pub total_rae: f64,
    pub per_meter_month_rae: BTreeMap<MeterId, f64>,
    pub skipped_meters: Vec<SkippedMeter>,
}

fn check_coverage(pred: &MonthlyTable, truth: &MonthlyTable) -> Result<()> {
    if pred.len() != truth.len() || pred.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        let missing: Vec<&str> = truth.keys().filter(|k| !pred.contains_key(*k)).map(|k| k.as_str()).take(5).collect();
        let extra: Vec<&str> = pred.keys().filter(|k| !truth.contains_key(*k)).map(|k| k.as_str()).take(5).collect();
        return Err(Error::MeterMismatch(format!("missing {missing:?}, unexpected {extra:?}")));
    }
    if let Some((id, _)) = pred.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidParameter(format!("non-finite prediction for {id}")));
    }
    Ok(())
}

pub fn year_rae(pred: &MonthlyTable, truth: &MonthlyTable, reference: MeanReference) -> Result<f64> {
    check_coverage(pred, truth)?;
    if truth.len() < 2 {
        return Err(Error::InsufficientData("yearly rAE needs at least 2 meters".into()));
    }
    let t: Vec<f64> = truth.values().map(|m| m.iter().sum()).collect();
    let y: Vec<f64> = pred.values().map(|m| m.iter().sum()).collect();
    let n = t.len() as f64;
    let t_bar = reference.centre(&t);
    let num = y.iter().zip(&t).map(|(y, t)| (y - t).abs()).sum::<f64>() / n;
    let den = t.iter().map(|t| (t - t_bar).abs()).sum::<f64>() / n;
    if den == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    Ok(num / den)
}

/// Per-meter monthly rAE, or `None` when the meter's truth has zero spread
/// around its reference mean.
pub fn meter_month_rae(pred: &[f64; MONTHS], truth: &[f64; MONTHS], reference: MeanReference) -> Option<f64> {
    let t_bar = reference.centre(truth);
    let num = pred.iter().zip(truth).map(|(y, t)| (y - t).abs()).sum::<f64>() / MONTHS as f64;
    let den = truth.iter().map(|t| (t - t_bar).abs()).sum::<f64>() / MONTHS as f64;
    (den != 0.0).then(|| num / den)
}

pub struct MonthRae {
    pub value: f64,
    pub per_meter: BTreeMap<MeterId, f64>,
    pub skipped: Vec<SkippedMeter>,
}

pub fn month_rae(pred: &MonthlyTable, truth: &MonthlyTable, reference: MeanReference) -> Result<MonthRae> {
    check_coverage(pred, truth)?;
    let mut per_meter = BTreeMap::new();
    let mut skipped = Vec::new();
    for (id, t) in truth {
        match meter_month_rae(&pred[id], t, reference) {
            Some(v) => {
                per_meter.insert(id.clone(), v);
            }
            None => skipped.push(SkippedMeter {
                meter_id: id.clone(),
                reason: "monthly truth has zero deviation from its mean".into(),
            }),
        }
    }
    if per_meter.is_empty() {
        return Err(Error::AllMetersDegenerate);
    }
    let value = per_meter.values().sum::<f64>() / per_meter.len() as f64;
    Ok(MonthRae { value, per_meter, skipped })
}

pub fn combine_total(year: f64, month: f64) -> f64 {
    0.5 * year + 0.5 * month
}

pub fn total_rae(pred: &MonthlyTable, truth: &MonthlyTable, reference: MeanReference) -> Result<ScoreReport> {
    let year = year_rae(pred, truth, reference)?;
    let month = month_rae(pred, truth, reference)?;
    Ok(ScoreReport {
        schema_version: REPORT_SCHEMA_VERSION,
        pipeline_id: None,
        mean_reference: reference,
        n_meters: truth.len(),
        year_rae: year,
        month_rae: month.value,
        total_rae: combine_total(year, month.value),
        per_meter_month_rae: month.per_meter,
        skipped_meters: month.skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub pipeline_id: String,
    pub year_rae: f64,
    pub month_rae: f64,
    pub total_rae: f64,
}

/// Ranks entries by ascending total rAE; ties go to the smaller pipeline id.
pub fn leaderboard(entries: &[(String, ScoreReport)]) -> Vec<LeaderboardRow> {
    let mut rows: Vec<LeaderboardRow> = entries
        .iter()
        .map(|(id, r)| LeaderboardRow {
            rank: 0,
            pipeline_id: id.clone(),
            year_rae: r.year_rae,
            month_rae: r.month_rae,
            total_rae: r.total_rae,
        })
        .collect();
    rows.sort_by(|a, b| a.total_rae.total_cmp(&b.total_rae).then_with(|| a.pipeline_id.cmp(&b.pipeline_id)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

/// Markdown table with the columns of the published prediction-score tables.
pub fn render_leaderboard(rows: &[LeaderboardRow]) -> String {
    let mut s = String::from("| Contestant | Yearly RAE | Monthly RAE | Total RAE |\n|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.4} |", r.pipeline_id, r.year_rae, r.month_rae, r.total_rae);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalScoreConfig {
    pub w_acc: f64,
    pub w_exp: f64,
    pub rae_cap: f64,
}

impl Default for FinalScoreConfig {
    fn default() -> Self {
        Self {
            w_acc: 0.5,
            w_exp: 0.5,
            rae_cap: 2.0,
        }
    }
}

/// `10·(w_acc·max(0, 1 − total/rae_cap) + w_exp·(mean(C) − 1)/4)`, in [0, 10].
pub fn final_score(total_rae: f64, criterion_means: &[f64; 10], config: FinalScoreConfig) -> Result<f64> {
    for (i, c) in criterion_means.iter().enumerate() {
        if !(1.0..=5.0).contains(c) {
            return Err(Error::CriterionOutOfRange { index: i + 1, value: *c });
        }
    }
    if config.w_acc < 0.0 || config.w_exp < 0.0 || (config.w_acc + config.w_exp - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("weights must be non-negative and sum to 1".into()));
    }
    if !(config.rae_cap > 0.0) || !(total_rae >= 0.0) {
        return Err(Error::InvalidParameter("rae_cap must be positive and total_rae non-negative".into()));
    }
    let accuracy = (1.0 - total_rae / config.rae_cap).max(0.0);
    let explanation = (criterion_means.iter().sum::<f64>() / 10.0 - 1.0) / 4.0;
    Ok(10.0 * (config.w_acc * accuracy + config.w_exp * explanation))
}

/// Markdown table with the columns of the published overall-score table.
pub fn render_final_scores(rows: &[(String, f64)]) -> String {
    let mut s = String::from("| Contestants | Score |\n|---|---|\n");
    for (id, score) in rows {
        let _ = writeln!(s, "| {id} | {score:.2} |");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[[f64; 12]]) -> MonthlyTable {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (MeterId(format!("m{i:02}")), *r))
            .collect()
    }

    fn spread(total: f64) -> [f64; 12] {
        let mut r = [0.0; 12];
        r[0] = total * 0.4;
        r[5] = total * 0.6;
        r
    }

    #[test]
    fn yearly_hand_example() {
        let truth = table(&[spread(100.0), spread(200.0)]);
        let pred = table(&[spread(110.0), spread(190.0)]);
        let v = year_rae(&pred, &truth, MeanReference::AbsoluteValues).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        assert_eq!(year_rae(&truth, &truth, MeanReference::AbsoluteValues).unwrap(), 0.0);
        let flat = table(&[spread(100.0), spread(100.0)]);
        assert!(matches!(year_rae(&pred, &flat, MeanReference::AbsoluteValues), Err(Error::DegenerateTruth)));
    }

    #[test]
    fn monthly_flat_prediction_scores_one() {
        let mut t = [10.0; 12];
        t[6..].iter_mut().for_each(|v| *v = 20.0);
        assert_eq!(meter_month_rae(&[15.0; 12], &t, MeanReference::AbsoluteValues), Some(1.0));
        assert_eq!(meter_month_rae(&[15.0; 12], &[3.0; 12], MeanReference::AbsoluteValues), None);
    }

    #[test]
    fn degenerate_meters_are_skipped() {
        let mut varied = [10.0; 12];
        varied[0] = 40.0;
        let truth = table(&[varied, [5.0; 12]]);
        let m = month_rae(&truth, &truth, MeanReference::AbsoluteValues).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.skipped.len(), 1);
        let all_flat = table(&[[5.0; 12], [6.0; 12]]);
        assert!(matches!(month_rae(&all_flat, &all_flat, MeanReference::AbsoluteValues), Err(Error::AllMetersDegenerate)));
    }

    #[test]
    fn published_totals() {
        assert!((combine_total(0.2864, 1.0078) - 0.6471).abs() < 5e-5 + 1e-12);
        assert!((combine_total(0.3333, 1.4062) - 0.8697).abs() < 5e-5 + 1e-12);
    }

    fn report(total: f64) -> ScoreReport {
        ScoreReport {
            schema_version: REPORT_SCHEMA_VERSION,
            pipeline_id: None,
            mean_reference: MeanReference::AbsoluteValues,
            n_meters: 0,
            year_rae: total,
            month_rae: total,
            total_rae: total,
            per_meter_month_rae: BTreeMap::new(),
            skipped_meters: vec![],
        }
    }

    #[test]
    fn leaderboard_order() {
        let rows = leaderboard(&[("b".into(), report(0.6655)), ("a".into(), report(0.6471))]);
        assert_eq!(rows[0].pipeline_id, "a");
        let rows = leaderboard(&[("z".into(), report(0.5)), ("y".into(), report(0.5))]);
        assert_eq!(rows[0].pipeline_id, "y");
        assert!(leaderboard(&[]).is_empty());
    }

    #[test]
    fn final_score_cases() {
        let c = FinalScoreConfig::default();
        assert_eq!(final_score(0.0, &[5.0; 10], c).unwrap(), 10.0);
        assert_eq!(final_score(2.0, &[1.0; 10], c).unwrap(), 0.0);
        let s = final_score(0.9493, &[3.79; 10], c).unwrap();
        let expected = 10.0 * (0.5 * (1.0 - 0.9493 / 2.0) + 0.5 * (3.79 - 1.0) / 4.0);
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 6.11).abs() < 0.005);
        assert!(matches!(final_score(0.5, &[0.5; 10], c), Err(Error::CriterionOutOfRange { index: 1, .. })));
    }

    proptest! {
        #[test]
        fn scale_and_permutation_invariance(
            rows in proptest::collection::vec((proptest::array::uniform12(1.0..100.0f64), proptest::array::uniform12(0.0..100.0f64)), 3..8),
            c in 0.1..10.0f64,
        ) {
            let truth: Vec<[f64; 12]> = rows.iter().map(|r| r.0).collect();
            let pred: Vec<[f64; 12]> = rows.iter().map(|r| r.1).collect();
            let base = total_rae(&table(&pred), &table(&truth), MeanReference::AbsoluteValues).unwrap();
            let scaled = total_rae(
                &table(&pred.iter().map(|r| r.map(|v| v * c)).collect::<Vec<_>>()),
                &table(&truth.iter().map(|r| r.map(|v| v * c)).collect::<Vec<_>>()),
                MeanReference::AbsoluteValues,
            ).unwrap();
            prop_assert!((base.total_rae - scaled.total_rae).abs() < 1e-9 * base.total_rae.max(1.0));
            let rev_t: Vec<_> = truth.iter().rev().copied().collect();
            let rev_p: Vec<_> = pred.iter().rev().copied().collect();
            let permuted = total_rae(&table(&rev_p), &table(&rev_t), MeanReference::AbsoluteValues).unwrap();
            prop_assert!((base.year_rae - permuted.year_rae).abs() < 1e-12);
            prop_assert!((base.month_rae - permuted.month_rae).abs() < 1e-12);
        }
    }
}
