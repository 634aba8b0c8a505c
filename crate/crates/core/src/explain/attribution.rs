//! Template texts from Shapley attributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::shapley::Attribution;
use super::{format_list, Horizon};

/// Number of features named in a text.
pub const TOP_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adverb {
    MuchLower,
    SlightlyLower,
    Similar,
    SlightlyHigher,
    MuchHigher,
}

impl Adverb {
    pub fn phrase(&self) -> &'static str {
        match self {
            Adverb::MuchLower => "much lower",
            Adverb::SlightlyLower => "slightly lower",
            Adverb::Similar => "similar",
            Adverb::SlightlyHigher => "slightly higher",
            Adverb::MuchHigher => "much higher",
        }
    }
}

/// Comparative adverb for a relative change against the previous month.
pub fn adverb_for(relative_delta: f64) -> Adverb {
    if relative_delta <= -0.25 {
        Adverb::MuchLower
    } else if relative_delta <= -0.05 {
        Adverb::SlightlyLower
    } else if relative_delta < 0.05 {
        Adverb::Similar
    } else if relative_delta < 0.25 {
        Adverb::SlightlyHigher
    } else {
        Adverb::MuchHigher
    }
}

/// The template slots of one attribution text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionText {
    pub top_features: Vec<String>,
    pub actionable_features: Vec<String>,
    /// Present for monthly texts.
    pub adverb: Option<Adverb>,
}

impl AttributionText {
    pub fn render(&self, horizon: Horizon) -> Result<String> {
        let mut text = match horizon {
            Horizon::Year => format!(
                "The estimation of your energy consumption for the next year is mostly influenced by the following attributes: {}.",
                format_list(&self.top_features)
            ),
            Horizon::Month(_) => {
                let month = horizon
                    .month_name()
                    .ok_or_else(|| Error::InvalidParameter(format!("invalid horizon {horizon:?}")))?;
                let adverb = self
                    .adverb
                    .ok_or_else(|| Error::InvalidParameter("monthly text needs a comparative adverb".into()))?;
                format!(
                    "In {month}, your energy consumption will be {} because of the following attributes: {}.",
                    adverb.phrase(),
                    format_list(&self.top_features)
                )
            }
        };
        if !self.actionable_features.is_empty() {
            let frame = match horizon {
                Horizon::Year => "Your consumption may reduce by controlling the following devices",
                Horizon::Month(_) => {
                    "Your consumption may reduce by controlling the following devices and what is related to them"
                }
            };
            text.push_str(&format!(" {frame}: {}.", format_list(&self.actionable_features)));
        }
        Ok(text)
    }
}

fn ranked(attributions: &[&Attribution]) -> Vec<String> {
    let mut order: Vec<usize> = (0..attributions.len()).collect();
    order.sort_by(|a, b| {
        attributions[*b]
            .shapley_value
            .abs()
            .total_cmp(&attributions[*a].shapley_value.abs())
            .then(a.cmp(b))
    });
    order
        .into_iter()
        .take(TOP_FEATURES)
        .map(|i| attributions[i].feature.clone())
        .collect()
}

/// Top three features by |φ|, and up to three actionable ones (ranked by |φ|
/// among the flagged features regardless of overall rank). Monthly texts need
/// the relative change against the previous month.
pub fn attribution_templates(
    attributions: &[Attribution],
    horizon: Horizon,
    relative_delta: Option<f64>,
) -> Result<(String, AttributionText)> {
    if attributions.len() < TOP_FEATURES {
        return Err(Error::InsufficientData(format!(
            "{} attributions; at least {TOP_FEATURES} are needed",
            attributions.len()
        )));
    }
    let all: Vec<&Attribution> = attributions.iter().collect();
    let actionable: Vec<&Attribution> = attributions.iter().filter(|a| a.actionable).collect();
    let adverb = match horizon {
        Horizon::Year => None,
        Horizon::Month(_) => Some(adverb_for(relative_delta.ok_or_else(|| {
            Error::InvalidParameter("monthly text needs the previous-month change".into())
        })?)),
    };
    let text = AttributionText {
        top_features: ranked(&all),
        actionable_features: ranked(&actionable),
        adverb,
    };
    Ok((text.render(horizon)?, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adverb_thresholds() {
        assert_eq!(adverb_for(-0.30), Adverb::MuchLower);
        assert_eq!(adverb_for(-0.25), Adverb::MuchLower);
        assert_eq!(adverb_for(-0.2), Adverb::SlightlyLower);
        assert_eq!(adverb_for(-0.05), Adverb::SlightlyLower);
        assert_eq!(adverb_for(0.0), Adverb::Similar);
        assert_eq!(adverb_for(0.05), Adverb::SlightlyHigher);
        assert_eq!(adverb_for(0.25), Adverb::MuchHigher);
    }

    #[test]
    fn needs_three_attributions() {
        let a = Attribution {
            feature: "x".into(),
            shapley_value: 1.0,
            actionable: false,
        };
        assert!(attribution_templates(&[a.clone(), a], Horizon::Year, None).is_err());
    }
}
