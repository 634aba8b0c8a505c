//! Natural-language explanation generators: Shapley-attribution templates,
//! local impact rules in four classes, and a Wang–Mendel/Mamdani fuzzy
//! baseline. Every text is instantiated from a machine-readable backing that
//! regenerates it byte for byte.

pub mod attribution;
pub mod fuzzy;
pub mod generate;
pub mod rules;
pub mod shapley;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::data::calendar::{MONTHS, MONTH_NAMES};
use crate::data::MeterId;
use crate::error::{Error, Result};

pub use attribution::{adverb_for, attribution_templates, Adverb, AttributionText};
pub use fuzzy::{fuzzy_baseline_explanation, mamdani_infer, wang_mendel_learn, FuzzyRuleBase, FuzzyVariable};
pub use generate::{explain_cohort, Generator};
pub use rules::{mine_impact_rules, rule_templates, ImpactRule, RuleClass};
pub use shapley::{exact_shapley, Attribution};

/// What a text talks about: the whole forecast year or one month (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Year,
    Month(usize),
}

impl Horizon {
    pub fn month_name(&self) -> Option<&'static str> {
        match self {
            Horizon::Month(m) if (1..=MONTHS).contains(m) => Some(MONTH_NAMES[m - 1]),
            _ => None,
        }
    }
}

/// Machine-readable content a text is rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backing {
    Attributions {
        attributions: Vec<Attribution>,
        /// Model output at the background point.
        base_value: f64,
        /// Model output at the explained instance.
        model_output: f64,
        #[serde(flatten)]
        text: AttributionText,
    },
    Rules {
        rules: Vec<ImpactRule>,
        prediction_kwh: f64,
    },
    Fuzzy {
        #[serde(flatten)]
        explanation: fuzzy::FuzzyExplanation,
    },
}

impl Backing {
    pub fn render(&self, horizon: Horizon) -> Result<String> {
        match self {
            Backing::Attributions { text, .. } => text.render(horizon),
            Backing::Rules { rules, prediction_kwh } => Ok(rule_templates(rules, *prediction_kwh, horizon)),
            Backing::Fuzzy { explanation } => explanation.render(horizon),
        }
    }

    /// `|Σφ − (f(x) − f(background))|` for attribution backings.
    pub fn efficiency_gap(&self) -> Option<f64> {
        match self {
            Backing::Attributions {
                attributions,
                base_value,
                model_output,
                ..
            } => {
                let total: f64 = attributions.iter().map(|a| a.shapley_value).sum();
                Some((total - (model_output - base_value)).abs())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonExplanation {
    pub text: String,
    pub prediction_kwh: f64,
    pub backing: Backing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyExplanation {
    pub month: usize,
    #[serde(flatten)]
    pub explanation: HorizonExplanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub meter_id: MeterId,
    pub generator_id: String,
    pub yearly: HorizonExplanation,
    pub monthly: Vec<MonthlyExplanation>,
}

impl ExplanationBundle {
    pub fn get(&self, horizon: Horizon) -> Option<&HorizonExplanation> {
        match horizon {
            Horizon::Year => Some(&self.yearly),
            Horizon::Month(m) => self.monthly.iter().find(|e| e.month == m).map(|e| &e.explanation),
        }
    }

    /// Checks that every stored text equals the rendering of its backing.
    pub fn verify(&self) -> Result<()> {
        let check = |h: Horizon, e: &HorizonExplanation| -> Result<()> {
            let rendered = e.backing.render(h)?;
            if rendered != e.text {
                return Err(Error::InvalidParameter(format!(
                    "text for {} {h:?} does not match its backing",
                    self.meter_id
                )));
            }
            Ok(())
        };
        check(Horizon::Year, &self.yearly)?;
        for m in &self.monthly {
            check(Horizon::Month(m.month), &m.explanation)?;
        }
        Ok(())
    }
}

/// `['a', 'b', 'c']`
pub fn format_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
    format!("[{}]", quoted.join(", "))
}

pub fn write_bundles<W: Write>(mut writer: W, bundles: &[ExplanationBundle]) -> Result<()> {
    for b in bundles {
        serde_json::to_writer(&mut writer, b)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_bundles<R: BufRead>(reader: R) -> Result<Vec<ExplanationBundle>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
