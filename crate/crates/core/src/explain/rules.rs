//! Local impact rules: a perturbed neighborhood around one instance is
//! labelled by the model, features are discretized at neighborhood quantiles,
//! and 1- and 2-condition segments are scored by how far their mean output
//! departs from the neighborhood mean.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::quantile;
use crate::rng;

use super::Horizon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Perturbed with a Gaussian of `perturb_scale · std`.
    Numeric { std: f64 },
    /// Values are label indices; resampled uniformly with the configured probability.
    Categorical { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFeature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Le { index: usize, feature: String, value: f64 },
    Gt { index: usize, feature: String, value: f64 },
    Between { index: usize, feature: String, lower: f64, upper: f64 },
    Equals { index: usize, feature: String, code: usize, label: String },
}

impl Condition {
    pub fn index(&self) -> usize {
        match self {
            Condition::Le { index, .. }
            | Condition::Gt { index, .. }
            | Condition::Between { index, .. }
            | Condition::Equals { index, .. } => *index,
        }
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        match self {
            Condition::Le { index, value, .. } => x[*index] <= *value,
            Condition::Gt { index, value, .. } => x[*index] > *value,
            Condition::Between { index, lower, upper, .. } => x[*index] > *lower && x[*index] <= *upper,
            Condition::Equals { index, code, .. } => x[*index].round() == *code as f64,
        }
    }

    /// Counterfactual phrasing renders categorical conditions as "{feature} of {label}".
    pub fn render(&self, counterfactual: bool) -> String {
        match self {
            Condition::Le { feature, value, .. } => format!("{feature} ≤ {value:.2}"),
            Condition::Gt { feature, value, .. } => format!("{feature} > {value:.2}"),
            Condition::Between { feature, lower, upper, .. } => format!("{lower:.2} < {feature} ≤ {upper:.2}"),
            Condition::Equals { feature, label, .. } => {
                if counterfactual {
                    format!("{feature} of {label}")
                } else {
                    format!("your {feature} being {label}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleClass {
    CurrentSupporting,
    CurrentContradicting,
    HypotheticallySupporting,
    HypotheticallyContradicting,
}

impl RuleClass {
    pub const ALL: [RuleClass; 4] = [
        RuleClass::CurrentSupporting,
        RuleClass::CurrentContradicting,
        RuleClass::HypotheticallySupporting,
        RuleClass::HypotheticallyContradicting,
    ];
}

/// `deviation` is the instance's prediction minus the neighborhood mean; a
/// zero deviation counts as upward.
pub fn classify(satisfied: bool, impact: f64, deviation: f64) -> RuleClass {
    let toward = (impact > 0.0) == (deviation >= 0.0);
    match (satisfied, toward) {
        (true, true) => RuleClass::CurrentSupporting,
        (true, false) => RuleClass::CurrentContradicting,
        (false, true) => RuleClass::HypotheticallySupporting,
        (false, false) => RuleClass::HypotheticallyContradicting,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRule {
    pub conditions: Vec<Condition>,
    /// Mean model output inside the segment minus the neighborhood mean (kWh).
    pub impact: f64,
    pub support: usize,
    pub rule_class: RuleClass,
}

impl ImpactRule {
    pub fn holds(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    fn render_conditions(&self, counterfactual: bool) -> String {
        self.conditions
            .iter()
            .map(|c| c.render(counterfactual))
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleMiningConfig {
    pub neighborhood_size: usize,
    /// Perturbation standard deviation as a multiple of each feature's std.
    pub perturb_scale: f64,
    pub bins: usize,
    pub min_support: usize,
    /// Probability of resampling a categorical feature.
    pub categorical_resample: f64,
    /// Rules need |impact| ≥ this fraction of |neighborhood mean|.
    pub min_impact_fraction: f64,
    pub max_conditions: usize,
    /// Rules kept per class, strongest first.
    pub max_rules_per_class: usize,
    pub seed: u64,
}

impl Default for RuleMiningConfig {
    fn default() -> Self {
        Self {
            neighborhood_size: 2000,
            perturb_scale: 0.3,
            bins: 5,
            min_support: 50,
            categorical_resample: 0.3,
            min_impact_fraction: 0.01,
            max_conditions: 2,
            max_rules_per_class: 5,
            seed: 0,
        }
    }
}

/// Absolute floor below which an impact is treated as zero.
const IMPACT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedRules {
    pub rules: Vec<ImpactRule>,
    pub prediction: f64,
    pub neighborhood_mean: f64,
}

/// Seeded perturbations of `instance`.
pub fn neighborhood(instance: &[f64], features: &[RuleFeature], config: &RuleMiningConfig) -> Result<Vec<Vec<f64>>> {
    if instance.len() != features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} features",
            instance.len(),
            features.len()
        )));
    }
    let mut rng = rng::stream(config.seed, "impact_rules/neighborhood");
    let normals: Vec<Option<Normal<f64>>> = features
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Numeric { std } if *std > 0.0 && config.perturb_scale > 0.0 => {
                Normal::new(0.0, config.perturb_scale * std).ok()
            }
            _ => None,
        })
        .collect();
    Ok((0..config.neighborhood_size)
        .map(|_| {
            features
                .iter()
                .zip(instance)
                .zip(&normals)
                .map(|((f, x), n)| match &f.kind {
                    FeatureKind::Numeric { .. } => x + n.map_or(0.0, |n| n.sample(&mut rng)),
                    FeatureKind::Categorical { labels } => {
                        if !labels.is_empty() && rng.gen_bool(config.categorical_resample.clamp(0.0, 1.0)) {
                            rng.gen_range(0..labels.len()) as f64
                        } else {
                            *x
                        }
                    }
                })
                .collect()
        })
        .collect())
}

/// Single conditions from quantile cuts (numeric) and observed codes (categorical).
pub fn candidate_conditions(features: &[RuleFeature], samples: &[Vec<f64>], bins: usize) -> Vec<Condition> {
    let mut out = Vec::new();
    for (j, f) in features.iter().enumerate() {
        match &f.kind {
            FeatureKind::Numeric { .. } => {
                let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                let mut cuts: Vec<f64> = (1..bins)
                    .filter_map(|k| quantile(&col, k as f64 / bins as f64))
                    .collect();
                cuts.dedup();
                let (lo, hi) = col
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
                cuts.retain(|c| *c > lo && *c < hi);
                for c in &cuts {
                    out.push(Condition::Le { index: j, feature: f.name.clone(), value: *c });
                    out.push(Condition::Gt { index: j, feature: f.name.clone(), value: *c });
                }
                for w in cuts.windows(2) {
                    out.push(Condition::Between {
                        index: j,
                        feature: f.name.clone(),
                        lower: w[0],
                        upper: w[1],
                    });
                }
            }
            FeatureKind::Categorical { labels } => {
                let mut seen = vec![false; labels.len()];
                for s in samples {
                    let code = s[j].round();
                    if code >= 0.0 && (code as usize) < labels.len() {
                        seen[code as usize] = true;
                    }
                }
                for (code, _) in seen.iter().enumerate().filter(|(_, s)| **s) {
                    out.push(Condition::Equals {
                        index: j,
                        feature: f.name.clone(),
                        code,
                        label: labels[code].clone(),
                    });
                }
            }
        }
    }
    out
}

fn bitset(samples: &[Vec<f64>], cond: &Condition) -> Vec<u64> {
    let mut bits = vec![0u64; samples.len().div_ceil(64)];
    for (i, s) in samples.iter().enumerate() {
        if cond.holds(s) {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn segment_sum(bits: &[u64], outputs: &[f64]) -> (usize, f64) {
    let mut count = 0;
    let mut sum = 0.0;
    for (w, word) in bits.iter().enumerate() {
        let mut b = *word;
        while b != 0 {
            let t = b.trailing_zeros() as usize;
            sum += outputs[w * 64 + t];
            count += 1;
            b &= b - 1;
        }
    }
    (count, sum)
}

pub fn mine_impact_rules(
    model: impl Fn(&[f64]) -> f64,
    instance: &[f64],
    features: &[RuleFeature],
    config: &RuleMiningConfig,
) -> Result<MinedRules> {
    if config.bins < 2 || config.neighborhood_size == 0 || !(1..=2).contains(&config.max_conditions) {
        return Err(Error::InvalidParameter(
            "need ≥ 2 bins, a non-empty neighborhood and 1 or 2 conditions per rule".into(),
        ));
    }
    let samples = neighborhood(instance, features, config)?;
    let outputs: Vec<f64> = samples.iter().map(|s| model(s)).collect();
    let prediction = model(instance);
    let n = samples.len() as f64;
    let mean = outputs.iter().sum::<f64>() / n;
    let deviation = prediction - mean;
    let threshold = (config.min_impact_fraction * mean.abs()).max(IMPACT_EPS);
    let conditions = candidate_conditions(features, &samples, config.bins);
    let sets: Vec<Vec<u64>> = conditions.iter().map(|c| bitset(&samples, c)).collect();

    let mut rules = Vec::new();
    let mut consider = |conds: Vec<&Condition>, bits: &[u64]| {
        let support = bits.iter().map(|w| w.count_ones() as usize).sum::<usize>();
        if support < config.min_support.max(1) {
            return;
        }
        let (count, sum) = segment_sum(bits, &outputs);
        let impact = sum / count as f64 - mean;
        if impact.abs() < threshold {
            return;
        }
        let satisfied = conds.iter().all(|c| c.holds(instance));
        rules.push(ImpactRule {
            conditions: conds.into_iter().cloned().collect(),
            impact,
            support,
            rule_class: classify(satisfied, impact, deviation),
        });
    };
    for (a, ca) in conditions.iter().enumerate() {
        consider(vec![ca], &sets[a]);
        if config.max_conditions < 2 {
            continue;
        }
        for (b, cb) in conditions.iter().enumerate().skip(a + 1) {
            if ca.index() == cb.index() {
                continue;
            }
            let both: Vec<u64> = sets[a].iter().zip(&sets[b]).map(|(x, y)| x & y).collect();
            consider(vec![ca, cb], &both);
        }
    }
    rules.sort_by(|a, b| {
        a.rule_class
            .cmp(&b.rule_class)
            .then(b.impact.abs().total_cmp(&a.impact.abs()))
            .then(a.conditions.len().cmp(&b.conditions.len()))
    });
    let mut kept = Vec::new();
    for class in RuleClass::ALL {
        kept.extend(
            rules
                .iter()
                .filter(|r| r.rule_class == class)
                .take(config.max_rules_per_class)
                .cloned(),
        );
    }
    Ok(MinedRules {
        rules: kept,
        prediction,
        neighborhood_mean: mean,
    })
}

fn strongest(rules: &[ImpactRule], class: RuleClass) -> Option<&ImpactRule> {
    rules
        .iter()
        .filter(|r| r.rule_class == class)
        .fold(None, |best: Option<&ImpactRule>, r| match best {
            Some(b) if b.impact.abs() >= r.impact.abs() => Some(b),
            _ => Some(r),
        })
}

/// One sentence per rule class present (strongest rule by |impact|), in class
/// order, joined by single spaces.
pub fn rule_templates(rules: &[ImpactRule], prediction_kwh: f64, horizon: Horizon) -> String {
    let (period, adjective) = match horizon {
        Horizon::Year => ("year", "yearly"),
        Horizon::Month(_) => ("month", "monthly"),
    };
    let direction = |r: &ImpactRule| if r.impact > 0.0 { ("increased", "increase") } else { ("decreased", "decrease") };
    let mut sentences = Vec::new();
    for class in RuleClass::ALL {
        let Some(r) = strongest(rules, class) else { continue };
        sentences.push(match class {
            RuleClass::CurrentSupporting => format!(
                "Your predicted consumption is {prediction_kwh:.2}kWh, this is supported by {}.",
                r.render_conditions(false)
            ),
            RuleClass::CurrentContradicting => format!(
                "The conditions that currently exist that indicate a risk of {} consumption by {:.2}kWh for the particular {period} are {}.",
                direction(r).0,
                r.impact.abs(),
                r.render_conditions(false)
            ),
            RuleClass::HypotheticallySupporting => format!(
                "The conditions that need to be satisfied to maintain the {adjective} predicted consumption would be {}.",
                r.render_conditions(false)
            ),
            RuleClass::HypotheticallyContradicting => format!(
                "If you have a {} it may {} your consumption by {:.2}kWh.",
                r.render_conditions(true),
                direction(r).1,
                r.impact.abs()
            ),
        });
    }
    sentences.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(name: &str) -> RuleFeature {
        RuleFeature {
            name: name.into(),
            kind: FeatureKind::Numeric { std: 1.0 },
        }
    }

    #[test]
    fn constant_model_has_no_rules() {
        let features = [numeric("a"), numeric("b")];
        let mined = mine_impact_rules(|_| 5.0, &[1.0, 2.0], &features, &RuleMiningConfig::default()).unwrap();
        assert!(mined.rules.is_empty());
    }

    #[test]
    fn step_model_supports_instance_side() {
        let features = [numeric("x")];
        let config = RuleMiningConfig {
            perturb_scale: 1.0,
            ..Default::default()
        };
        let mined = mine_impact_rules(|x| 10.0 * (x[0] > 0.0) as u8 as f64, &[1.0], &features, &config).unwrap();
        let best = mined
            .rules
            .iter()
            .find(|r| r.rule_class == RuleClass::CurrentSupporting)
            .expect("a supporting rule");
        assert!(best.impact > 0.0);
        assert!(best.holds(&[1.0]));
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify(true, 1.0, 2.0), RuleClass::CurrentSupporting);
        assert_eq!(classify(true, -1.0, 2.0), RuleClass::CurrentContradicting);
        assert_eq!(classify(false, 1.0, 2.0), RuleClass::HypotheticallySupporting);
        assert_eq!(classify(false, -1.0, 2.0), RuleClass::HypotheticallyContradicting);
        assert_eq!(classify(true, -1.0, -2.0), RuleClass::CurrentSupporting);
    }
}
