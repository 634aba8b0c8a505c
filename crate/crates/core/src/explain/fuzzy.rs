//! Wang–Mendel rule learning and Mamdani inference over uniform triangular
//! strong partitions, plus the linguistic baseline explanation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Horizon;

/// A variable with `labels.len()` (odd, ≥ 3) evenly spaced triangular sets on
/// `[lo, hi]`; the outer sets are shoulders, so memberships sum to 1 everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub labels: Vec<String>,
    /// Subject of the clause, e.g. "your average monthly consumption this year has been".
    pub phrase: String,
}

pub fn default_labels(n: usize) -> Vec<String> {
    let names: &[&str] = match n {
        3 => &["low", "medium", "high"],
        5 => &["very low", "low", "medium", "high", "very high"],
        7 => &["extremely low", "very low", "low", "medium", "high", "very high", "extremely high"],
        _ => return (1..=n).map(|i| format!("level {i}")).collect(),
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl FuzzyVariable {
    pub fn uniform(name: &str, lo: f64, hi: f64, sets: usize, phrase: &str) -> Result<Self> {
        let v = Self {
            name: name.to_string(),
            lo,
            hi,
            labels: default_labels(sets),
            phrase: phrase.to_string(),
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n < 3 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "{}: partition count must be odd and at least 3, got {n}",
                self.name
            )));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "{}: universe [{}, {}] is empty",
                self.name, self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn peak(&self, set: usize) -> f64 {
        self.lo + (self.hi - self.lo) * set as f64 / (self.labels.len() - 1) as f64
    }

    fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.labels.len() - 1) as f64
    }

    /// Membership of `x` (clamped into the universe) in `set`.
    pub fn membership(&self, set: usize, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        (1.0 - (x - self.peak(set)).abs() / self.spacing()).max(0.0)
    }

    pub fn memberships(&self, x: f64) -> Vec<f64> {
        (0..self.labels.len()).map(|s| self.membership(s, x)).collect()
    }

    /// Set of maximal membership; the lower set wins a tie.
    pub fn best_label(&self, x: f64) -> (usize, f64) {
        self.memberships(x)
            .into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, m)| if m > b.1 { (i, m) } else { b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    /// One set index per input variable.
    pub antecedent: Vec<usize>,
    pub consequent: usize,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRuleBase {
    pub inputs: Vec<FuzzyVariable>,
    pub output: FuzzyVariable,
    pub rules: Vec<FuzzyRule>,
}

fn clamp_with_warning(var: &FuzzyVariable, x: f64) -> f64 {
    if x < var.lo || x > var.hi {
        log::warn!("{} = {x} lies outside [{}, {}]; clamped", var.name, var.lo, var.hi);
    }
    x.clamp(var.lo, var.hi)
}

/// One candidate rule per training pair; among pairs sharing an antecedent the
/// highest degree wins (the earlier pair on a tie).
pub fn wang_mendel_learn(
    inputs: Vec<FuzzyVariable>,
    output: FuzzyVariable,
    pairs: &[(Vec<f64>, f64)],
) -> Result<FuzzyRuleBase> {
    for v in inputs.iter().chain(std::iter::once(&output)) {
        v.validate()?;
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no training pairs".into()));
    }
    let mut best: BTreeMap<Vec<usize>, FuzzyRule> = BTreeMap::new();
    for (x, y) in pairs {
        if x.len() != inputs.len() {
            return Err(Error::DimensionMismatch(format!(
                "training input has {} values for {} variables",
                x.len(),
                inputs.len()
            )));
        }
        let mut antecedent = Vec::with_capacity(inputs.len());
        let mut degree = 1.0;
        for (v, xi) in inputs.iter().zip(x) {
            let (set, m) = v.best_label(clamp_with_warning(v, *xi));
            antecedent.push(set);
            degree *= m;
        }
        let (consequent, m) = output.best_label(clamp_with_warning(&output, *y));
        degree *= m;
        let rule = FuzzyRule {
            antecedent: antecedent.clone(),
            consequent,
            degree,
        };
        match best.get(&antecedent) {
            Some(existing) if existing.degree >= degree => {}
            _ => {
                best.insert(antecedent, rule);
            }
        }
    }
    Ok(FuzzyRuleBase {
        inputs,
        output,
        rules: best.into_values().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", content = "points", rename_all = "snake_case")]
pub enum Defuzzification {
    /// Closed-form centroid of the piecewise-linear aggregated set.
    #[default]
    Exact,
    /// Discrete centroid over `n` evenly spaced output points.
    Grid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub rule: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub crisp_output: f64,
    /// Strongest first; ties keep rule order.
    pub fired: Vec<FiredRule>,
}

impl FuzzyRuleBase {
    fn aggregated(&self, clips: &[f64], y: f64) -> f64 {
        clips
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(s, c)| self.output.membership(s, y).min(*c))
            .fold(0.0, f64::max)
    }
}

/// Min conjunction, min clipping, max aggregation, centroid defuzzification.
pub fn mamdani_infer(rule_base: &FuzzyRuleBase, input: &[f64], method: Defuzzification) -> Result<Inference> {
    if input.len() != rule_base.inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs for {} variables",
            input.len(),
            rule_base.inputs.len()
        )));
    }
    let memberships: Vec<Vec<f64>> = rule_base
        .inputs
        .iter()
        .zip(input)
        .map(|(v, x)| v.memberships(*x))
        .collect();
    let mut fired: Vec<FiredRule> = rule_base
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| FiredRule {
            rule: i,
            strength: r
                .antecedent
                .iter()
                .zip(&memberships)
                .map(|(s, m)| m[*s])
                .fold(1.0, f64::min),
        })
        .filter(|f| f.strength > 0.0)
        .collect();
    if fired.is_empty() {
        return Err(Error::NoRuleCoverage);
    }
    fired.sort_by(|a, b| b.strength.total_cmp(&a.strength).then(a.rule.cmp(&b.rule)));

    let out = &rule_base.output;
    let mut clips = vec![0.0f64; out.labels.len()];
    for f in &fired {
        let c = &mut clips[rule_base.rules[f.rule].consequent];
        *c = c.max(f.strength);
    }
    let crisp_output = match method {
        Defuzzification::Exact => exact_centroid(rule_base, &clips),
        Defuzzification::Grid(n) => {
            if n < 2 {
                return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
            }
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                let y = out.lo + (out.hi - out.lo) * i as f64 / (n - 1) as f64;
                let mu = rule_base.aggregated(&clips, y);
                num += y * mu;
                den += mu;
            }
            num / den
        }
    };
    Ok(Inference { crisp_output, fired })
}

/// Every clipped set is linear between consecutive points of {universe ends,
/// peaks, clip crossings}; adding the pairwise crossings of those pieces makes
/// their maximum linear on each sub-interval, so trapezoid moments are exact.
fn exact_centroid(rb: &FuzzyRuleBase, clips: &[f64]) -> f64 {
    let out = &rb.output;
    let h = out.spacing();
    let mut points = vec![out.lo, out.hi];
    for (s, c) in clips.iter().enumerate() {
        let p = out.peak(s);
        points.push(p);
        if *c > 0.0 && *c < 1.0 {
            points.push(p - (1.0 - c) * h);
            points.push(p + (1.0 - c) * h);
        }
    }
    let clamp_sort = |pts: &mut Vec<f64>| {
        pts.iter_mut().for_each(|p| *p = p.clamp(out.lo, out.hi));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
    };
    clamp_sort(&mut points);

    let active: Vec<usize> = (0..clips.len()).filter(|s| clips[*s] > 0.0).collect();
    let piece = |s: usize, y: f64| out.membership(s, y).min(clips[s]);
    let mut refined = points.clone();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (i, &s) in active.iter().enumerate() {
            for &t in &active[i + 1..] {
                let da = piece(s, a) - piece(t, a);
                let db = piece(s, b) - piece(t, b);
                if da * db < 0.0 {
                    refined.push(a + (b - a) * da / (da - db));
                }
            }
        }
    }
    clamp_sort(&mut refined);

    let (mut num, mut den) = (0.0, 0.0);
    for w in refined.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ma, mb) = (rb.aggregated(clips, a), rb.aggregated(clips, b));
        let width = b - a;
        den += width * (ma + mb) / 2.0;
        num += width * (a * (2.0 * ma + mb) + b * (ma + 2.0 * mb)) / 6.0;
    }
    num / den
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyClause {
    pub phrase: String,
    pub label: String,
}

/// Template slots of a baseline explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyExplanation {
    pub clauses: Vec<FuzzyClause>,
    pub output_label: String,
    pub strength: f64,
    pub crisp_output: f64,
}

impl FuzzyExplanation {
    pub fn render(&self, horizon: Horizon) -> Result<String> {
        let because = self
            .clauses
            .iter()
            .map(|c| format!("{} {}", c.phrase, c.label))
            .collect::<Vec<_>>()
            .join(" and ");
        Ok(match horizon {
            Horizon::Year => format!(
                "The estimation of your energy consumption for next year is {} because {because}.",
                self.output_label
            ),
            Horizon::Month(_) => {
                let month = horizon
                    .month_name()
                    .ok_or_else(|| Error::InvalidParameter(format!("invalid horizon {horizon:?}")))?;
                format!(
                    "In {month}, your energy consumption will be {} because {because}.",
                    self.output_label
                )
            }
        })
    }
}

/// Renders the strongest fired rule.
pub fn fuzzy_baseline_explanation(rule_base: &FuzzyRuleBase, inference: &Inference) -> Result<FuzzyExplanation> {
    let top = inference.fired.first().ok_or(Error::NoRuleCoverage)?;
    let rule = rule_base
        .rules
        .get(top.rule)
        .ok_or_else(|| Error::InvalidParameter(format!("fired rule {} is not in the rule base", top.rule)))?;
    Ok(FuzzyExplanation {
        clauses: rule_base
            .inputs
            .iter()
            .zip(&rule.antecedent)
            .map(|(v, s)| FuzzyClause {
                phrase: v.phrase.clone(),
                label: v.labels[*s].clone(),
            })
            .collect(),
        output_label: rule_base.output.labels[rule.consequent].clone(),
        strength: top.strength,
        crisp_output: inference.crisp_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str) -> FuzzyVariable {
        FuzzyVariable::uniform(name, 0.0, 4.0, 5, name).unwrap()
    }

    #[test]
    fn strong_partition_sums_to_one() {
        let v = var("x");
        for i in 0..=40 {
            let x = -1.0 + i as f64 * 0.15;
            let s: f64 = v.memberships(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn rejects_even_partitions() {
        assert!(FuzzyVariable::uniform("x", 0.0, 1.0, 4, "x").is_err());
        assert!(FuzzyVariable::uniform("x", 1.0, 1.0, 5, "x").is_err());
    }

    #[test]
    fn conflict_keeps_higher_degree() {
        // memberships 0.8 and 0.5 in set 1 for the input; output at a peak.
        let rb = wang_mendel_learn(vec![var("x")], var("y"), &[(vec![1.5], 3.0), (vec![1.2], 1.0)]).unwrap();
        assert_eq!(rb.rules.len(), 1);
        assert!((rb.rules[0].degree - 0.8).abs() < 1e-12);
        assert_eq!(rb.rules[0].consequent, 1);
    }

    #[test]
    fn exact_and_grid_centroids_agree() {
        let rb = wang_mendel_learn(
            vec![var("x")],
            var("y"),
            &[(vec![0.0], 0.0), (vec![1.0], 2.0), (vec![2.0], 4.0)],
        )
        .unwrap();
        let exact = mamdani_infer(&rb, &[0.7], Defuzzification::Exact).unwrap();
        let grid = mamdani_infer(&rb, &[0.7], Defuzzification::Grid(200_001)).unwrap();
        assert!((exact.crisp_output - grid.crisp_output).abs() < 1e-4);
        assert_eq!(exact.fired.len(), 2);
        assert!(exact.fired[0].strength >= exact.fired[1].strength);
    }

    #[test]
    fn uncovered_input_is_an_error() {
        let rb = wang_mendel_learn(vec![var("x")], var("y"), &[(vec![0.0], 0.0)]).unwrap();
        assert!(matches!(
            mamdani_infer(&rb, &[4.0], Defuzzification::Exact),
            Err(Error::NoRuleCoverage)
        ));
    }
}
