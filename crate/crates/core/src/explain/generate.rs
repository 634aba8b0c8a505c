//! Cohort-level explanation generation. Each generator fits a small surrogate
//! of the supplied forecast (or, without one, of the base-year history) and
//! explains every meter's yearly and monthly predictions with it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::calendar::{month_of_day, BASE_YEAR, MONTHS, MONTH_NAMES};
use crate::data::io::MonthlyTable;
use crate::data::{Cohort, DailySeries, DayRule, MeterId, MonthlySeries, SurveyRecord};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, mean, median, quantile, std_dev};
use crate::preprocess::{prepare, PrepStep};
use crate::rng;

use super::attribution::attribution_templates;
use super::fuzzy::{fuzzy_baseline_explanation, mamdani_infer, wang_mendel_learn, Defuzzification, FuzzyVariable};
use super::rules::{mine_impact_rules, rule_templates, FeatureKind, RuleFeature, RuleMiningConfig};
use super::shapley::{exact_shapley, Attribution};
use super::{Backing, ExplanationBundle, Horizon, HorizonExplanation, MonthlyExplanation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Shapley attributions of a log-linear surrogate.
    Shap,
    /// Impact rules around a linear surrogate with a consumption × temperature term.
    Rules,
    /// Wang–Mendel rule bases on average monthly consumption.
    Fuzzy,
}

impl Generator {
    pub const ALL: [Generator; 3] = [Generator::Shap, Generator::Rules, Generator::Fuzzy];

    pub fn id(&self) -> &'static str {
        match self {
            Generator::Shap => "shap",
            Generator::Rules => "rules",
            Generator::Fuzzy => "fuzzy",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown generator {s:?}")))
    }
}

/// Attribution features; the first five describe the household and month,
/// the rest are appliance counts (actionable).
pub const SHAP_FEATURES: [&str; 15] = [
    "month",
    "max temp",
    "num bedrooms",
    "num occupants",
    "mean consumption",
    "tv",
    "pc",
    "tumble dryer",
    "set top box",
    "dishwasher",
    "washing machine",
    "game console",
    "laptop",
    "freezer",
    "fridge freezer",
];
const FIRST_ACTIONABLE: usize = 5;
/// Days before the end of the base year summarized by the rule surrogate.
const WINDOW_DAYS: usize = 20;
const FUZZY_SETS: usize = 5;
const FUZZY_PHRASE: &str = "your average monthly consumption this year has been";

struct Context {
    ids: Vec<MeterId>,
    monthly: Vec<MonthlySeries>,
    daily: Vec<DailySeries>,
    /// What is explained: the supplied forecast or the gap-filled history.
    targets: Vec<[f64; MONTHS]>,
    mean_monthly: Vec<f64>,
    avg_temp: [f64; MONTHS],
    max_temp: [f64; MONTHS],
}

fn monthly_weather(cohort: &Cohort) -> ([f64; MONTHS], [f64; MONTHS]) {
    let days = cohort.weather.year(BASE_YEAR);
    let mut sums = [(0.0, 0.0, 0usize); MONTHS];
    for (d, w) in days.iter().enumerate() {
        let m = month_of_day(d) - 1;
        sums[m].0 += w.avg;
        sums[m].1 += w.max;
        sums[m].2 += 1;
    }
    let covered: Vec<_> = sums.iter().filter(|s| s.2 > 0).collect();
    let fallback = |f: fn(&(f64, f64, usize)) -> f64| {
        if covered.is_empty() {
            0.0
        } else {
            covered.iter().map(|s| f(s) / s.2 as f64).sum::<f64>() / covered.len() as f64
        }
    };
    let (fa, fm) = (fallback(|s| s.0), fallback(|s| s.1));
    let avg = std::array::from_fn(|m| if sums[m].2 > 0 { sums[m].0 / sums[m].2 as f64 } else { fa });
    let max = std::array::from_fn(|m| if sums[m].2 > 0 { sums[m].1 / sums[m].2 as f64 } else { fm });
    (avg, max)
}

impl Context {
    fn new(cohort: &Cohort, predictions: Option<&MonthlyTable>) -> Result<Self> {
        let prepared = prepare(
            cohort,
            &[
                PrepStep::AggregateDaily { rule: DayRule::AnyMissing },
                PrepStep::AggregateMonthly { max_missing_days: 5 },
            ],
        )?;
        let ids = cohort.meter_ids();
        let mut targets = Vec::with_capacity(ids.len());
        let mut mean_monthly = Vec::with_capacity(ids.len());
        for (id, m) in ids.iter().zip(&prepared.monthly) {
            let observed: Vec<f64> = m.observed().map(|(_, v)| v).collect();
            let avg = mean(&observed);
            mean_monthly.push(avg);
            targets.push(match predictions {
                Some(table) => *table
                    .get(id)
                    .ok_or_else(|| Error::MeterMismatch(format!("no prediction for meter {id}")))?,
                None => m.months.map(|v| v.unwrap_or(avg)),
            });
        }
        let (avg_temp, max_temp) = monthly_weather(cohort);
        Ok(Self {
            ids,
            monthly: prepared.monthly,
            daily: prepared.daily,
            targets,
            mean_monthly,
            avg_temp,
            max_temp,
        })
    }

    /// Relative change of month `m` (1-based) against the month before; January
    /// compares with the observed December of the base year when available.
    fn relative_delta(&self, i: usize, m: usize) -> f64 {
        let t = &self.targets[i];
        let prev = if m == 1 {
            self.monthly[i].months[MONTHS - 1].unwrap_or(t[MONTHS - 1])
        } else {
            t[m - 2]
        };
        if prev > 0.0 {
            (t[m - 1] - prev) / prev
        } else {
            0.0
        }
    }
}

/// Explains `meters` (all meters when `None`) with one generator.
pub fn explain_cohort(
    cohort: &Cohort,
    generator: Generator,
    predictions: Option<&MonthlyTable>,
    meters: Option<&[MeterId]>,
    seed: u64,
) -> Result<Vec<ExplanationBundle>> {
    let ctx = Context::new(cohort, predictions)?;
    let selected: Vec<usize> = match meters {
        None => (0..ctx.ids.len()).collect(),
        Some(list) => list
            .iter()
            .map(|id| {
                ctx.ids
                    .binary_search(id)
                    .map_err(|_| Error::MeterMismatch(format!("unknown meter {id}")))
            })
            .collect::<Result<_>>()?,
    };
    match generator {
        Generator::Shap => {
            let model = ShapSurrogate::fit(cohort, &ctx)?;
            selected.iter().map(|&i| model.explain(&ctx, i)).collect()
        }
        Generator::Rules => {
            let model = RuleSurrogate::fit(&ctx)?;
            selected.iter().map(|&i| model.explain(&ctx, i, seed)).collect()
        }
        Generator::Fuzzy => {
            let model = FuzzySurrogate::fit(&ctx)?;
            selected.iter().map(|&i| model.explain(&ctx, i)).collect()
        }
    }
}

fn bundle(ctx: &Context, i: usize, generator: Generator, yearly: HorizonExplanation, monthly: Vec<HorizonExplanation>) -> ExplanationBundle {
    ExplanationBundle {
        meter_id: ctx.ids[i].clone(),
        generator_id: generator.id().to_string(),
        yearly,
        monthly: monthly
            .into_iter()
            .enumerate()
            .map(|(m, explanation)| MonthlyExplanation { month: m + 1, explanation })
            .collect(),
    }
}

fn survey_values(rec: Option<&SurveyRecord>) -> [Option<f64>; SHAP_FEATURES.len() - 2] {
    let u = |v: Option<u32>| v.map(f64::from);
    match rec {
        None => [None; SHAP_FEATURES.len() - 2],
        Some(r) => [
            u(r.num_bedrooms),
            u(r.num_occupants),
            None,
            u(r.tv),
            u(r.pc),
            u(r.tumble_dryer),
            u(r.set_top_box),
            u(r.dishwasher),
            u(r.washing_machine),
            u(r.game_console),
            u(r.laptop),
            u(r.freezer),
            u(r.fridge_freezer),
        ],
    }
}

/// `ln y = b₀ + a₁ sin + a₂ cos (month) + c·max temp + d·household features`,
/// with `ln(mean consumption)` entering linearly; month 0 means the average
/// month (zero seasonal effect).
struct ShapSurrogate {
    coef: Vec<f64>,
    /// Household features per meter (columns 2.. of the attribution vector).
    household: Vec<Vec<f64>>,
    background: Vec<f64>,
}

fn month_effect(month: f64) -> (f64, f64) {
    let m = month.round();
    if (1.0..=MONTHS as f64).contains(&m) {
        let a = 2.0 * std::f64::consts::PI * (m - 1.0) / MONTHS as f64;
        (a.sin(), a.cos())
    } else {
        (0.0, 0.0)
    }
}

impl ShapSurrogate {
    fn design(x: &[f64]) -> Vec<f64> {
        let (s, c) = month_effect(x[0]);
        let mut row = vec![1.0, s, c, x[1], x[2], x[3], x[4].max(1e-9).ln()];
        row.extend_from_slice(&x[FIRST_ACTIONABLE..]);
        row
    }

    fn predict(&self, x: &[f64]) -> f64 {
        Self::design(x).iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>().exp()
    }

    fn fit(cohort: &Cohort, ctx: &Context) -> Result<Self> {
        let raw: Vec<_> = ctx.ids.iter().map(|id| survey_values(cohort.survey_for(id))).collect();
        let fills: Vec<f64> = (0..raw.first().map_or(0, |r| r.len()))
            .map(|j| {
                let present: Vec<f64> = raw.iter().filter_map(|r| r[j]).collect();
                median(&present).unwrap_or(0.0)
            })
            .collect();
        let household: Vec<Vec<f64>> = raw
            .iter()
            .zip(&ctx.mean_monthly)
            .map(|(r, avg)| {
                r.iter()
                    .zip(&fills)
                    .enumerate()
                    .map(|(j, (v, f))| if j == 2 { *avg } else { v.unwrap_or(*f) })
                    .collect()
            })
            .collect();

        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (i, h) in household.iter().enumerate() {
            for m in 0..MONTHS {
                let t = ctx.targets[i][m];
                if t > 0.0 && ctx.mean_monthly[i] > 0.0 {
                    let mut x = vec![(m + 1) as f64, ctx.max_temp[m]];
                    x.extend_from_slice(h);
                    rows.push(Self::design(&x));
                    y.push(t.ln());
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("no positive targets to fit the attribution model".into()));
        }
        let a = DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
        let coef = lstsq(&a, &DVector::from_vec(y))?.iter().copied().collect();

        let mut background = vec![0.0, mean(&ctx.max_temp)];
        for j in 0..fills.len() {
            let col: Vec<f64> = household.iter().map(|h| h[j]).collect();
            background.push(median(&col).unwrap_or(0.0));
        }
        Ok(Self {
            coef,
            household,
            background,
        })
    }

    fn instance(&self, ctx: &Context, i: usize, m: usize) -> Vec<f64> {
        let mut x = vec![m as f64, ctx.max_temp[m - 1]];
        x.extend_from_slice(&self.household[i]);
        x
    }

    fn attributions(&self, phi: &[f64]) -> Vec<Attribution> {
        SHAP_FEATURES
            .iter()
            .zip(phi)
            .enumerate()
            .map(|(j, (f, v))| Attribution {
                feature: f.to_string(),
                shapley_value: *v,
                actionable: j >= FIRST_ACTIONABLE,
            })
            .collect()
    }

    fn explain(&self, ctx: &Context, i: usize) -> Result<ExplanationBundle> {
        let mut yearly_phi = vec![0.0; SHAP_FEATURES.len()];
        let base_value = self.predict(&self.background);
        let mut yearly_output = 0.0;
        let mut monthly = Vec::with_capacity(MONTHS);
        for m in 1..=MONTHS {
            let x = self.instance(ctx, i, m);
            let model_output = self.predict(&x);
            yearly_output += model_output;
            let phi = exact_shapley(|x| self.predict(x), &x, &self.background)?;
            yearly_phi.iter_mut().zip(&phi).for_each(|(y, p)| *y += p);
            let attributions = self.attributions(&phi);
            let (text, slots) = attribution_templates(&attributions, Horizon::Month(m), Some(ctx.relative_delta(i, m)))?;
            monthly.push(HorizonExplanation {
                text,
                prediction_kwh: ctx.targets[i][m - 1],
                backing: Backing::Attributions {
                    attributions,
                    base_value,
                    model_output,
                    text: slots,
                },
            });
        }
        let attributions = self.attributions(&yearly_phi);
        let (text, slots) = attribution_templates(&attributions, Horizon::Year, None)?;
        let yearly = HorizonExplanation {
            text,
            prediction_kwh: ctx.targets[i].iter().sum(),
            backing: Backing::Attributions {
                attributions,
                base_value: MONTHS as f64 * base_value,
                model_output: yearly_output,
                text: slots,
            },
        };
        Ok(bundle(ctx, i, Generator::Shap, yearly, monthly))
    }
}

/// `y = b₀ + month effect + b·[mean, max, min] + c·temp + d·mean·temp`
/// over the final-window daily statistics.
struct RuleSurrogate {
    coef: Vec<f64>,
    stats: Vec<[f64; 3]>,
    stds: [f64; 4],
}

impl RuleSurrogate {
    const WIDTH: usize = 6 + MONTHS - 1;

    fn design(x: &[f64]) -> Vec<f64> {
        let mut row = vec![1.0, x[0], x[1], x[2], x[3], x[0] * x[3]];
        let code = x[4].round();
        row.extend((1..MONTHS).map(|k| f64::from(code == k as f64)));
        row
    }

    fn predict(&self, x: &[f64]) -> f64 {
        Self::design(x).iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }

    fn window_stats(daily: &DailySeries, avg_monthly: f64) -> [f64; 3] {
        let end = daily.days.len();
        let mut window: Vec<f64> = daily.days[end.saturating_sub(WINDOW_DAYS)..].iter().flatten().copied().collect();
        if window.is_empty() {
            window = daily.days.iter().flatten().rev().take(WINDOW_DAYS).copied().collect();
        }
        if window.is_empty() {
            let per_day = avg_monthly * MONTHS as f64 / 365.0;
            return [per_day; 3];
        }
        [
            mean(&window),
            window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            window.iter().copied().fold(f64::INFINITY, f64::min),
        ]
    }

    fn fit(ctx: &Context) -> Result<Self> {
        let stats: Vec<[f64; 3]> = ctx
            .daily
            .iter()
            .zip(&ctx.mean_monthly)
            .map(|(d, avg)| Self::window_stats(d, *avg))
            .collect();
        let mut rows = Vec::with_capacity(stats.len() * MONTHS);
        let mut y = Vec::with_capacity(stats.len() * MONTHS);
        for (s, t) in stats.iter().zip(&ctx.targets) {
            for m in 0..MONTHS {
                rows.push(Self::design(&[s[0], s[1], s[2], ctx.avg_temp[m], m as f64]));
                y.push(t[m]);
            }
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("no meters to fit the rule surrogate".into()));
        }
        let a = DMatrix::from_fn(rows.len(), Self::WIDTH, |r, c| rows[r][c]);
        let coef = lstsq(&a, &DVector::from_vec(y))?.iter().copied().collect();
        let col = |k: usize| std_dev(&stats.iter().map(|s| s[k]).collect::<Vec<_>>());
        Ok(Self {
            coef,
            stds: [col(0), col(1), col(2), std_dev(&ctx.avg_temp)],
            stats,
        })
    }

    fn features(&self, temperature_name: &str, with_month: bool) -> Vec<RuleFeature> {
        let numeric = |name: &str, std: f64| RuleFeature {
            name: name.to_string(),
            kind: FeatureKind::Numeric { std },
        };
        let mut f = vec![
            numeric("mean consumption", self.stds[0]),
            numeric("max consumption", self.stds[1]),
            numeric("min consumption", self.stds[2]),
            numeric(temperature_name, self.stds[3]),
        ];
        if with_month {
            f.push(RuleFeature {
                name: "target month".into(),
                kind: FeatureKind::Categorical {
                    labels: MONTH_NAMES.iter().map(|s| s.to_string()).collect(),
                },
            });
        }
        f
    }

    fn explain(&self, ctx: &Context, i: usize, seed: u64) -> Result<ExplanationBundle> {
        let s = self.stats[i];
        let config = |name: String| RuleMiningConfig {
            seed: rng::derive_seed(seed, &name),
            ..Default::default()
        };
        let monthly_features = self.features("temperature", true);
        let mut monthly = Vec::with_capacity(MONTHS);
        for m in 1..=MONTHS {
            let instance = [s[0], s[1], s[2], ctx.avg_temp[m - 1], (m - 1) as f64];
            let mined = mine_impact_rules(
                |x| self.predict(x),
                &instance,
                &monthly_features,
                &config(format!("rules/{}/{m}", ctx.ids[i])),
            )?;
            let prediction_kwh = ctx.targets[i][m - 1];
            monthly.push(HorizonExplanation {
                text: rule_templates(&mined.rules, prediction_kwh, Horizon::Month(m)),
                prediction_kwh,
                backing: Backing::Rules {
                    rules: mined.rules,
                    prediction_kwh,
                },
            });
        }
        let yearly_model = |x: &[f64]| -> f64 {
            (0..MONTHS)
                .map(|m| self.predict(&[x[0], x[1], x[2], ctx.avg_temp[m] + x[3], m as f64]))
                .sum()
        };
        let mined = mine_impact_rules(
            yearly_model,
            &[s[0], s[1], s[2], 0.0],
            &self.features("temperature change", false),
            &config(format!("rules/{}/year", ctx.ids[i])),
        )?;
        let prediction_kwh: f64 = ctx.targets[i].iter().sum();
        let yearly = HorizonExplanation {
            text: rule_templates(&mined.rules, prediction_kwh, Horizon::Year),
            prediction_kwh,
            backing: Backing::Rules {
                rules: mined.rules,
                prediction_kwh,
            },
        };
        Ok(bundle(ctx, i, Generator::Rules, yearly, monthly))
    }
}

/// One rule base per month plus one for the year, each mapping average
/// monthly consumption to the explained value.
struct FuzzySurrogate {
    input_hi: f64,
    monthly: Vec<super::FuzzyRuleBase>,
    yearly: super::FuzzyRuleBase,
}

fn universe_top(values: &[f64]) -> f64 {
    quantile(values, 0.99).filter(|q| *q > 0.0).unwrap_or(1.0)
}

impl FuzzySurrogate {
    fn learn(ctx: &Context, input_hi: f64, outputs: &[f64]) -> Result<super::FuzzyRuleBase> {
        let out_hi = universe_top(outputs);
        let input = FuzzyVariable::uniform("avg monthly consumption", 0.0, input_hi, FUZZY_SETS, FUZZY_PHRASE)?;
        let output = FuzzyVariable::uniform("consumption", 0.0, out_hi, FUZZY_SETS, "")?;
        let pairs: Vec<(Vec<f64>, f64)> = ctx
            .mean_monthly
            .iter()
            .zip(outputs)
            .map(|(x, y)| (vec![x.clamp(0.0, input_hi)], y.clamp(0.0, out_hi)))
            .collect();
        wang_mendel_learn(vec![input], output, &pairs)
    }

    fn fit(ctx: &Context) -> Result<Self> {
        let input_hi = universe_top(&ctx.mean_monthly);
        let monthly = (0..MONTHS)
            .map(|m| Self::learn(ctx, input_hi, &ctx.targets.iter().map(|t| t[m]).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        let totals: Vec<f64> = ctx.targets.iter().map(|t| t.iter().sum()).collect();
        Ok(Self {
            input_hi,
            monthly,
            yearly: Self::learn(ctx, input_hi, &totals)?,
        })
    }

    fn one(&self, rb: &super::FuzzyRuleBase, x: f64, horizon: Horizon, prediction_kwh: f64) -> Result<HorizonExplanation> {
        let inference = mamdani_infer(rb, &[x.clamp(0.0, self.input_hi)], Defuzzification::Exact)?;
        let explanation = fuzzy_baseline_explanation(rb, &inference)?;
        Ok(HorizonExplanation {
            text: explanation.render(horizon)?,
            prediction_kwh,
            backing: Backing::Fuzzy { explanation },
        })
    }

    fn explain(&self, ctx: &Context, i: usize) -> Result<ExplanationBundle> {
        let x = ctx.mean_monthly[i];
        let monthly = (1..=MONTHS)
            .map(|m| self.one(&self.monthly[m - 1], x, Horizon::Month(m), ctx.targets[i][m - 1]))
            .collect::<Result<Vec<_>>>()?;
        let yearly = self.one(&self.yearly, x, Horizon::Year, ctx.targets[i].iter().sum())?;
        Ok(bundle(ctx, i, Generator::Fuzzy, yearly, monthly))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_cohort, CohortConfig};

    fn small_cohort() -> Cohort {
        generate_cohort(&CohortConfig::small(12, 5)).unwrap()
    }

    #[test]
    fn every_generator_yields_verifiable_bundles() {
        let cohort = small_cohort();
        let ids = cohort.meter_ids();
        for g in Generator::ALL {
            let bundles = explain_cohort(&cohort, g, None, Some(&ids[..2]), 7).unwrap();
            assert_eq!(bundles.len(), 2);
            for b in &bundles {
                assert_eq!(b.monthly.len(), MONTHS);
                assert_eq!(b.generator_id, g.id());
                b.verify().unwrap();
            }
        }
    }

    #[test]
    fn generator_ids_parse() {
        for g in Generator::ALL {
            assert_eq!(g.id().parse::<Generator>().unwrap(), g);
        }
        assert!("lime".parse::<Generator>().is_err());
    }
}
