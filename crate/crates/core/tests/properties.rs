use std::collections::BTreeSet;

use proptest::prelude::*;

use meterbench::data::calendar::MONTHS;
use meterbench::data::io::MonthlyTable;
use meterbench::data::MeterId;
use meterbench::explain::fuzzy::{Defuzzification, FuzzyVariable};
use meterbench::explain::{adverb_for, exact_shapley, mamdani_infer, wang_mendel_learn, Adverb};
use meterbench::preprocess::boxcox::BoxCoxParam;
use meterbench::review::packet::finalist_label;
use meterbench::scoring::{final_score, total_rae, FinalScoreConfig, MeanReference};

fn tables() -> impl Strategy<Value = (MonthlyTable, MonthlyTable)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::array::uniform12(0.0f64..400.0), n),
            prop::collection::vec(prop::array::uniform12(1.0f64..400.0), n),
        )
            .prop_map(|(p, t)| {
                let key = |i: usize| MeterId(format!("m{i:03}"));
                (
                    p.into_iter().enumerate().map(|(i, r)| (key(i), r)).collect(),
                    t.into_iter().enumerate().map(|(i, r)| (key(i), r)).collect(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rae_is_scale_invariant_and_non_negative((pred, truth) in tables(), c in 0.01f64..100.0) {
        let Ok(a) = total_rae(&pred, &truth, MeanReference::default()) else { return Ok(()) };
        let scale = |t: &MonthlyTable| -> MonthlyTable { t.iter().map(|(k, v)| (k.clone(), v.map(|x| x * c))).collect() };
        let b = total_rae(&scale(&pred), &scale(&truth), MeanReference::default()).unwrap();
        prop_assert!(a.year_rae >= 0.0 && a.month_rae >= 0.0);
        prop_assert!((a.total_rae - 0.5 * (a.year_rae + a.month_rae)).abs() < 1e-12);
        prop_assert!((a.total_rae - b.total_rae).abs() <= 1e-9 * a.total_rae.max(1.0));
    }

    #[test]
    fn final_score_stays_in_range(total in 0.0f64..10.0, c in prop::array::uniform10(1.0f64..=5.0), w in 0.0f64..=1.0) {
        let config = FinalScoreConfig { w_acc: w, w_exp: 1.0 - w, rae_cap: 2.0 };
        let s = final_score(total, &c, config).unwrap();
        prop_assert!((0.0..=10.0 + 1e-12).contains(&s));
    }

    #[test]
    fn boxcox_round_trips(x in 0.0f64..1e4, lambda in -2.0f64..2.0, shift in 0.001f64..10.0) {
        let p = BoxCoxParam::new(lambda, shift).unwrap();
        let back = p.inverse(p.forward(x).unwrap());
        prop_assert!((back - x).abs() <= 1e-8 * x.max(1.0));
    }

    #[test]
    fn shapley_efficiency_on_random_polynomials(
        coef in prop::collection::vec(-3.0f64..3.0, 6),
        x in prop::collection::vec(-2.0f64..2.0, 6),
        bg in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let f = |z: &[f64]| {
            coef[0] * z[0] * z[1] + coef[1] * z[2].powi(3) + coef[2] * (z[3] - z[4]).abs()
                + coef[3] * z[5] + coef[4] * z[0] * z[2] * z[4] + coef[5]
        };
        let phi = exact_shapley(f, &x, &bg).unwrap();
        prop_assert!((phi.iter().sum::<f64>() - (f(&x) - f(&bg))).abs() <= 1e-9);
    }

    #[test]
    fn strong_partitions_sum_to_one(sets in (1usize..5).prop_map(|k| 2 * k + 1), lo in -100.0f64..100.0, width in 0.1f64..500.0, t in 0.0f64..=1.0) {
        let v = FuzzyVariable::uniform("v", lo, lo + width, sets, "v is").unwrap();
        let x = lo + t * width;
        let total: f64 = v.memberships(x).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mamdani_output_stays_in_universe(
        pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..50.0), 1..40),
        query in (0.0f64..10.0, 0.0f64..10.0),
    ) {
        let inputs = vec![
            FuzzyVariable::uniform("a", 0.0, 10.0, 5, "a is").unwrap(),
            FuzzyVariable::uniform("b", 0.0, 10.0, 3, "b is").unwrap(),
        ];
        let output = FuzzyVariable::uniform("y", 0.0, 50.0, 5, "").unwrap();
        let data: Vec<(Vec<f64>, f64)> = pairs.iter().map(|(a, b, y)| (vec![*a, *b], *y)).collect();
        let rb = wang_mendel_learn(inputs, output, &data).unwrap();
        let antecedents: BTreeSet<&Vec<usize>> = rb.rules.iter().map(|r| &r.antecedent).collect();
        prop_assert_eq!(antecedents.len(), rb.rules.len());
        if let Ok(inf) = mamdani_infer(&rb, &[query.0, query.1], Defuzzification::Exact) {
            prop_assert!((0.0..=50.0).contains(&inf.crisp_output));
            let grid = mamdani_infer(&rb, &[query.0, query.1], Defuzzification::Grid(20_001)).unwrap();
            prop_assert!((grid.crisp_output - inf.crisp_output).abs() < 1e-2);
        }
    }

    #[test]
    fn adverb_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let rank = |x: Adverb| x as usize;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(adverb_for(lo)) <= rank(adverb_for(hi)));
    }

    #[test]
    fn finalist_labels_are_distinct(n in 1usize..800) {
        let labels: BTreeSet<String> = (0..n).map(finalist_label).collect();
        prop_assert_eq!(labels.len(), n);
        prop_assert!(labels.iter().all(|l| l.chars().all(|c| c.is_ascii_uppercase())));
    }
}

#[test]
fn months_constant_matches_table_width() {
    assert_eq!(MONTHS, 12);
}
