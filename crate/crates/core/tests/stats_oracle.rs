mod common;

use std::collections::BTreeMap;

use common::{approx, oracle};
use multiref::metaeval::{
    evaluate_language_pair, kendall_tau, leakage_gap, midranks, pairwise_accuracy, pearson, segment_kendall, spearman,
    HumanJudgment, HumanScores, MetaEvalReport, MetricScores,
};
use multiref::score_combine::RowKey;
use multiref::Error;
use proptest::prelude::*;

fn tied(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=max_len).prop_flat_map(|n| {
        let v = prop::collection::vec((0u8..6).prop_map(|x| x as f64 * 0.25), n);
        (v.clone(), v)
    })
}

fn systems(v: &[f64]) -> BTreeMap<String, f64> {
    v.iter().enumerate().map(|(i, x)| (format!("sys{i:02}"), *x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kendall_matches_pairwise_count((x, y) in tied(40)) {
        match (kendall_tau(&x, &y), oracle::kendall_tau_b(&x, &y)) {
            (Ok(got), Some(want)) => prop_assert_eq!(got, want),
            (Err(Error::Degenerate(_)), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn pearson_and_spearman_match_textbook((x, y) in tied(40)) {
        match (pearson(&x, &y), oracle::pearson(&x, &y)) {
            (Ok(got), Some(want)) => prop_assert!(approx(got, want, 1e-12)),
            (Err(Error::Degenerate(_)), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
        match (spearman(&x, &y), oracle::spearman(&x, &y)) {
            (Ok(got), Some(want)) => prop_assert!(approx(got, want, 1e-12)),
            (Err(Error::Degenerate(_)), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn midranks_match_counting(v in prop::collection::vec(0u8..5, 1..30)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        prop_assert_eq!(midranks(&v), oracle::average_ranks(&v));
    }

    #[test]
    fn accuracy_matches_pair_enumeration((x, y) in tied(15)) {
        let (correct, used) = oracle::pairwise_accuracy(&x, &y);
        match pairwise_accuracy(&systems(&x), &systems(&y)) {
            Ok(pa) => {
                prop_assert_eq!((pa.correct, pa.pairs_used), (correct, used));
                prop_assert_eq!(pa.accuracy, correct as f64 / used as f64);
            }
            Err(Error::Degenerate(_)) => prop_assert_eq!(used, 0),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn kendall_is_symmetric_and_antisymmetric((x, y) in tied(25)) {
        if let (Ok(a), Ok(b)) = (kendall_tau(&x, &y), kendall_tau(&y, &x)) {
            prop_assert_eq!(a, b);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert!(approx(kendall_tau(&x, &neg).unwrap(), -a, 1e-15));
        }
    }
}

#[test]
fn hand_case_two_of_three() {
    let human = BTreeMap::from([("A".to_string(), 3.0), ("B".into(), 2.0), ("C".into(), 1.0)]);
    let metric = BTreeMap::from([("A".to_string(), 0.9), ("B".into(), 0.5), ("C".into(), 0.7)]);
    let pa = pairwise_accuracy(&metric, &human).unwrap();
    assert_eq!((pa.correct, pa.pairs_used), (2, 3));
    assert_eq!(pa.accuracy, 2.0 / 3.0);
}

#[test]
fn metric_ties_count_as_wrong_and_human_ties_are_skipped() {
    let human = BTreeMap::from([("A".to_string(), 2.0), ("B".into(), 2.0), ("C".into(), 1.0)]);
    let metric = BTreeMap::from([("A".to_string(), 5.0), ("B".into(), 4.0), ("C".into(), 4.0)]);
    let pa = pairwise_accuracy(&metric, &human).unwrap();
    // A-B skipped (human tie); A-C correct; B-C metric tie.
    assert_eq!((pa.correct, pa.pairs_used), (1, 2));
}

#[test]
fn accuracy_error_cases() {
    let one = BTreeMap::from([("A".to_string(), 1.0)]);
    assert!(matches!(pairwise_accuracy(&one, &one), Err(Error::InvalidArgument(_))));
    let flat = BTreeMap::from([("A".to_string(), 1.0), ("B".into(), 1.0)]);
    let m = BTreeMap::from([("A".to_string(), 1.0), ("B".into(), 2.0)]);
    assert!(matches!(pairwise_accuracy(&m, &flat), Err(Error::Degenerate(_))));
}

#[test]
fn segment_kendall_pools_common_items() {
    let key = RowKey::new;
    let metric = BTreeMap::from([
        (key("A", "1"), 0.9),
        (key("A", "2"), 0.1),
        (key("B", "1"), 0.5),
        (key("B", "2"), 0.3),
        (key("C", "9"), 1.0),
    ]);
    let human = BTreeMap::from([
        (key("A", "1"), 4.0),
        (key("A", "2"), 1.0),
        (key("B", "1"), 3.0),
        (key("B", "2"), 2.0),
    ]);
    let got = segment_kendall(&metric, &human).unwrap();
    assert_eq!(got, 1.0);
}

#[test]
fn language_pair_report_and_pooling() {
    let judgments = |scores: &[(&str, f64)]| -> Vec<HumanJudgment> {
        scores
            .iter()
            .map(|(s, v)| HumanJudgment {
                system: s.to_string(),
                segment: None,
                dimension: None,
                score: *v,
            })
            .collect()
    };
    let lp1 = evaluate_language_pair(
        "en-de",
        &MetricScores {
            system: systems(&[30.0, 20.0, 10.0]),
            ..Default::default()
        },
        &HumanScores::from_judgments(&judgments(&[("sys00", 3.0), ("sys01", 2.0), ("sys02", 1.0)])).unwrap(),
    )
    .unwrap();
    let lp2 = evaluate_language_pair(
        "zh-en",
        &MetricScores {
            system: systems(&[10.0, 20.0]),
            ..Default::default()
        },
        &HumanScores::from_judgments(&judgments(&[("sys00", 2.0), ("sys01", 1.0)])).unwrap(),
    )
    .unwrap();
    assert_eq!(lp1.pairwise_accuracy, Some(1.0));
    assert_eq!(lp2.pairwise_accuracy, Some(0.0));
    let report = MetaEvalReport::new("bleu", vec![lp1, lp2]);
    report.validate().unwrap();
    assert_eq!(report.n_pairs_used, 4);
    assert_eq!(report.pairwise_accuracy, Some(0.75));
    let table = report.render_table();
    assert!(table.contains("75.0%") && table.contains("en-de"));
}

#[test]
fn duplicate_judgments_are_rejected() {
    let j = HumanJudgment {
        system: "A".into(),
        segment: Some("1".into()),
        dimension: None,
        score: 1.0,
    };
    assert!(HumanScores::from_judgments(&[j.clone(), j]).is_err());
}

#[test]
fn leakage_gap_identical_systems_is_zero() {
    let s = BTreeMap::from([("A".to_string(), 40.0), ("B".into(), 40.0)]);
    let r = leakage_gap(&s, &s, "A", "B").unwrap();
    assert_eq!((r.delta_single, r.delta_multi, r.ratio), (0.0, 0.0, None));
    assert!(leakage_gap(&s, &s, "A", "Z").is_err());
}
