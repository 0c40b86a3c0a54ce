mod common;

use proptest::prelude::*;
use timeline_dil::metrics::{auc, c_auc, fwt_auc, AucMatrix, MetricSeries};
use timeline_dil::Error;

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0i32..8, 0u8..2), 2..50)
        .prop_filter("needs both classes", |v| v.iter().any(|p| p.1 == 0) && v.iter().any(|p| p.1 == 1))
        .prop_map(|v| (v.iter().map(|p| p.0 as f64 * 0.25).collect(), v.iter().map(|p| p.1).collect()))
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((scores, labels) in scored_labels()) {
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((a - common::brute_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_maps((scores, labels) in scored_labels()) {
        let a = auc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).exp()).collect();
        prop_assert!((auc(&mapped, &labels).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn negated_scores_complement((scores, labels) in scored_labels()) {
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = auc(&scores, &labels).unwrap() + auc(&neg, &labels).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn released_and_future_partition_the_row(
        row in prop::collection::vec(0.0f64..1.0, 2..8),
        t in 0usize..8,
    ) {
        let n = row.len();
        let t = t % n;
        let mut m = AucMatrix::new((0..n).collect());
        for e in 0..n {
            m.push_row(e as u32, if e == t { row.clone() } else { vec![0.5; n] }).unwrap();
        }
        let c = c_auc(&m, t).unwrap();
        let released = t + 1;
        let total: f64 = row.iter().sum();
        match fwt_auc(&m, t).unwrap() {
            Some(f) => prop_assert!((c * released as f64 + f * (n - released) as f64 - total).abs() < 1e-9),
            None => {
                prop_assert_eq!(released, n);
                prop_assert!((c * n as f64 - total).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn perfect_and_inverted_rankings() {
    assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
    assert_eq!(auc(&[0.1, 0.2, 0.9, 0.8], &[1, 1, 0, 0]).unwrap(), 0.0);
    assert_eq!(auc(&[0.5; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
}

#[test]
fn single_class_is_undefined() {
    assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
}

#[test]
fn c_and_fwt_on_three_datasets() {
    let mut m = AucMatrix::new(vec![0, 1, 2]);
    m.push_row(0, vec![0.9, 0.55, 0.45]).unwrap();
    m.push_row(5, vec![0.8, 0.95, 0.6]).unwrap();
    m.push_row(9, vec![0.7, 0.85, 0.97]).unwrap();
    assert!((c_auc(&m, 0).unwrap() - 0.9).abs() < 1e-12);
    assert!((fwt_auc(&m, 0).unwrap().unwrap() - 0.5).abs() < 1e-12);
    assert!((c_auc(&m, 1).unwrap() - 0.875).abs() < 1e-12);
    assert_eq!(fwt_auc(&m, 2).unwrap(), None);
    let s = MetricSeries::from_matrix(&m).unwrap();
    assert_eq!(s.c_auc.len(), 3);
    assert!((s.final_c_auc().unwrap() - (0.7 + 0.85 + 0.97) / 3.0).abs() < 1e-12);
}
