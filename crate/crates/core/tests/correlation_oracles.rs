mod common;

use proptest::prelude::*;
use shannon_core::correlation::{kendall_tau_b, pearson_r, spearman_rho, CorrelationError, PairedSeries};

use common::{kendall_oracle, spearman_oracle, sweep_rank_correlations};

fn series(xs: &[f64], ys: &[f64]) -> PairedSeries {
    PairedSeries::new(xs.to_vec(), ys.to_vec()).unwrap()
}

#[test]
fn exhaustive_small_integer_series_match_the_oracles_exactly() {
    // Multisets of n points drawn from the 16 possible (x, y) pairs.
    let binomial = |n: u64, k: u64| (1..=k).fold(1u64, |acc, i| acc * (n - k + i) / i);
    let expected: u64 = (2..=8).map(|n| binomial(n + 15, 15)).sum();
    let (checked, mismatches) = sweep_rank_correlations(8);
    assert_eq!(checked as u64, expected);
    assert!(
        mismatches.is_empty(),
        "{} mismatches, first: {}",
        mismatches.len(),
        mismatches[0]
    );
}

#[test]
fn worked_examples() {
    assert_eq!(kendall_tau_b(&series(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0])), Ok(0.5));
    assert_eq!(spearman_rho(&series(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])), Ok(0.5));
}

#[test]
fn constant_side_is_undefined() {
    let s = series(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
    assert!(matches!(kendall_tau_b(&s), Err(CorrelationError::Undefined(_))));
    assert!(matches!(spearman_rho(&s), Err(CorrelationError::Undefined(_))));
    assert!(matches!(pearson_r(&s), Err(CorrelationError::Undefined(_))));
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-50i32..50).prop_map(|v| v as f64 / 4.0), n)
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=10).prop_flat_map(|n| (values(n), values(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_order_series_match_the_oracles((xs, ys) in paired()) {
        let s = series(&xs, &ys);
        prop_assert_eq!(kendall_tau_b(&s).ok(), kendall_oracle(&xs, &ys));
        prop_assert_eq!(spearman_rho(&s).ok(), spearman_oracle(&xs, &ys));
    }

    #[test]
    fn joint_permutation_and_swapping_sides_change_nothing((xs, ys) in paired(), seed in any::<u64>()) {
        let s = series(&xs, &ys);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17) ^ seed);
        let permuted = series(
            &order.iter().map(|&i| xs[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| ys[i]).collect::<Vec<_>>(),
        );
        prop_assert_eq!(kendall_tau_b(&s), kendall_tau_b(&permuted));
        prop_assert_eq!(spearman_rho(&s), spearman_rho(&permuted));
        prop_assert_eq!(kendall_tau_b(&s), kendall_tau_b(&s.swapped()));
        prop_assert_eq!(spearman_rho(&s), spearman_rho(&s.swapped()));
    }

    #[test]
    fn strictly_increasing_transforms_change_nothing((xs, ys) in paired(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let s = series(&xs, &ys);
        let tx: Vec<f64> = xs.iter().map(|x| (a * x + b).exp()).collect();
        let ty: Vec<f64> = ys.iter().map(|y| y.powi(3) + 2.0 * y).collect();
        let t = series(&tx, &ty);
        prop_assert_eq!(kendall_tau_b(&s), kendall_tau_b(&t));
        prop_assert_eq!(spearman_rho(&s), spearman_rho(&t));
    }

    #[test]
    fn coefficients_stay_in_range((xs, ys) in paired()) {
        let s = series(&xs, &ys);
        for r in [kendall_tau_b(&s), spearman_rho(&s), pearson_r(&s)].into_iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(&r), "{}", r);
        }
    }
}
