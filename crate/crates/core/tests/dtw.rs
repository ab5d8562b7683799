use loadshape_core::dtw::{dtw_bruteforce, dtw_distance, dtw_path};
use loadshape_core::rng::stream;
use proptest::prelude::*;
use rand::Rng;

fn sq_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[test]
fn matches_exhaustive_search_on_ternary_sequences() {
    let mut rng = stream(2024, "dtw-oracle", 0);
    for _ in 0..200 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0..3) as f64).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(0..3) as f64).collect();
        assert_eq!(
            dtw_distance(&x, &y).unwrap(),
            dtw_bruteforce(&x, &y).unwrap(),
            "{x:?} {y:?}"
        );
    }
}

#[test]
fn matches_exhaustive_search_on_shifted_impulses() {
    for i in 0..6 {
        for j in 0..6 {
            let mut x = [0.0; 6];
            let mut y = [0.0; 6];
            x[i] = 1.0;
            y[j] = 1.0;
            assert_eq!(
                dtw_distance(&x, &y).unwrap(),
                dtw_bruteforce(&x, &y).unwrap(),
                "{i} {j}"
            );
        }
    }
}

#[test]
fn every_length_up_to_the_oracle_cap() {
    let mut rng = stream(5, "dtw-lengths", 0);
    for len in 4..=8 {
        for _ in 0..20 {
            let x: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let fast = dtw_distance(&x, &y).unwrap();
            let slow = dtw_bruteforce(&x, &y).unwrap();
            assert!(
                (fast - slow).abs() <= 1e-12 * slow.max(1.0),
                "{fast} {slow}"
            );
        }
    }
}

#[test]
fn slope_limit_blocks_extreme_compression() {
    // Three samples can be squeezed onto one, four cannot.
    let y = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let three = [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(dtw_distance(&three, &y).unwrap(), 0.0);
    let four = [0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    assert!(dtw_distance(&four, &y).unwrap() > 0.0);
}

fn curve() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..5.0, 24)
}

proptest! {
    #[test]
    fn symmetric(x in curve(), y in curve()) {
        let a = dtw_distance(&x, &y).unwrap();
        let b = dtw_distance(&y, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn zero_on_identity(x in curve()) {
        prop_assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn bounded_by_squared_euclidean(x in curve(), y in curve()) {
        let d = dtw_distance(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= sq_euclidean(&x, &y) + 1e-12);
    }

    #[test]
    fn path_cost_equals_distance(x in curve(), y in curve()) {
        let path = dtw_path(&x, &y).unwrap();
        let d = dtw_distance(&x, &y).unwrap();
        prop_assert!((path.cost(&x, &y) - d).abs() <= 1e-12 * d.max(1.0));
        prop_assert_eq!(path.cells.first().copied(), Some((0, 0)));
        prop_assert_eq!(path.cells.last().copied(), Some((23, 23)));
    }
}
