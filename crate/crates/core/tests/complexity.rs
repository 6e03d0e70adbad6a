mod common;

use convex_relu::complexity::{
    covering_exponent_probe, entropy_exponent, gaussian_bound, gaussian_complexity_mc,
    gaussian_surrogate_samples, greedy_packing_count, nested_packing_counts, neuron_responses,
    regularization_bound,
};
use convex_relu::stats::median;
use convex_relu::{Dataset, Error};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn bounded(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = common::rng(seed);
    common::random_dataset(&mut rng, n, d).assert_bounded().unwrap()
}

#[test]
fn closed_form_values() {
    assert!((gaussian_bound(1.0, 2, 100) - 0.23548).abs() < 1e-5);
    assert_eq!(gaussian_bound(0.0, 7, 100), 0.0);
    assert_eq!(gaussian_bound(3.0, 1, 100), 0.0);
    assert_eq!(entropy_exponent(2), 1.0);
    assert_eq!(entropy_exponent(6), 1.5);
    assert!((entropy_exponent(100) - 1.9608).abs() < 1e-4);
    assert!((regularization_bound(2.0, 1e-8, 100).unwrap() - 0.12000002).abs() < 1e-15);
}

#[test]
fn single_point_matches_half_normal_mean() {
    let mut x = DMatrix::zeros(1, 4);
    x[(0, 0)] = 1.0;
    let data = Dataset::unlabeled(x).unwrap();
    let (upper, lower) = gaussian_complexity_mc(&data, 1.0, 10_000, 3).unwrap();
    let exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((upper.mean - exact).abs() <= 3.0 * upper.stderr, "{} +- {}", upper.mean, upper.stderr);
    // Only w = e_1 activates: R E|xi| / 1.
    assert!((lower.mean - exact / 2.0).abs() <= 3.0 * lower.stderr);
}

#[test]
fn zero_rows_give_zero() {
    let data = Dataset::unlabeled(DMatrix::zeros(4, 2)).unwrap();
    let (u, l) = gaussian_complexity_mc(&data, 2.0, 20, 0).unwrap();
    assert_eq!((u.mean, l.mean, u.stderr), (0.0, 0.0, 0.0));
}

#[test]
fn upper_surrogate_respects_bound() {
    for seed in 0..10 {
        for d in [2, 8, 32] {
            let data = bounded(seed, 100, d);
            let (upper, _) = gaussian_complexity_mc(&data, 1.0, 1000, seed).unwrap();
            assert!(upper.mean <= gaussian_bound(1.0, d, 100) + 3.0 * upper.stderr);
        }
    }
}

// Pathwise dominance fails (x = (1, -1), xi = (1, 1) gives upper 0, lower 1/2), so the
// sandwich is checked on means.
#[test]
fn lower_estimate_sits_below_upper_on_average() {
    let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    let xi = DVector::from_vec(vec![1.0, 1.0]);
    let upper = 2.0 * (x.tr_mul(&xi) / 2.0).amax();
    let lower = (x.map(|v: f64| v.max(0.0)).tr_mul(&xi) / 2.0).amax();
    assert!(lower > upper);

    for seed in 0..10 {
        let data = bounded(seed, 30, 1 + seed as usize % 5);
        let (u, l) = gaussian_complexity_mc(&data, 1.0, 2000, seed).unwrap();
        let spread = (u.stderr.powi(2) + l.stderr.powi(2)).sqrt();
        assert!(l.mean <= u.mean + 3.0 * spread);
        let (a, b) = gaussian_surrogate_samples(&data, 1.0, 2000, seed);
        assert_eq!(a.len(), 2000);
        assert_eq!(b.len(), 2000);
    }
}

#[test]
fn upper_surrogate_shrinks_like_root_n() {
    let med = |n: usize| {
        let values: Vec<f64> = (0..5)
            .map(|seed| {
                let data = bounded(1000 + seed + n as u64, n, 8);
                gaussian_complexity_mc(&data, 1.0, 2000, seed).unwrap().0.mean
            })
            .collect();
        median(&values)
    };
    let ratio = med(200) / med(100);
    assert!((0.5..=0.5f64.sqrt() * 1.15).contains(&ratio), "{ratio}");
}

// Single neurons with unit-l1 weights form a (d - 1)-dimensional family, so packing
// counts grow like eps^-(d - 1) once eps is small; on this coarse grid the fit lands
// near 2 from either side.
#[test]
fn probe_slope_tracks_family_dimension() {
    let probe = covering_exponent_probe(3, &[0.4, 0.2, 0.1, 0.05], 200, 5000, 0).unwrap();
    assert!(probe.slope > 0.0 && (probe.slope - 2.0).abs() <= 0.5, "{}", probe.slope);
    assert!(probe.rows.windows(2).all(|w| w[0].count <= w[1].count));
    assert_eq!(probe.exponent, 1.2);
    assert!(matches!(
        covering_exponent_probe(3, &[0.2, 0.2], 10, 10, 0),
        Err(Error::Grid)
    ));
}

#[test]
fn huge_eps_packs_once() {
    let values = neuron_responses(4, 50, 300, 2);
    // Every response lies within sqrt(mean(f^2)) <= 1 of zero, so diameter <= 2.
    assert_eq!(greedy_packing_count(&values, 2.0), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packing_counts_shrink_with_eps(
        seed in 0u64..10_000,
        d in 2usize..6,
        mut grid in proptest::collection::btree_set(1u32..1000, 2..6),
    ) {
        let eps: Vec<f64> = std::mem::take(&mut grid).into_iter().rev().map(|v| v as f64 / 1000.0).collect();
        let values = neuron_responses(d, 30, 200, seed);
        let counts = nested_packing_counts(&values, &eps).unwrap();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(counts.iter().all(|&c| (1..=200).contains(&c)));
    }

    #[test]
    fn entropy_exponent_increases_to_two(d in 1usize..10_000) {
        prop_assert!(entropy_exponent(d) < entropy_exponent(d + 1));
        prop_assert!(entropy_exponent(d) < 2.0);
    }
}
