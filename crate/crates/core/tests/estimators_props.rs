use orbitmatch_core::estimators::{
    correlation_integral, d2_bounds, d2_estimate, default_r_grid, exponent_fit, h2_collision_estimate, log_r_grid,
    orbit_correlation_integral, CurvePoint, FitOptions, Trim,
};
use orbitmatch_core::linalg::Matrix;
use orbitmatch_core::maps::{self, FloatMode, MapSpec};
use orbitmatch_core::proximity::alpha_of;
use orbitmatch_core::symbolic::MeasureSpec;
use orbitmatch_core::thermo::{renyi_entropy_exact, renyi_rate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_points(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn brute_pairs(pts: &[f64], r: f64) -> u64 {
    let mut c = 0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (pts[i] - pts[j]).abs() < r {
                c += 1;
            }
        }
    }
    c
}

#[test]
fn pair_counts_match_bruteforce() {
    let grid = log_r_grid(0.5, 4, 3);
    for (n, seed) in [(100usize, 1u64), (777, 2), (2000, 3)] {
        let mut pts = uniform_points(n, seed);
        // Duplicates and exact-distance ties.
        pts[1] = pts[0];
        pts[2] = pts[0] + 0.125;
        let curve = correlation_integral(&pts, &grid).unwrap();
        for (i, &r) in grid.iter().enumerate() {
            assert_eq!(curve.pair_counts[i], brute_pairs(&pts, r), "n={n} r={r}");
        }
    }
}

#[test]
fn uniform_samples_have_dimension_one() {
    let pts = uniform_points(100_000, 4);
    let curve = correlation_integral(&pts, &log_r_grid(0.1, 3, 24)).unwrap();
    let fit = d2_estimate(&curve, Trim::default()).unwrap();
    assert!((0.95..=1.05).contains(&fit.slope), "{}", fit.slope);
    let (lo, hi) = d2_bounds(&curve, Trim::default(), 12).unwrap();
    assert!(lo <= fit.slope && fit.slope <= hi);
}

#[test]
fn gauss_samples_have_dimension_one() {
    let pts = maps::sample_points(&MapSpec::Gauss, 100_000, 5).unwrap();
    let fit = d2_estimate(&correlation_integral(&pts, &default_r_grid()).unwrap(), Trim::default()).unwrap();
    assert!((0.9..=1.1).contains(&fit.slope), "{}", fit.slope);
}

#[test]
fn orbit_mode_with_stride_has_dimension_one() {
    let map = MapSpec::Gauss;
    let n = 200_000;
    let x0 = maps::sample_initial(&map, 6).unwrap();
    let orbit = maps::iterate(&map, x0, n, FloatMode { dither_seed: Some(6) }).unwrap().to_f64();
    let curve = orbit_correlation_integral(&orbit, &default_r_grid(), alpha_of(n)).unwrap();
    let fit = d2_estimate(&curve, Trim::default()).unwrap();
    assert!((0.85..=1.15).contains(&fit.slope), "{}", fit.slope);
}

#[test]
fn rescaling_leaves_dimension_unchanged() {
    let pts = maps::sample_points(&MapSpec::Gauss, 20_000, 7).unwrap();
    let grid = default_r_grid();
    let base = d2_estimate(&correlation_integral(&pts, &grid).unwrap(), Trim::default()).unwrap();
    for scale in [0.5, 4.0, 1024.0] {
        let scaled: Vec<f64> = pts.iter().map(|x| x * scale).collect();
        let sgrid: Vec<f64> = grid.iter().map(|r| r * scale).collect();
        let fit = d2_estimate(&correlation_integral(&scaled, &sgrid).unwrap(), Trim::default()).unwrap();
        assert!((fit.slope - base.slope).abs() < 1e-12);
    }
}

#[test]
fn collision_entropy_bands() {
    let coin = MeasureSpec::uniform_bernoulli(2).unwrap();
    let chain = MeasureSpec::markov_from_transition(Matrix::from_fn(2, |_, _| 0.5)).unwrap();
    for m in [coin, chain] {
        let e = h2_collision_estimate(&m, 10, 10_000, 8).unwrap();
        assert!((0.66..=0.72).contains(&e.h2), "{}", e.h2);
        assert!(e.stderr > 0.0 && e.stderr < 0.02);
    }
}

/// Mean absolute error over 20 seeds against `target`, at `samples` and at
/// twice as many.
fn paired_errors(m: &MeasureSpec, block: usize, samples: usize, target: f64) -> (f64, f64) {
    let (mut small, mut large) = (0.0, 0.0);
    for seed in 0..20u64 {
        small += (h2_collision_estimate(m, block, samples, seed).unwrap().h2 - target).abs();
        large += (h2_collision_estimate(m, block, 2 * samples, 100 + seed).unwrap().h2 - target).abs();
    }
    (small / 20.0, large / 20.0)
}

#[test]
fn collision_entropy_improves_with_samples() {
    let coin = MeasureSpec::uniform_bernoulli(2).unwrap();
    let (small, large) = paired_errors(&coin, 10, 2_000, renyi_entropy_exact(&coin).unwrap().h2);
    assert!(large < small, "{large} vs {small}");

    // For a Markov measure the block estimator targets the finite-block
    // rate -ln Z_l(1) / l, which differs from H_2 by O(1/l).
    let golden = MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap()).unwrap();
    let rate = renyi_rate(&golden, 8, 1.0).unwrap();
    let (small, large) = paired_errors(&golden, 8, 2_000, rate);
    assert!(large < small, "{large} vs {small}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_exponent_is_recovered(slope in 0.1f64..5.0, intercept in -3.0f64..3.0, reps in 3usize..6) {
        let mut table = Vec::new();
        for n in [1_000usize, 3_162, 10_000, 31_623, 100_000] {
            for _ in 0..reps {
                table.push(CurvePoint { n, value: intercept + slope * (n as f64).ln(), flagged: false });
            }
        }
        let f = exponent_fit(&table, FitOptions::default()).unwrap();
        prop_assert!((f.fit.slope - slope).abs() < 1e-12);
        prop_assert!((f.fit.intercept - intercept).abs() < 1e-10);
        prop_assert_eq!(f.fit.point_count, 5);
    }

    #[test]
    fn correlation_integral_is_monotone(seed in 0u64..1000, n in 100usize..600) {
        let pts = uniform_points(n, seed);
        let curve = correlation_integral(&pts, &default_r_grid()).unwrap();
        for w in curve.c_values.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(curve.c_values.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}
