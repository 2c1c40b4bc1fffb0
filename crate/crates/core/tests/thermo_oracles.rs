use orbitmatch_core::diagnostics::{quasi_bernoulli_constant, quasi_bernoulli_junction, sigma_bounds_check};
use orbitmatch_core::linalg::Matrix;
use orbitmatch_core::symbolic::{all_words, MeasureSpec, TransitionSystem};
use orbitmatch_core::thermo::{
    gurevich_pressure, psi_mixing_exact, renyi_entropy_exact, z_partition_sum, EntropyMethod,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random irreducible chain on `d` symbols; roughly a quarter of the
/// off-cycle entries are zeroed, the cycle `i -> i+1` keeps it irreducible.
fn random_chain(d: usize, seed: u64) -> MeasureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let keep = j == (i + 1) % d || rng.gen_bool(0.75);
            *v = if keep { rng.gen_range(0.05..1.0) } else { 0.0 };
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    MeasureSpec::markov_from_transition(Matrix::from_rows(&rows).unwrap()).unwrap()
}

/// Compensated sum of `μ(w)^{1+t}` over all `n`-words.
fn enumerated_z(m: &MeasureSpec, n: usize, t: f64) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for w in all_words(m.alphabet_size(), n) {
        let p = m.cylinder(&w).unwrap();
        if p == 0.0 {
            continue;
        }
        let x = p.powf(1.0 + t);
        let s = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - s) + x } else { (x - s) + sum };
        sum = s;
    }
    sum + carry
}

#[test]
fn entropy_routes_agree_on_random_chains() {
    let mut count = 0;
    for seed in 0..12u64 {
        let d = 2 + (seed as usize % 3);
        let m = random_chain(d, seed);
        let h = renyi_entropy_exact(&m).unwrap();
        assert_eq!(h.method, EntropyMethod::QMatrix);
        let (method, cross) = h.cross_check.unwrap();
        assert_eq!(method, EntropyMethod::PressureFormula);
        assert!((h.h2 - cross).abs() < 1e-8, "seed {seed}: {} vs {cross}", h.h2);
        count += 1;
    }
    assert!(count >= 10);
}

#[test]
fn pressure_of_log_transition_is_zero() {
    for seed in 0..10u64 {
        let m = random_chain(3, 100 + seed);
        let p = m.chain().transition;
        let ts = TransitionSystem::from_support(&p).unwrap();
        let phi = p.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
        let r = gurevich_pressure(&ts, &phi).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!((r.periodic_orbit_value - r.value).abs() < 1e-8);
    }
}

#[test]
fn gibbs_measure_of_log_transition_reproduces_chain() {
    let m = random_chain(3, 7);
    let p = m.chain().transition;
    let ts = TransitionSystem::from_support(&p).unwrap();
    let phi = p.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
    let g = MeasureSpec::gibbs2(&ts, &phi).unwrap();
    for w in all_words(3, 5) {
        assert!((g.cylinder(&w).unwrap() - m.cylinder(&w).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn z_dynamic_programme_matches_enumeration() {
    let cases: Vec<(MeasureSpec, usize)> = vec![
        (random_chain(2, 1), 12),
        (random_chain(3, 2), 12),
        (random_chain(4, 3), 10),
        (MeasureSpec::bernoulli(vec![0.1, 0.2, 0.3, 0.4]).unwrap(), 10),
    ];
    for (m, n_max) in &cases {
        for n in 1..=*n_max {
            for t in [0.5, 1.0, 2.0, 3.0] {
                let dp = z_partition_sum(m, n, t).unwrap();
                let brute = enumerated_z(m, n, t);
                assert!((dp - brute).abs() <= 1e-12 * brute, "n={n} t={t}: {dp} vs {brute}");
            }
        }
    }
}

/// `sup |μ(E ∩ σ^{-|E|-k} F) / (μ(E) μ(F)) - 1|` over cylinders of length
/// up to 3, summing over all gap words.
fn psi_bruteforce(m: &MeasureSpec, k: usize) -> f64 {
    let d = m.alphabet_size();
    let gaps = all_words(d, k);
    let mut worst = 0.0f64;
    for le in 1..=3 {
        for e in all_words(d, le) {
            let me = m.cylinder(&e).unwrap();
            if me == 0.0 {
                continue;
            }
            for lf in 1..=3 {
                for f in all_words(d, lf) {
                    let mf = m.cylinder(&f).unwrap();
                    if mf == 0.0 {
                        continue;
                    }
                    let mut joint = 0.0;
                    for g in &gaps {
                        let w: Vec<u8> = e.iter().chain(g.iter()).chain(f.iter()).copied().collect();
                        joint += m.cylinder(&w).unwrap();
                    }
                    worst = worst.max((joint / (me * mf) - 1.0).abs());
                }
            }
        }
    }
    worst
}

#[test]
fn psi_formula_matches_cylinder_bruteforce() {
    let golden = MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap()).unwrap();
    for m in [golden, random_chain(2, 11), random_chain(3, 12)] {
        for k in 0..=4 {
            let exact = psi_mixing_exact(&m, k).unwrap().psi;
            let brute = psi_bruteforce(&m, k);
            assert!((exact - brute).abs() < 1e-12, "k={k}: {exact} vs {brute}");
        }
    }
}

#[test]
fn sigma_golden_suite_passes() {
    let golden = MeasureSpec::uniform_edges(&TransitionSystem::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
    let two_state = MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap()).unwrap();
    let cases = [
        (MeasureSpec::uniform_bernoulli(2).unwrap(), 6, 14),
        (MeasureSpec::uniform_bernoulli(3).unwrap(), 6, 10),
        (golden, 6, 12),
        (two_state, 8, 16),
        (random_chain(2, 21), 8, 14),
        (random_chain(3, 22), 6, 9),
    ];
    for (m, r, k_max) in &cases {
        for c in sigma_bounds_check(m, *r, *k_max).unwrap() {
            assert!(c.pass, "{}: lhs {} rhs {}", c.name, c.lhs, c.rhs);
        }
    }
}

/// The short-period bound `B^6 Z_l(w)` charges `w + 1` copies of the
/// `l`-block, but a `k`-periodic `(r + k)`-word only guarantees
/// `floor((r + k) / l)` of them. For a biased coin with `r = 8`, `k = 1` the
/// exact mass exceeds the bound.
#[test]
fn short_period_bound_undercounts_for_biased_coin() {
    let m = MeasureSpec::bernoulli(vec![0.3, 0.7]).unwrap();
    let checks = sigma_bounds_check(&m, 8, 16).unwrap();
    let k1 = &checks[0];
    assert!(!k1.pass);
    assert!((k1.lhs - (0.3f64.powi(9) + 0.7f64.powi(9))).abs() < 1e-15);
    assert!((k1.rhs - (0.3f64.powi(5) + 0.7f64.powi(5)).powi(2)).abs() < 1e-15);
    // Charging the copies actually present restores the inequality.
    let available = z_partition_sum(&m, 2, 3.0).unwrap();
    assert!(k1.lhs <= available);
    assert!(checks[4..].iter().all(|c| c.pass));
}

#[test]
fn quasi_bernoulli_stabilises_in_length() {
    for seed in 0..5u64 {
        let m = random_chain(2, 40 + seed);
        let b6 = quasi_bernoulli_constant(&m, 6).unwrap();
        let b8 = quasi_bernoulli_constant(&m, 8).unwrap();
        assert!((b6 - b8).abs() < 1e-12);
        assert!((b6 - quasi_bernoulli_junction(&m)).abs() < 1e-12);
        assert!(b6 >= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn z_is_non_increasing_in_t(seed in 0u64..1000, n in 1usize..20, t in 0.0f64..3.0, dt in 0.0f64..2.0) {
        let m = random_chain(3, seed);
        let a = z_partition_sum(&m, n, t).unwrap();
        let b = z_partition_sum(&m, n, t + dt).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn cylinders_are_additive_and_shift_invariant(seed in 0u64..1000, len in 1usize..6) {
        let m = random_chain(3, seed);
        for w in all_words(3, len) {
            let mw = m.cylinder(&w).unwrap();
            let extended: f64 = (0..3u8).map(|s| { let mut v = w.clone(); v.push(s); m.cylinder(&v).unwrap() }).sum();
            prop_assert!((mw - extended).abs() < 1e-14);
            let preceded: f64 = (0..3u8).map(|s| { let mut v = vec![s]; v.extend(&w); m.cylinder(&v).unwrap() }).sum();
            prop_assert!((mw - preceded).abs() < 1e-12);
        }
    }

    #[test]
    fn z_at_zero_is_one(seed in 0u64..1000, n in 0usize..100) {
        let m = random_chain(4, seed);
        prop_assert!((z_partition_sum(&m, n, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }
}
