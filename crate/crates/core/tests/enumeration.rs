//! Brute-force enumeration of every labelled assignment against the exact law.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use occupancy_core::exact::{PmfMoments, Probabilities};
use occupancy_core::model::{mean, mean_exact, variance, variance_exact};
use occupancy_core::{exact_moments, exact_pmf, size_biased_pmf, OccupancyParams, PmfMode, RationalBudget};

/// Counts of `Y = k` over all `m^n` assignments.
fn enumerate(n: u64, m: u64, d: u64) -> Vec<u64> {
    let mut counts = vec![0u64; m as usize + 1];
    let total = m.pow(n as u32);
    let mut occ = vec![0u64; m as usize];
    for code in 0..total {
        occ.iter_mut().for_each(|o| *o = 0);
        let mut c = code;
        for _ in 0..n {
            occ[(c % m) as usize] += 1;
            c /= m;
        }
        counts[occ.iter().filter(|&&o| o == d).count()] += 1;
    }
    counts
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

#[test]
fn exact_law_matches_enumeration() {
    for n in 0..=8u64 {
        for m in 1..=4u64 {
            for d in 0..=4u64 {
                let p = OccupancyParams::new(n, m, d);
                let pmf = exact_pmf(&p, PmfMode::Exact, RationalBudget::default()).unwrap();
                let counts = enumerate(n, m, d);
                let total = m.pow(n as u32);
                for (k, &c) in counts.iter().enumerate() {
                    assert_eq!(pmf.probs.get_exact(k).unwrap(), ratio(c, total), "{p} k={k}");
                }
                if let Probabilities::Exact { weights, total: t } = &pmf.probs {
                    assert_eq!(weights.iter().sum::<BigUint>(), *t);
                } else {
                    panic!("rational mode expected");
                }
            }
        }
    }
}

#[test]
fn exact_moments_match_closed_forms() {
    for n in 0..=8u64 {
        for m in 2..=4u64 {
            for d in 0..=n.min(4) {
                let p = OccupancyParams::new(n, m, d);
                let pmf = exact_pmf(&p, PmfMode::Exact, RationalBudget::default()).unwrap();
                let PmfMoments::Rational { mean: mu, variance: var } = exact_moments(&pmf) else {
                    panic!("rational moments expected");
                };
                let counts = enumerate(n, m, d);
                let total = m.pow(n as u32);
                let s1: u64 = counts.iter().enumerate().map(|(k, c)| k as u64 * c).sum();
                let s2: u64 = counts.iter().enumerate().map(|(k, c)| (k * k) as u64 * c).sum();
                let brute_mu = ratio(s1, total);
                let brute_var = ratio(s2, total) - &brute_mu * &brute_mu;
                assert_eq!(mu, brute_mu, "{p}");
                assert_eq!(var, brute_var, "{p}");
                assert_eq!(mean_exact(&p).unwrap(), brute_mu, "{p}");
                assert_eq!(variance_exact(&p).unwrap(), brute_var, "{p}");
                let mf = brute_mu.to_f64().unwrap();
                let vf = brute_var.to_f64().unwrap();
                assert!((mean(&p).unwrap() - mf).abs() <= 1e-12 * mf.max(1.0), "{p}");
                assert!((variance(&p).unwrap() - vf).abs() <= 1e-12 * vf.max(1.0), "{p}");
            }
        }
    }
}

#[test]
fn size_biased_law_matches_enumeration() {
    for (n, m, d) in [(4, 2, 2), (3, 3, 2), (6, 3, 1), (8, 4, 2), (5, 4, 0)] {
        let p = OccupancyParams::new(n, m, d);
        let pmf = exact_pmf(&p, PmfMode::Exact, RationalBudget::default()).unwrap();
        let sb = size_biased_pmf(&pmf).unwrap();
        let counts = enumerate(n, m, d);
        let s1: u64 = counts.iter().enumerate().map(|(k, c)| k as u64 * c).sum();
        let mut acc = BigRational::zero();
        for (k, &c) in counts.iter().enumerate() {
            let want = ratio(k as u64 * c, s1);
            assert_eq!(sb.get_exact(k).unwrap(), want, "{p} k={k}");
            acc += want;
        }
        assert_eq!(acc, ratio(1, 1));
    }
}

#[test]
fn float_law_matches_enumeration() {
    for (n, m, d) in [(8, 4, 2), (7, 3, 0), (8, 2, 4), (6, 4, 1)] {
        let p = OccupancyParams::new(n, m, d);
        let pmf = exact_pmf(&p, PmfMode::Float, RationalBudget::default()).unwrap();
        let counts = enumerate(n, m, d);
        let total = m.pow(n as u32) as f64;
        for (k, &c) in counts.iter().enumerate() {
            assert!((pmf.probs.get(k) - c as f64 / total).abs() < 1e-13, "{p} k={k}");
        }
    }
}
