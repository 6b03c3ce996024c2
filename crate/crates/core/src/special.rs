//! Numeric building blocks shared by the model, the exact oracle and the samplers.

use num_bigint::BigUint;
use num_traits::One;

/// Largest `k` for which binomial coefficients are formed as an explicit product.
const SMALL_K: u64 = 64;

pub fn ln_factorial(k: u64) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// `ln C(n, k)`, `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k <= SMALL_K {
        (0..k)
            .map(|i| ((n - i) as f64 / (i + 1) as f64).ln())
            .sum()
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// `C(n, k)` as a float; exact for the small arguments that dominate in practice.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if k <= SMALL_K {
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    } else {
        ln_binomial(n, k).exp()
    }
}

pub fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Falling factorial `(n)_k = n (n-1) ... (n-k+1)`.
pub fn big_falling(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i))
}

pub fn big_factorial(k: u64) -> BigUint {
    big_falling(k, k)
}

/// Pascal rows `C(i, j)` for `0 <= j <= i <= n`.
pub fn big_binomial_rows(n: usize) -> Vec<Vec<BigUint>> {
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![BigUint::one(); i + 1];
        for j in 1..i {
            row[j] = &rows[i - 1][j - 1] + &rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Binomial(`n`, `p`) point masses at `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if p <= 0.0 {
        let mut v = vec![0.0; len];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; len];
        v[len - 1] = 1.0;
        return v;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let ln_n = ln_factorial(n);
    (0..=n)
        .map(|k| (ln_n - ln_factorial(k) - ln_factorial(n - k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .collect()
}

/// `x^k / k!` at `x = 0` convention `0^0 = 1`.
pub(crate) fn pow_over_factorial(x: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    (k as f64 * x.ln() - ln_factorial(k)).exp()
}
