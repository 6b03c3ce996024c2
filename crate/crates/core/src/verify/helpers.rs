//! Exact checks of the elementary identities and inequalities behind the moment bounds.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::special::{big_binomial, big_falling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperRanges {
    pub stirling_max_n: u64,
    pub stirling_max_q: u64,
    pub poly_max_power: u64,
    pub poly_max_terms: u64,
    pub binomial_power_max_m: u64,
    pub tilt_max_n: u64,
    pub hoeffding_max_n: u64,
    pub elementary_max: u64,
}

impl Default for HelperRanges {
    fn default() -> Self {
        Self {
            stirling_max_n: 60,
            stirling_max_q: 6,
            poly_max_power: 6,
            poly_max_terms: 4,
            binomial_power_max_m: 20,
            tilt_max_n: 12,
            hoeffding_max_n: 200,
            elementary_max: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperCheck {
    pub name: String,
    pub cases: u64,
    pub violations: u64,
    /// First failing case.
    pub witness: Option<String>,
}

impl HelperCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), cases: 0, violations: 0, witness: None }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperReport {
    pub checks: Vec<HelperCheck>,
    pub pass: bool,
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn int(x: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(x.into())
}

fn uint(x: BigUint) -> BigRational {
    int(BigInt::from(x))
}

/// Stirling numbers of the second kind `S(q, j)` for `q <= max_q`.
pub fn stirling2(max_q: usize) -> Vec<Vec<u64>> {
    let mut s = vec![vec![0u64; max_q + 1]; max_q + 1];
    s[0][0] = 1;
    for q in 1..=max_q {
        for j in 1..=q {
            s[q][j] = j as u64 * s[q - 1][j] + s[q - 1][j - 1];
        }
    }
    s
}

fn binomial_law(n: u64, p: &BigRational) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    (0..=n)
        .map(|k| uint(big_binomial(n, k)) * pow(p, k) * pow(&q, n - k))
        .collect()
}

fn pow(x: &BigRational, k: u64) -> BigRational {
    num_traits::pow(x.clone(), k as usize)
}

/// Binomial moments against the falling-factorial expansion, and the two bounds that follow it.
pub fn check_stirling_moments(max_n: u64, max_q: u64) -> HelperCheck {
    let mut check = HelperCheck::new("binomial moments via Stirling numbers");
    let s = stirling2(max_q as usize);
    let probs = [rat(1, 2), rat(1, 3), rat(2, 5), rat(1, 7), rat(1, 25)];
    for p in &probs {
        for n in 1..=max_n {
            let law = binomial_law(n, p);
            let np = int(n) * p;
            for q in 1..=max_q {
                let direct: BigRational = law.iter().enumerate().map(|(k, w)| w * int(num_traits::pow(BigInt::from(k), q as usize))).sum();
                let (mut falling, mut plain) = (BigRational::zero(), BigRational::zero());
                let mut smax = 0;
                for j in 1..=q {
                    let sj = s[q as usize][j as usize];
                    smax = smax.max(sj);
                    falling += int(sj) * uint(big_falling(n, j)) * pow(p, j);
                    plain += int(sj) * pow(&np, j);
                }
                let c1 = int(q * smax);
                let ok = direct == falling && falling <= plain && plain <= c1 * (&np + pow(&np, q));
                check.record(ok, || format!("n={n} q={q} p={p}"));
            }
        }
    }
    check
}

/// `1 + x^{l1} + ... + x^{lj} <= (j + 1{lj < l}) (1 + x^l)` on dyadic `x`.
pub fn check_poly_bound(max_power: u64, max_terms: u64) -> HelperCheck {
    let mut check = HelperCheck::new("sum of powers against 1 + x^l");
    let mut xs: Vec<BigRational> = (-8i32..=8)
        .map(|e| if e >= 0 { int(1i64 << e) } else { rat(1, 1i64 << (-e)) })
        .collect();
    xs.extend((1..=64).map(|k| rat(k, 16)));
    fn sequences(len: u64, lo: u64, hi: u64, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if acc.len() as u64 == len {
            out.push(acc.clone());
            return;
        }
        for v in lo..=hi {
            acc.push(v);
            sequences(len, v, hi, acc, out);
            acc.pop();
        }
    }
    for l in 1..=max_power {
        for j in 1..=max_terms {
            let mut seqs = Vec::new();
            sequences(j, 1, l, &mut Vec::new(), &mut seqs);
            for seq in &seqs {
                let factor = int(j + u64::from(*seq.last().expect("nonempty") < l));
                for x in &xs {
                    let lhs = seq.iter().fold(BigRational::one(), |acc, &e| acc + pow(x, e));
                    let rhs = &factor * (BigRational::one() + pow(x, l));
                    check.record(lhs <= rhs, || format!("l={l} powers={seq:?} x={x}"));
                }
            }
        }
    }
    check
}

/// `C(k, x + l) p^x <= C(k, l)` for `k <= (l + 1)/p + l`, and `<= 2^k` always, with `p = 1/(m - 1)`.
pub fn check_binomial_power_bound(max_m: u64) -> HelperCheck {
    let mut check = HelperCheck::new("binomial coefficient times p^x");
    for m in 3..=max_m {
        let inv_p = m - 1;
        for l in 1..=3u64 {
            let k_max = (l + 1) * inv_p + l;
            for k in l..=k_max + 4 {
                let base = big_binomial(k, l);
                let two_k = BigUint::one() << k as usize;
                let mut scale = BigUint::one();
                for x in 0..=(k - l) {
                    let c = big_binomial(k, x + l);
                    if k <= k_max {
                        check.record(c <= &base * &scale, || format!("m={m} l={l} k={k} x={x}"));
                    }
                    check.record(c <= &two_k * &scale, || format!("m={m} l={l} k={k} x={x} (2^k case)"));
                    scale *= inv_p;
                }
            }
        }
    }
    check
}

/// `E[w^B f(B)] = (1 - s + s w)^n E f(B')` with `B' ~ Binomial(n, s w / (1 - s + s w))`,
/// for point and upper-tail indicators.
pub fn check_tilt_identity(max_n: u64) -> HelperCheck {
    let mut check = HelperCheck::new("exponential tilt of the binomial");
    let ss = [rat(1, 2), rat(1, 3), rat(1, 5), rat(3, 4)];
    let ws = [rat(1, 1), rat(2, 1), rat(4, 1), rat(1, 3), rat(5, 2)];
    for n in 0..=max_n {
        for s in &ss {
            let law = binomial_law(n, s);
            for w in &ws {
                let norm = BigRational::one() - s + s * w;
                let tilted = binomial_law(n, &(s * w / &norm));
                let scale = pow(&norm, n);
                let weighted: Vec<BigRational> = law.iter().enumerate().map(|(b, p)| p * pow(w, b as u64)).collect();
                for k in 0..=n as usize {
                    let ok = weighted[k] == &scale * &tilted[k];
                    check.record(ok, || format!("n={n} s={s} w={w} f=1{{B={k}}}"));
                    let lhs: BigRational = weighted[k + 1..].iter().sum();
                    let rhs: BigRational = &scale * tilted[k + 1..].iter().sum::<BigRational>();
                    check.record(lhs == rhs, || format!("n={n} s={s} w={w} f=1{{B>{k}}}"));
                }
            }
        }
    }
    check
}

/// Exact upper tails `P(B > t)` for `t > n s` against `exp(-2 n (t/n - s)^2)`.
pub fn check_hoeffding(max_n: u64) -> HelperCheck {
    let mut check = HelperCheck::new("Hoeffding upper tail");
    let probs: [(u64, u64); 5] = [(1, 20), (1, 10), (3, 10), (1, 2), (7, 10)];
    for n in 1..=max_n {
        for &(a, b) in &probs {
            let total = BigUint::from(b).pow(n as u32);
            let s = a as f64 / b as f64;
            // Integer weights C(n,k) a^k (b-a)^(n-k); tails accumulated from the top.
            let mut tail = BigUint::zero();
            for t in (0..n).rev() {
                let k = t + 1;
                tail += big_binomial(n, k) * BigUint::from(a).pow(k as u32) * BigUint::from(b - a).pow((n - k) as u32);
                if t * b <= n * a {
                    continue;
                }
                let p = BigRational::new(BigInt::from(tail.clone()), BigInt::from(total.clone()))
                    .to_f64()
                    .unwrap_or(f64::NAN);
                let bound = (-2.0 * n as f64 * (t as f64 / n as f64 - s).powi(2)).exp();
                check.record(p <= bound * (1.0 + 1e-12), || format!("n={n} s={a}/{b} t={t}: {p} > {bound}"));
            }
        }
    }
    check
}

/// `(n+1)(1 + ((n+1)/m)^j) <= 2n(1 + 2^j (n/m)^j) <= 2^{j+1} n (1 + (n/m)^j)`, cleared of denominators.
pub fn check_elementary(max: u64) -> HelperCheck {
    let mut check = HelperCheck::new("shifted-size elementary bound");
    for n in 1..=max as u128 {
        for m in 1..=max as u128 {
            for j in 1..=6u32 {
                let mj = m.pow(j);
                let a = (n + 1) * (mj + (n + 1).pow(j));
                let b = 2 * n * (mj + (1u128 << j) * n.pow(j));
                let c = (1u128 << (j + 1)) * n * (mj + n.pow(j));
                check.record(a <= b && b <= c, || format!("n={n} m={m} j={j}"));
            }
        }
    }
    check
}

pub fn check_helper_inequalities(r: &HelperRanges) -> HelperReport {
    let jobs: Vec<Box<dyn Fn() -> HelperCheck + Sync + Send>> = vec![
        Box::new(move || check_stirling_moments(r.stirling_max_n, r.stirling_max_q)),
        Box::new(move || check_poly_bound(r.poly_max_power, r.poly_max_terms)),
        Box::new(move || check_binomial_power_bound(r.binomial_power_max_m)),
        Box::new(move || check_tilt_identity(r.tilt_max_n)),
        Box::new(move || check_hoeffding(r.hoeffding_max_n)),
        Box::new(move || check_elementary(r.elementary_max)),
    ];
    use rayon::prelude::*;
    let checks: Vec<HelperCheck> = jobs.par_iter().map(|f| f()).collect();
    let pass = checks.iter().all(|c| c.violations == 0 && c.cases > 0);
    HelperReport { checks, pass }
}
