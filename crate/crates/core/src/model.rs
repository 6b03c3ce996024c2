//! Closed-form quantities of the uniform occupancy model.
//!
//! Floating-point routes work in log space so that `(1 - 1/m)^(n-d)` never
//! underflows; the rational routes are exact and intended for `n, m` in the
//! low hundreds.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{OccupancyError, Result};
use crate::params::OccupancyParams;
use crate::special::{big_binomial, big_factorial, big_falling, ln_binomial, ln_factorial, pow_over_factorial};

fn ln_mean(p: &OccupancyParams) -> f64 {
    let (n, m, d) = (p.n, p.m as f64, p.d);
    m.ln() + ln_binomial(n, d) - d as f64 * m.ln() + (n - d) as f64 * (-1.0 / m).ln_1p()
}

/// Mean number of urns holding exactly `d` balls.
pub fn mean(p: &OccupancyParams) -> Result<f64> {
    p.check_moments()?;
    Ok(ln_mean(p).exp())
}

/// Variance of the count of urns holding exactly `d` balls.
///
/// Written as `m P1 (1 - P1) + m (m - 1) P1^2 (P2 / P1^2 - 1)` with `P1` the
/// one-urn and `P2` the two-urn probability; the last factor is formed with
/// `expm1` instead of by cancellation.
pub fn variance(p: &OccupancyParams) -> Result<f64> {
    p.check_moments()?;
    let (n, m, d) = (p.n, p.m, p.d);
    if n <= 1 {
        // A single ball (or none) leaves the count constant.
        return Ok(0.0);
    }
    let mf = m as f64;
    let ln_p1 = ln_mean(p) - mf.ln();
    let p1 = ln_p1.exp();
    let one_minus_p1 = if d == 0 {
        -(n as f64 * (-1.0 / mf).ln_1p()).exp_m1()
    } else {
        1.0 - p1
    };
    let single = mf * p1 * one_minus_p1;
    let no_pairs = n < 2 * d || (m == 2 && n > 2 * d);
    let pair_excess = if no_pairs {
        -1.0
    } else {
        let mut ln_ratio = -2.0 * d as f64 * (-1.0 / mf).ln_1p();
        for i in 0..d {
            ln_ratio += ((n - d - i) as f64 / (n - i) as f64).ln();
        }
        if n > 2 * d {
            let g = (mf - 1.0) * (mf - 1.0);
            ln_ratio += (n - 2 * d) as f64 * (-1.0 / g).ln_1p();
        }
        ln_ratio.exp_m1()
    };
    Ok((single + mf * (mf - 1.0) * p1 * p1 * pair_excess).max(0.0))
}

/// `sigma / (1 + (n/m)^3)`, the rate at which the normal approximation improves.
pub fn rate(p: &OccupancyParams) -> Result<f64> {
    let s2 = variance(p)?;
    if s2 <= 0.0 {
        return Err(OccupancyError::ZeroVariance);
    }
    Ok(rate_from_sigma(p, s2.sqrt()))
}

pub(crate) fn rate_from_sigma(p: &OccupancyParams, sigma: f64) -> f64 {
    sigma / (1.0 + p.load().powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu: f64,
    pub sigma2: f64,
    pub r: f64,
    /// Standardized atom locations `(k - mu) / sigma` over the possible support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_atoms: Option<Vec<f64>>,
}

pub fn moments(p: &OccupancyParams) -> Result<MomentSummary> {
    let mu = mean(p)?;
    let sigma2 = variance(p)?;
    let r = if sigma2 > 0.0 {
        rate_from_sigma(p, sigma2.sqrt())
    } else {
        0.0
    };
    Ok(MomentSummary {
        mu,
        sigma2,
        r,
        w_atoms: None,
    })
}

impl MomentSummary {
    pub fn with_atoms(mut self, p: &OccupancyParams) -> Self {
        if self.sigma2 > 0.0 {
            let sigma = self.sigma2.sqrt();
            let top = max_count(p);
            self.w_atoms = Some((0..=top).map(|k| (k as f64 - self.mu) / sigma).collect());
        }
        self
    }
}

/// Largest attainable count: every urn could hold `d` only if `k d <= n`.
pub fn max_count(p: &OccupancyParams) -> u64 {
    p.n.checked_div(p.d).map_or(p.m, |k| p.m.min(k))
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact mean `m C(n,d) (m-1)^(n-d) / m^n`.
pub fn mean_exact(p: &OccupancyParams) -> Result<BigRational> {
    p.check_moments()?;
    let (n, m, d) = (p.n, p.m, p.d);
    let num = BigUint::from(m) * big_binomial(n, d) * BigUint::from(m - 1).pow((n - d) as u32);
    Ok(ratio(num, BigUint::from(m).pow(n as u32)))
}

pub fn variance_exact(p: &OccupancyParams) -> Result<BigRational> {
    let mu = mean_exact(p)?;
    let (n, m, d) = (p.n, p.m, p.d);
    let pair = if n < 2 * d {
        BigRational::zero()
    } else {
        // m (m-1) n! / (d! d! (n-2d)!) (m-2)^(n-2d) / m^n
        let multinomial = big_falling(n, 2 * d) / (big_factorial(d) * big_factorial(d));
        let num = BigUint::from(m) * BigUint::from(m - 1) * multinomial * BigUint::from(m - 2).pow((n - 2 * d) as u32);
        ratio(num, BigUint::from(m).pow(n as u32))
    };
    Ok(&mu + pair - &mu * &mu)
}

/// Poisson point mass `e^{-x} x^d / d!`.
pub fn tau(d: u64, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(OccupancyError::NonPositive { name: "x", value: x });
    }
    Ok(tau_unchecked(d, x))
}

fn tau_unchecked(d: u64, x: f64) -> f64 {
    (-x).exp() * pow_over_factorial(x, d)
}

/// `1 - tau_d(x) - tau_d(x) (x - d)^2 / x`, the limiting ratio `sigma^2 / mu`.
pub fn varphi(d: u64, x: f64) -> Result<f64> {
    let t = tau(d, x)?;
    let dx = x - d as f64;
    Ok(1.0 - t - t * dx * dx / x)
}

/// Derivative of `varphi` in the factored form
/// `x^{d-2} e^{-x} (x - (d - sqrt d)) (x - d) (x - (d + sqrt d)) / d!`.
pub fn varphi_prime(d: u64, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(OccupancyError::NonPositive { name: "x", value: x });
    }
    let df = d as f64;
    let s = df.sqrt();
    let prefactor = (-x).exp() * (((d as f64) - 2.0) * x.ln() - ln_factorial(d)).exp();
    Ok(prefactor * (x - (df - s)) * (x - df) * (x - (df + s)))
}

/// The same derivative with the cubic left expanded:
/// `x^3 - 3 d x^2 + d (3d - 1) x - d^2 (d - 1)`.
pub fn varphi_prime_expanded(d: u64, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(OccupancyError::NonPositive { name: "x", value: x });
    }
    let df = d as f64;
    let prefactor = (-x).exp() * ((df - 2.0) * x.ln() - ln_factorial(d)).exp();
    let cubic = x * x * x - 3.0 * df * x * x + df * (3.0 * df - 1.0) * x - df * df * (df - 1.0);
    Ok(prefactor * cubic)
}

/// `m tau_d(n/m) e^{d/m}`, an upper bound for the mean valid for all `n, m >= 1`.
pub fn mu_upper_bound(p: &OccupancyParams) -> Result<f64> {
    if p.m == 0 {
        return Err(OccupancyError::Domain {
            n: p.n,
            m: p.m,
            d: p.d,
            reason: "need m >= 1",
        });
    }
    let m = p.m as f64;
    Ok(m * tau_unchecked(p.d, p.load()) * (p.d as f64 / m).exp())
}

/// `log m + d log log m - n/m`.
pub fn delta(p: &OccupancyParams) -> Result<f64> {
    if p.m < 3 {
        return Err(OccupancyError::Domain {
            n: p.n,
            m: p.m,
            d: p.d,
            reason: "log log m needs m >= 3",
        });
    }
    let lm = (p.m as f64).ln();
    Ok(lm + p.d as f64 * lm.ln() - p.load())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainLabel {
    LeftHand,
    LeftIntermediate,
    Central,
    RightIntermediate,
    RightHand,
    Indeterminate,
}

impl std::fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DomainLabel::LeftHand => "left-hand",
            DomainLabel::LeftIntermediate => "left-intermediate",
            DomainLabel::Central => "central",
            DomainLabel::RightIntermediate => "right-intermediate",
            DomainLabel::RightHand => "right-hand",
            DomainLabel::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Cut-offs used to place a single `(n, m)` point into one of the limiting regimes.
/// The regimes are defined by limits, so these are heuristics and are reported
/// alongside every classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainThresholds {
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub mu_threshold: f64,
}

impl Default for DomainThresholds {
    fn default() -> Self {
        Self {
            ratio_lo: 0.01,
            ratio_hi: 100.0,
            mu_threshold: 50.0,
        }
    }
}

impl DomainThresholds {
    fn consistent(&self) -> bool {
        self.ratio_lo > 0.0 && self.ratio_hi.is_finite() && self.ratio_lo < self.ratio_hi && self.mu_threshold > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub label: DomainLabel,
    pub ratio: f64,
    pub mu: f64,
    pub sigma2_over_mu: f64,
    pub delta: Option<f64>,
    pub thresholds: DomainThresholds,
}

pub fn classify_domain(p: &OccupancyParams, thresholds: DomainThresholds) -> Result<DomainReport> {
    let mu = mean(p)?;
    let s2 = variance(p)?;
    let ratio = p.load();
    let label = if !thresholds.consistent() {
        DomainLabel::Indeterminate
    } else if ratio < thresholds.ratio_lo {
        if mu < thresholds.mu_threshold {
            DomainLabel::LeftHand
        } else {
            DomainLabel::LeftIntermediate
        }
    } else if ratio > thresholds.ratio_hi {
        if mu < thresholds.mu_threshold {
            DomainLabel::RightHand
        } else {
            DomainLabel::RightIntermediate
        }
    } else {
        DomainLabel::Central
    };
    Ok(DomainReport {
        label,
        ratio,
        mu,
        sigma2_over_mu: if mu > 0.0 { s2 / mu } else { f64::NAN },
        delta: delta(p).ok(),
        thresholds,
    })
}

/// Linear estimator of the chance of a new species in an enlarged sample,
/// `sum_{d=1}^{n-n0} C(n-n0-1, d-1) / C(n, d) * Y^(d)`, summed exactly.
pub fn starr_estimator(counts: &BTreeMap<u64, u64>, n: u64, n0: u64) -> Result<f64> {
    if n0 < 1 || n <= n0 {
        return Err(OccupancyError::InvalidArgument(format!(
            "need n > n0 >= 1, got n={n}, n0={n0}"
        )));
    }
    let implied: u64 = counts.iter().map(|(occ, cnt)| occ * cnt).sum();
    if implied != n {
        return Err(OccupancyError::InconsistentCounts { implied, expected: n });
    }
    let extra = n - n0;
    let mut total = BigRational::zero();
    for (&occ, &cnt) in counts.range(1..=extra) {
        if cnt == 0 {
            continue;
        }
        let num = big_binomial(extra - 1, occ - 1) * cnt;
        total += ratio(num, big_binomial(n, occ));
    }
    Ok(total.to_f64().unwrap_or(f64::NAN))
}
