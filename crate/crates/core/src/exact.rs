//! Exact law of the occupancy count by dynamic programming over urns.
//!
//! Let `A(N, j)` be the number of ways to place `N` labeled balls in `j`
//! labeled urns with no urn holding exactly `d`. Peeling off one urn at a time,
//!
//! ```text
//! A(N, j) = sum_{o != d} C(N, o) A(N - o, j - 1),   A(0, 0) = 1.
//! ```
//!
//! Choosing which `k` urns hold `d` balls and which balls they get, the number
//! of assignments with exactly `k` such urns is
//! `C(m, k) * n! / (d!^k (n - kd)!) * A(n - kd, m - k)`.
//! Rational mode runs this recursion on big integers. Float mode runs the same
//! recursion on `P0(N, j) = A(N, j) / j^N`, whose transitions are binomial
//! probabilities, and assembles the answer in log space.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{OccupancyError, Result};
use crate::model::max_count;
use crate::params::OccupancyParams;
use crate::special::{big_binomial, big_binomial_rows, big_factorial, big_falling, ln_binomial, ln_factorial, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfMode {
    Exact,
    Float,
}

impl std::fmt::Display for PmfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PmfMode::Exact => "exact",
            PmfMode::Float => "float",
        })
    }
}

/// Size limits for the big-integer recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalBudget {
    pub max_n: u64,
    pub max_m: u64,
}

impl Default for RationalBudget {
    fn default() -> Self {
        Self { max_n: 150, max_m: 150 }
    }
}

impl RationalBudget {
    pub fn admits(&self, p: &OccupancyParams) -> bool {
        p.n <= self.max_n && p.m <= self.max_m
    }
}

/// Point masses indexed by `k = 0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Probabilities {
    /// `P(k) = weights[k] / total`.
    Exact { weights: Vec<BigUint>, total: BigUint },
    Float(Vec<f64>),
}

impl Probabilities {
    pub fn len(&self) -> usize {
        match self {
            Probabilities::Exact { weights, .. } => weights.len(),
            Probabilities::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> PmfMode {
        match self {
            Probabilities::Exact { .. } => PmfMode::Exact,
            Probabilities::Float(_) => PmfMode::Float,
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        match self {
            Probabilities::Exact { weights, total } => ratio_f64(&weights[k], total),
            Probabilities::Float(v) => v[k],
        }
    }

    pub fn get_exact(&self, k: usize) -> Option<BigRational> {
        match self {
            Probabilities::Exact { weights, total } => Some(big_ratio(weights[k].clone(), total.clone())),
            Probabilities::Float(_) => None,
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.get(k)).collect()
    }

    pub fn is_positive(&self, k: usize) -> bool {
        match self {
            Probabilities::Exact { weights, .. } => !weights[k].is_zero(),
            Probabilities::Float(v) => v[k] > 0.0,
        }
    }
}

fn big_ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    big_ratio(num.clone(), den.clone()).to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    pub params: OccupancyParams,
    pub probs: Probabilities,
}

pub fn exact_pmf(params: &OccupancyParams, mode: PmfMode, budget: RationalBudget) -> Result<ExactPmf> {
    if params.m == 0 {
        return Err(OccupancyError::Domain {
            n: params.n,
            m: params.m,
            d: params.d,
            reason: "need m >= 1",
        });
    }
    let probs = match mode {
        PmfMode::Exact => {
            if !budget.admits(params) {
                return Err(OccupancyError::BudgetExceeded {
                    n: params.n,
                    m: params.m,
                    max_n: budget.max_n,
                    max_m: budget.max_m,
                });
            }
            rational_weights(params)
        }
        PmfMode::Float => float_probs(params),
    };
    Ok(ExactPmf { params: *params, probs })
}

fn kmax(p: &OccupancyParams) -> u64 {
    if p.d > p.n {
        0
    } else {
        max_count(p)
    }
}

fn rational_weights(p: &OccupancyParams) -> Probabilities {
    let (n, m, d) = (p.n as usize, p.m as usize, p.d as usize);
    let kmax = kmax(p) as usize;
    let choose = big_binomial_rows(n);
    // avoid[N] = A(N, j) for the current j; keep the rows j = m - kmax ..= m.
    let mut avoid = vec![BigUint::zero(); n + 1];
    avoid[0] = BigUint::from(1u8);
    let mut kept: Vec<Vec<BigUint>> = vec![Vec::new(); kmax + 1];
    if m <= kmax {
        kept[m] = avoid.clone();
    }
    for j in 1..=m {
        let mut next = vec![BigUint::zero(); n + 1];
        for (big_n, slot) in next.iter_mut().enumerate() {
            let mut acc = BigUint::zero();
            for o in 0..=big_n {
                if o == d || avoid[big_n - o].is_zero() {
                    continue;
                }
                acc += &choose[big_n][o] * &avoid[big_n - o];
            }
            *slot = acc;
        }
        avoid = next;
        if m - j <= kmax {
            kept[m - j] = avoid.clone();
        }
    }
    let d_fact = big_factorial(d as u64);
    let mut weights = vec![BigUint::zero(); m + 1];
    for k in 0..=kmax {
        let rest = n - k * d;
        let a = &kept[k][rest];
        if a.is_zero() {
            continue;
        }
        let placements = big_falling(n as u64, (k * d) as u64) / d_fact.pow(k as u32);
        weights[k] = big_binomial(m as u64, k as u64) * placements * a;
    }
    Probabilities::Exact {
        weights,
        total: BigUint::from(p.m).pow(p.n as u32),
    }
}

fn float_probs(p: &OccupancyParams) -> Probabilities {
    let (n, m, d) = (p.n as usize, p.m as usize, p.d as usize);
    let kmax = kmax(p) as usize;
    let lf: Vec<f64> = (0..=n as u64).map(ln_factorial).collect();
    // none[N] = P(no urn of j holds exactly d | N balls over j urns).
    let mut none = vec![0.0f64; n + 1];
    none[0] = 1.0;
    let mut kept: Vec<Vec<f64>> = vec![Vec::new(); kmax + 1];
    if m <= kmax {
        kept[m] = none.clone();
    }
    for j in 1..=m {
        let lp = -(j as f64).ln();
        let lq = if j == 1 { f64::NEG_INFINITY } else { (-1.0 / j as f64).ln_1p() };
        let mut next = vec![0.0f64; n + 1];
        for (big_n, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for o in 0..=big_n {
                let rest = big_n - o;
                if o == d || none[rest] == 0.0 {
                    continue;
                }
                let lw = if rest == 0 {
                    o as f64 * lp
                } else {
                    lf[big_n] - lf[o] - lf[rest] + o as f64 * lp + rest as f64 * lq
                };
                acc += lw.exp() * none[rest];
            }
            *slot = acc;
        }
        none = next;
        if m - j <= kmax {
            kept[m - j] = none.clone();
        }
    }
    let mut probs = vec![0.0f64; m + 1];
    let ln_d_fact = ln_factorial(d as u64);
    let ln_m = (m as f64).ln();
    for k in 0..=kmax {
        let rest = n - k * d;
        let free = m - k;
        let p0 = kept[k][rest];
        if p0 <= 0.0 {
            continue;
        }
        let spread = if free == 0 { 0.0 } else { rest as f64 * (free as f64).ln() };
        let lw = ln_binomial(m as u64, k as u64) + lf[n] - k as f64 * ln_d_fact - lf[rest] - n as f64 * ln_m
            + spread
            + p0.ln();
        probs[k] = lw.exp();
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|x| *x /= s);
    Probabilities::Float(probs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PmfMoments {
    Rational { mean: BigRational, variance: BigRational },
    Float { mean: f64, variance: f64 },
}

impl PmfMoments {
    pub fn mean(&self) -> f64 {
        match self {
            PmfMoments::Rational { mean, .. } => mean.to_f64().unwrap_or(f64::NAN),
            PmfMoments::Float { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            PmfMoments::Rational { variance, .. } => variance.to_f64().unwrap_or(f64::NAN),
            PmfMoments::Float { variance, .. } => *variance,
        }
    }
}

pub fn exact_moments(pmf: &ExactPmf) -> PmfMoments {
    match &pmf.probs {
        Probabilities::Exact { weights, total } => {
            let mut s1 = BigUint::zero();
            let mut s2 = BigUint::zero();
            for (k, w) in weights.iter().enumerate() {
                let kw = w * k;
                s2 += &kw * k;
                s1 += kw;
            }
            let mean = big_ratio(s1, total.clone());
            let second = big_ratio(s2, total.clone());
            let variance = second - &mean * &mean;
            PmfMoments::Rational { mean, variance }
        }
        Probabilities::Float(v) => {
            let mean: f64 = v.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            let variance: f64 = v.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum();
            PmfMoments::Float { mean, variance }
        }
    }
}

/// Law of the size-biased count, `k P(Y = k) / E Y`.
pub fn size_biased_pmf(pmf: &ExactPmf) -> Result<Probabilities> {
    match &pmf.probs {
        Probabilities::Exact { weights, .. } => {
            let biased: Vec<BigUint> = weights.iter().enumerate().map(|(k, w)| w * k).collect();
            let total: BigUint = biased.iter().sum();
            if total.is_zero() {
                return Err(OccupancyError::ZeroMean);
            }
            Ok(Probabilities::Exact { weights: biased, total })
        }
        Probabilities::Float(v) => {
            let mean: f64 = v.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            if mean <= 0.0 {
                return Err(OccupancyError::ZeroMean);
            }
            Ok(Probabilities::Float(v.iter().enumerate().map(|(k, p)| k as f64 * p / mean).collect()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KolmogorovSide {
    /// `F(k-) = P(Y < k)`.
    LeftLimit,
    /// `F(k) = P(Y <= k)`.
    RightLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovReport {
    pub d_k: f64,
    pub arg_atom: u64,
    pub side: KolmogorovSide,
    /// `0.087 / max(3, sigma)`, valid for any integer-valued variable.
    pub lower_bound: f64,
    pub mu: f64,
    pub sigma: f64,
}

pub fn lattice_lower_bound(sigma: f64) -> f64 {
    0.087 / sigma.max(3.0)
}

/// Kolmogorov distance between the standardized count and the standard normal.
///
/// Between atoms the distribution function is flat while the normal one
/// increases, so the supremum is attained at an atom from one side.
pub fn kolmogorov_distance(pmf: &ExactPmf) -> Result<KolmogorovReport> {
    let moments = exact_moments(pmf);
    let (mu, var) = (moments.mean(), moments.variance());
    if var.is_nan() || var <= 0.0 {
        return Err(OccupancyError::ZeroVariance);
    }
    let sigma = var.sqrt();
    let cdf = cumulative(&pmf.probs);
    let mut best = (f64::NEG_INFINITY, 0u64, KolmogorovSide::LeftLimit);
    for (k, &(below, upto)) in cdf.iter().enumerate() {
        if !pmf.probs.is_positive(k) {
            continue;
        }
        let phi = normal_cdf((k as f64 - mu) / sigma);
        for (side, f) in [(KolmogorovSide::LeftLimit, below), (KolmogorovSide::RightLimit, upto)] {
            let gap = (f - phi).abs();
            if gap > best.0 {
                best = (gap, k as u64, side);
            }
        }
    }
    Ok(KolmogorovReport {
        d_k: best.0,
        arg_atom: best.1,
        side: best.2,
        lower_bound: lattice_lower_bound(sigma),
        mu,
        sigma,
    })
}

/// `(P(Y < k), P(Y <= k))` for each `k`.
fn cumulative(probs: &Probabilities) -> Vec<(f64, f64)> {
    match probs {
        Probabilities::Exact { weights, total } => {
            let mut acc = BigUint::zero();
            weights
                .iter()
                .map(|w| {
                    let below = ratio_f64(&acc, total);
                    acc += w;
                    (below, ratio_f64(&acc, total))
                })
                .collect()
        }
        Probabilities::Float(v) => {
            let mut acc = 0.0;
            v.iter()
                .map(|p| {
                    let below = acc;
                    acc += p;
                    (below, acc.min(1.0))
                })
                .collect()
        }
    }
}

pub const PMF_CSV_VERSION: &str = "# occupancy-pmf v1";

impl ExactPmf {
    pub fn mode(&self) -> PmfMode {
        self.probs.mode()
    }

    /// CSV with one row per atom of positive probability: `k,probability_numerator,probability_denominator`
    /// (reduced fractions) in exact mode and `k,probability` in float mode.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut out = out;
        writeln!(
            out,
            "{PMF_CSV_VERSION} n={} m={} d={} mode={}",
            self.params.n,
            self.params.m,
            self.params.d,
            self.mode()
        )?;
        let mut w = csv::Writer::from_writer(out);
        match &self.probs {
            Probabilities::Exact { .. } => {
                w.write_record(["k", "probability_numerator", "probability_denominator"])?;
                for k in (0..self.probs.len()).filter(|&k| self.probs.is_positive(k)) {
                    let q = self.probs.get_exact(k).expect("exact mode");
                    w.write_record([k.to_string(), q.numer().to_string(), q.denom().to_string()])?;
                }
            }
            Probabilities::Float(v) => {
                w.write_record(["k", "probability"])?;
                for (k, p) in v.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                    w.write_record([k.to_string(), format!("{p:e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let atoms: Vec<serde_json::Value> = (0..self.probs.len())
            .filter(|&k| self.probs.is_positive(k))
            .map(|k| match self.probs.get_exact(k) {
                Some(q) => json!({
                    "k": k,
                    "numerator": q.numer().to_string(),
                    "denominator": q.denom().to_string(),
                    "probability": self.probs.get(k),
                }),
                None => json!({ "k": k, "probability": self.probs.get(k) }),
            })
            .collect();
        json!({
            "n": self.params.n,
            "m": self.params.m,
            "d": self.params.d,
            "mode": self.mode(),
            "atoms": atoms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;

    fn q(num: u64, den: u64) -> BigRational {
        big_ratio(num.into(), den.into())
    }

    fn pmf(n: u64, m: u64, d: u64, mode: PmfMode) -> ExactPmf {
        exact_pmf(&OccupancyParams::new(n, m, d), mode, RationalBudget::default()).unwrap()
    }

    #[test]
    fn small_laws() {
        let p = pmf(3, 3, 2, PmfMode::Exact);
        assert_eq!(p.probs.get_exact(1), Some(q(2, 3)));
        assert_eq!(p.probs.get_exact(0), Some(q(1, 3)));
        let p = pmf(4, 2, 2, PmfMode::Exact);
        assert_eq!(p.probs.get_exact(2), Some(q(3, 8)));
        assert_eq!(p.probs.get_exact(0), Some(q(5, 8)));
        assert_eq!(p.probs.get_exact(1), Some(q(0, 1)));
        let p = pmf(0, 3, 0, PmfMode::Exact);
        assert_eq!(p.probs.get_exact(3), Some(q(1, 1)));
        let p = pmf(0, 3, 0, PmfMode::Float);
        assert_eq!(p.probs.get(3), 1.0);
    }

    #[test]
    fn moments_of_small_laws() {
        let m = exact_moments(&pmf(2, 2, 2, PmfMode::Exact));
        assert_eq!(m, PmfMoments::Rational { mean: q(1, 2), variance: q(1, 4) });
        let m = exact_moments(&pmf(4, 2, 2, PmfMode::Exact));
        assert_eq!(m, PmfMoments::Rational { mean: q(3, 4), variance: q(15, 16) });
        let m = exact_moments(&pmf(2, 5, 2, PmfMode::Exact));
        assert!(matches!(m, PmfMoments::Rational { ref mean, .. } if *mean == q(1, 5)));
    }

    #[test]
    fn rational_budget_is_enforced() {
        let err = exact_pmf(&OccupancyParams::new(151, 10, 2), PmfMode::Exact, RationalBudget::default());
        assert!(matches!(err, Err(OccupancyError::BudgetExceeded { .. })));
        assert!(exact_pmf(&OccupancyParams::new(151, 10, 2), PmfMode::Float, RationalBudget::default()).is_ok());
        assert!(exact_pmf(&OccupancyParams::new(1, 0, 0), PmfMode::Float, RationalBudget::default()).is_err());
    }

    #[test]
    fn float_mode_tracks_rational_mode() {
        for &(n, m, d) in &[(10, 5, 2), (60, 30, 2), (100, 40, 3), (7, 7, 0), (20, 9, 1), (120, 150, 2)] {
            let a = pmf(n, m, d, PmfMode::Exact);
            let b = pmf(n, m, d, PmfMode::Float);
            let s: f64 = b.probs.to_f64_vec().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for k in 0..=m as usize {
                let (x, y) = (a.probs.get(k), b.probs.get(k));
                assert!((x - y).abs() <= 1e-11 * x.max(1e-300) + 1e-300, "({n},{m},{d}) k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn support_is_capped_by_available_balls() {
        let p = pmf(9, 10, 2, PmfMode::Exact);
        for k in 5..=10 {
            assert!(!p.probs.is_positive(k));
        }
        // d beyond n: the count is identically zero.
        let p = pmf(3, 4, 5, PmfMode::Exact);
        assert_eq!(p.probs.get_exact(0), Some(q(1, 1)));
    }

    #[test]
    fn exact_moments_match_closed_forms() {
        for d in 0..=3u64 {
            for n in d..=40 {
                for m in 2..=12u64 {
                    let prm = OccupancyParams::new(n, m, d);
                    let mom = exact_moments(&pmf(n, m, d, PmfMode::Exact));
                    let PmfMoments::Rational { mean, variance } = mom else { unreachable!() };
                    assert_eq!(mean, model::mean_exact(&prm).unwrap(), "{prm}");
                    assert_eq!(variance, model::variance_exact(&prm).unwrap(), "{prm}");
                }
            }
        }
    }

    #[test]
    fn size_bias_examples() {
        let sb = size_biased_pmf(&pmf(4, 2, 2, PmfMode::Exact)).unwrap();
        assert_eq!(sb.get_exact(2), Some(q(1, 1)));
        let sb = size_biased_pmf(&pmf(3, 3, 2, PmfMode::Exact)).unwrap();
        assert_eq!(sb.get_exact(1), Some(q(1, 1)));
        // Constant count: all urns empty.
        let sb = size_biased_pmf(&pmf(0, 4, 0, PmfMode::Exact)).unwrap();
        assert_eq!(sb.get_exact(4), Some(q(1, 1)));
        assert_eq!(size_biased_pmf(&pmf(3, 4, 5, PmfMode::Exact)), Err(OccupancyError::ZeroMean));
    }

    #[test]
    fn size_bias_mean_is_second_moment_over_first() {
        let base = pmf(12, 5, 2, PmfMode::Exact);
        let sb = size_biased_pmf(&base).unwrap();
        let Probabilities::Exact { weights, total } = &sb else { unreachable!() };
        let mean_sb = big_ratio(weights.iter().enumerate().map(|(k, w)| w * k).sum(), total.clone());
        let PmfMoments::Rational { mean, variance } = exact_moments(&base) else { unreachable!() };
        let second = variance + &mean * &mean;
        assert_eq!(mean_sb, second / mean);
        assert_eq!(weights.iter().sum::<BigUint>(), *total);
    }

    #[test]
    fn kolmogorov_two_atom_case() {
        let rep = kolmogorov_distance(&pmf(4, 2, 2, PmfMode::Exact)).unwrap();
        let w0 = -0.75 / 0.9375f64.sqrt();
        let want = 0.625 - normal_cdf(w0);
        assert!((rep.d_k - want).abs() < 1e-14);
        assert!((rep.d_k - 0.4057).abs() < 1e-3);
        assert_eq!(rep.arg_atom, 0);
        assert_eq!(rep.side, KolmogorovSide::RightLimit);
        assert!((rep.lower_bound - 0.029).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_rejects_degenerate() {
        let err = kolmogorov_distance(&pmf(0, 3, 0, PmfMode::Exact));
        assert_eq!(err, Err(OccupancyError::ZeroVariance));
    }

    #[test]
    fn csv_export_shapes() {
        let mut buf = Vec::new();
        pmf(0, 3, 0, PmfMode::Exact).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with(PMF_CSV_VERSION));
        assert_eq!(lines[1], "k,probability_numerator,probability_denominator");
        assert_eq!(&lines[2..], ["3,1,1"]);

        let mut buf = Vec::new();
        pmf(4, 2, 2, PmfMode::Float).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("k,probability"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn json_export_carries_fractions() {
        let v = pmf(4, 2, 2, PmfMode::Exact).to_json();
        assert_eq!(v["mode"], "exact");
        assert_eq!(v["atoms"][1]["numerator"], "3");
        assert_eq!(v["atoms"][1]["denominator"], "8");
    }
}
