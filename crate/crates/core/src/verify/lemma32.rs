//! Structural facts about the mean and variance of the occupancy count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{mean, varphi, varphi_prime, variance};
use crate::params::OccupancyParams;
use crate::stats::relative_drift;

use super::conditions::STABILITY_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Ranges {
    /// Fixed-`n` vanishing of the variance as `m` doubles.
    pub vanish_d: Vec<u64>,
    pub vanish_n: Vec<u64>,
    /// Largest doubling exponent: `m` runs over `2, 4, ..., 2^max_log2_m`.
    pub max_log2_m: u32,
    /// Boundedness ratios on `n, m <= size` and `n, m <= 2 size`.
    pub ratio_d: Vec<u64>,
    pub ratio_size: u64,
    /// Infimum of `varphi_d`.
    pub phi_d: Vec<u64>,
    /// Threshold scan.
    pub scan_d: Vec<u64>,
    pub r1_values: Vec<f64>,
    pub epsilon: f64,
    pub scan_max_m: u64,
}

impl Default for Lemma32Ranges {
    fn default() -> Self {
        Self {
            vanish_d: vec![2, 3, 4],
            vanish_n: vec![10, 20, 50],
            max_log2_m: 30,
            ratio_d: vec![2, 3, 4],
            ratio_size: 250,
            phi_d: (2..=10).collect(),
            scan_d: vec![2],
            r1_values: vec![10.0, 100.0, 1000.0],
            epsilon: 0.25,
            scan_max_m: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub d: u64,
    pub n: u64,
    /// Doubling point from which the variance strictly decreases.
    pub m0: Option<u64>,
    pub max_sigma2: f64,
    pub last_m: u64,
    pub last_sigma2: f64,
    /// Largest doubling point with `sigma^2 >= 1`; the set of such `m` is finite.
    pub last_m_above_one: Option<u64>,
    pub pass: bool,
}

pub fn check_vanishing(d: u64, n: u64, max_log2_m: u32) -> Result<VanishingReport> {
    let ms: Vec<u64> = (1..=max_log2_m).map(|e| 1u64 << e).collect();
    let s2: Vec<f64> = ms.iter().map(|&m| variance(&OccupancyParams::new(n, m, d))).collect::<Result<_>>()?;
    let mut start = s2.len() - 1;
    while start > 0 && s2[start] < s2[start - 1] {
        start -= 1;
    }
    let max_sigma2 = s2.iter().cloned().fold(0.0, f64::max);
    let last_sigma2 = *s2.last().expect("nonempty");
    let m0 = (start + 2 < s2.len()).then(|| ms[start]);
    let last_m_above_one = ms.iter().zip(&s2).filter(|(_, &v)| v >= 1.0).map(|(&m, _)| m).next_back();
    Ok(VanishingReport {
        d,
        n,
        m0,
        max_sigma2,
        last_m: *ms.last().expect("nonempty"),
        last_sigma2,
        last_m_above_one,
        pass: m0.is_some() && last_sigma2 < 1e-6 * max_sigma2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSups {
    pub sigma2_over_mu: f64,
    pub mu_over_n: f64,
    pub sigma2_over_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub d: u64,
    pub size: u64,
    pub small: RatioSups,
    pub large: RatioSups,
    pub max_drift: f64,
    pub pass: bool,
}

fn ratio_sups(d: u64, size: u64) -> Result<RatioSups> {
    let rows: Vec<RatioSups> = (d.max(1)..=size)
        .into_par_iter()
        .map(|n| -> Result<RatioSups> {
            let mut s = RatioSups { sigma2_over_mu: 0.0, mu_over_n: 0.0, sigma2_over_n: 0.0 };
            for m in 2..=size {
                let p = OccupancyParams::new(n, m, d);
                let mu = mean(&p)?;
                let s2 = variance(&p)?;
                if mu > 0.0 {
                    s.sigma2_over_mu = s.sigma2_over_mu.max(s2 / mu);
                }
                s.mu_over_n = s.mu_over_n.max(mu / n as f64);
                s.sigma2_over_n = s.sigma2_over_n.max(s2 / n as f64);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(RatioSups { sigma2_over_mu: 0.0, mu_over_n: 0.0, sigma2_over_n: 0.0 }, |a, b| RatioSups {
        sigma2_over_mu: a.sigma2_over_mu.max(b.sigma2_over_mu),
        mu_over_n: a.mu_over_n.max(b.mu_over_n),
        sigma2_over_n: a.sigma2_over_n.max(b.sigma2_over_n),
    }))
}

pub fn check_boundedness(d: u64, size: u64) -> Result<BoundednessReport> {
    let small = ratio_sups(d, size)?;
    let large = ratio_sups(d, 2 * size)?;
    let max_drift = [
        relative_drift(small.sigma2_over_mu, large.sigma2_over_mu),
        relative_drift(small.mu_over_n, large.mu_over_n),
        relative_drift(small.sigma2_over_n, large.sigma2_over_n),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let finite = [&small, &large]
        .iter()
        .all(|s| s.sigma2_over_mu.is_finite() && s.mu_over_n.is_finite() && s.sigma2_over_n.is_finite());
    Ok(BoundednessReport { d, size, small, large, max_drift, pass: finite && max_drift < STABILITY_TOLERANCE })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiInfimumReport {
    pub d: u64,
    /// Minimizer located by grid search refined by golden-section search.
    pub argmin: f64,
    pub min: f64,
    /// `min(varphi_d(d - sqrt d), varphi_d(d + sqrt d))`.
    pub predicted_min: f64,
    pub predicted_argmin: f64,
    /// Sign changes of the factored derivative at `d - sqrt d`, `d`, `d + sqrt d`.
    pub sign_changes: [bool; 3],
    /// Largest disagreement between the factored derivative and a central difference.
    pub derivative_mismatch: f64,
    pub pass: bool,
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > 1e-12 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    0.5 * (a + b)
}

pub fn check_phi_infimum(d: u64) -> Result<PhiInfimumReport> {
    let df = d as f64;
    let phi = |x: f64| varphi(d, x).expect("x > 0");
    let h = 1e-3;
    let top = 4.0 * df + 10.0;
    let steps = (top / h) as usize;
    let (mut best_x, mut best) = (h, f64::INFINITY);
    for i in 1..=steps {
        let x = i as f64 * h;
        let v = phi(x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    let argmin = golden_min(phi, (best_x - h).max(1e-9), best_x + h);
    let min = phi(argmin).min(best);
    let s = df.sqrt();
    let (lo, hi) = (phi(df - s), phi(df + s));
    let (predicted_min, predicted_argmin) = if lo <= hi { (lo, df - s) } else { (hi, df + s) };

    let eps = 1e-6;
    let sign = |x: f64| varphi_prime(d, x).expect("x > 0").signum();
    let sign_changes = [df - s, df, df + s].map(|r| sign(r - eps) * sign(r + eps) < 0.0);

    let mut derivative_mismatch = 0.0f64;
    let fd_h = 1e-5;
    let mut x = 0.01;
    while x <= 4.0 * df {
        let fd = (phi(x + fd_h) - phi(x - fd_h)) / (2.0 * fd_h);
        let exact = varphi_prime(d, x)?;
        let excess = (fd - exact).abs() - (1e-6 * exact.abs() + 1e-9);
        derivative_mismatch = derivative_mismatch.max(excess.max(0.0));
        x += 0.01;
    }
    let pass = (min - predicted_min).abs() <= 1e-9 && predicted_min > 0.0 && sign_changes.iter().all(|&b| b) && derivative_mismatch == 0.0;
    Ok(PhiInfimumReport { d, argmin, min, predicted_min, predicted_argmin, sign_changes, derivative_mismatch, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScanReport {
    pub d: u64,
    pub r1: f64,
    pub epsilon: f64,
    pub max_m: u64,
    pub points_above: u64,
    /// Points with `sigma^2 >= r1` and `n/m > (1 + epsilon) log m`.
    pub violations: u64,
    pub witness: Option<(u64, u64)>,
    /// `sup mu / sigma^2` over points with `sigma^2 >= r1`, on `m <= max_m / 10` and `m <= max_m`.
    pub mu_over_sigma2_small: f64,
    pub mu_over_sigma2: f64,
    pub drift: f64,
    pub pass: bool,
}

fn scan_m_values(max_m: u64) -> Vec<u64> {
    let mut ms: Vec<u64> = (3..=max_m.min(1000)).collect();
    let mut x = 1000.0f64;
    while x < max_m as f64 {
        x *= 1.01;
        ms.push((x.round() as u64).min(max_m));
    }
    ms.dedup();
    ms
}

struct ScanPoint {
    m: u64,
    n: u64,
    s2: f64,
    mu: f64,
}

fn scan_points(d: u64, m: u64, epsilon: f64) -> Result<Vec<ScanPoint>> {
    let lm = (m as f64).ln();
    let n_max = (m as f64 * (2.0 * lm + 4.0 * d as f64 + 10.0)) as u64;
    let edge = (m as f64 * (1.0 + epsilon) * lm).floor() as u64;
    let mut ns: Vec<u64> = Vec::new();
    let mut x = d.max(1) as f64;
    while (x as u64) <= n_max {
        ns.push(x.ceil() as u64);
        x = (x * 1.01).max(x + 1.0);
    }
    ns.extend([edge, edge + 1, edge + 2]);
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .filter(|&n| n >= d)
        .map(|n| {
            let p = OccupancyParams::new(n, m, d);
            Ok(ScanPoint { m, n, s2: variance(&p)?, mu: mean(&p)? })
        })
        .collect()
}

pub fn check_threshold_scan(d: u64, r1_values: &[f64], epsilon: f64, max_m: u64) -> Result<Vec<ThresholdScanReport>> {
    let per_m: Vec<Vec<ScanPoint>> = scan_m_values(max_m).into_par_iter().map(|m| scan_points(d, m, epsilon)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &r1 in r1_values {
        let mut rep = ThresholdScanReport {
            d,
            r1,
            epsilon,
            max_m,
            points_above: 0,
            violations: 0,
            witness: None,
            mu_over_sigma2_small: 0.0,
            mu_over_sigma2: 0.0,
            drift: 0.0,
            pass: false,
        };
        for pt in per_m.iter().flatten().filter(|p| p.s2 >= r1) {
            rep.points_above += 1;
            if pt.n as f64 / pt.m as f64 > (1.0 + epsilon) * (pt.m as f64).ln() {
                rep.violations += 1;
                rep.witness.get_or_insert((pt.n, pt.m));
            }
            let ratio = pt.mu / pt.s2;
            rep.mu_over_sigma2 = rep.mu_over_sigma2.max(ratio);
            if pt.m * 10 <= max_m {
                rep.mu_over_sigma2_small = rep.mu_over_sigma2_small.max(ratio);
            }
        }
        rep.drift = relative_drift(rep.mu_over_sigma2_small, rep.mu_over_sigma2);
        rep.pass = rep.violations == 0 && rep.points_above > 0 && rep.mu_over_sigma2.is_finite() && rep.drift < STABILITY_TOLERANCE;
        out.push(rep);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Report {
    pub vanishing: Vec<VanishingReport>,
    pub boundedness: Vec<BoundednessReport>,
    pub phi_infimum: Vec<PhiInfimumReport>,
    pub threshold_scan: Vec<ThresholdScanReport>,
    pub pass: bool,
}

pub fn check_lemma32(r: &Lemma32Ranges) -> Result<Lemma32Report> {
    let mut vanishing = Vec::new();
    for &d in &r.vanish_d {
        for &n in &r.vanish_n {
            if n >= d {
                vanishing.push(check_vanishing(d, n, r.max_log2_m)?);
            }
        }
    }
    let boundedness = r.ratio_d.iter().map(|&d| check_boundedness(d, r.ratio_size)).collect::<Result<Vec<_>>>()?;
    let phi_infimum = r.phi_d.iter().map(|&d| check_phi_infimum(d)).collect::<Result<Vec<_>>>()?;
    let mut threshold_scan = Vec::new();
    for &d in &r.scan_d {
        threshold_scan.extend(check_threshold_scan(d, &r.r1_values, r.epsilon, r.scan_max_m)?);
    }
    let pass = vanishing.iter().all(|v| v.pass)
        && boundedness.iter().all(|b| b.pass)
        && phi_infimum.iter().all(|p| p.pass)
        && threshold_scan.iter().all(|t| t.pass);
    Ok(Lemma32Report { vanishing, boundedness, phi_infimum, threshold_scan, pass })
}
