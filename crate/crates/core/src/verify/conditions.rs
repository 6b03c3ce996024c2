//! Sufficient conditions for the normal approximation bound, evaluated pointwise on grids.
//!
//! A supremum over an infinite parameter set cannot be computed; "bounded" is
//! read as finite on the grid and stable when the grid is refined.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::estimate_psi;
use crate::error::Result;
use crate::model::{mean, rate_from_sigma, variance};
use crate::params::OccupancyParams;
use crate::special::binomial_pmf;
use crate::stats::relative_drift;

use super::grid::Grid;

/// Largest relative change of a supremum under refinement that still counts as stable.
pub const STABILITY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub samples: u64,
    pub seed: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        Self { samples: 20_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub n: u64,
    pub m: u64,
    pub d: u64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// A second normalization of the same point, where the report defines one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<f64>,
}

impl PointValue {
    fn exact(p: &OccupancyParams, value: f64) -> Self {
        Self { n: p.n, m: p.m, d: p.d, value, std_error: None, aux: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: u8,
    pub quantity: String,
    pub points: Vec<PointValue>,
    pub sup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_std_error: Option<f64>,
    pub refined_sup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_sup_std_error: Option<f64>,
    pub drift: f64,
    pub pass: bool,
    pub note: String,
}

fn sup_of(points: &[PointValue]) -> (f64, Option<f64>) {
    let mut best: Option<&PointValue> = None;
    for p in points {
        if best.is_none_or(|b| p.value > b.value || p.value.is_nan()) {
            best = Some(p);
        }
    }
    match best {
        Some(p) => (p.value, p.std_error),
        None => (f64::NAN, None),
    }
}

fn report(condition: u8, quantity: &str, coarse: Vec<PointValue>, fine: &[PointValue], note: &str) -> ConditionReport {
    let (sup, se) = sup_of(&coarse);
    let (refined_sup, refined_se) = sup_of(fine);
    let drift = relative_drift(sup, refined_sup);
    let noise = match (se, refined_se) {
        (Some(a), Some(b)) => 3.0 * (a * a + b * b).sqrt(),
        _ => 0.0,
    };
    let finite = sup.is_finite() && refined_sup.is_finite();
    let stable = drift < STABILITY_TOLERANCE || (refined_sup - sup).abs() <= noise;
    ConditionReport {
        condition,
        quantity: quantity.to_string(),
        points: coarse,
        sup,
        sup_std_error: se,
        refined_sup,
        refined_sup_std_error: refined_se,
        drift,
        pass: finite && stable,
        note: note.to_string(),
    }
}

fn eval_grid<F>(grid: &Grid, f: F) -> Result<Vec<PointValue>>
where
    F: Fn(&OccupancyParams) -> Result<PointValue> + Sync + Send,
{
    grid.points().par_iter().map(f).collect()
}

/// Moments `E[K^q]`, `E[L^q]` and `P(L > s)`-weighted `E[K^2 1{L > s}]` under
/// `L ~ Binomial(n, 1/m)`, `K = 1 + |d - L|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnMoments {
    pub k1: f64,
    pub k2: f64,
    pub k4: f64,
    pub l2: f64,
    pub s: u64,
    /// `E[K^2 1{L > s}]`.
    pub k2_tail: f64,
}

pub fn urn_moments(p: &OccupancyParams) -> UrnMoments {
    let pmf = binomial_pmf(p.n, 1.0 / p.m as f64);
    let s = (p.n as f64).sqrt().ceil() as u64;
    let mut out = UrnMoments { k1: 0.0, k2: 0.0, k4: 0.0, l2: 0.0, s, k2_tail: 0.0 };
    for (l, w) in pmf.iter().enumerate() {
        let k = (1 + (l as u64).abs_diff(p.d)) as f64;
        out.k1 += w * k;
        out.k2 += w * k * k;
        out.k4 += w * k.powi(4);
        out.l2 += w * (l * l) as f64;
        if l as u64 > s {
            out.k2_tail += w * k * k;
        }
    }
    out
}

struct Moments {
    mu: f64,
    s2: f64,
    r: f64,
}

fn moments(p: &OccupancyParams) -> Result<Moments> {
    let mu = mean(p)?;
    let s2 = variance(p)?;
    Ok(Moments { mu, s2, r: rate_from_sigma(p, s2.sqrt()) })
}

/// `r mu Psi / sigma^2` with `Psi` estimated through the configuration-level majorant.
///
/// `aux` holds `Psi sqrt(n) / (1 + (n/m)^3)`.
pub fn check_condition1(grid: &Grid, budget: &McBudget) -> Result<ConditionReport> {
    let eval = |p: &OccupancyParams| -> Result<PointValue> {
        let mo = moments(p)?;
        let psi = estimate_psi(p, budget.samples, budget.seed)?;
        let scale = mo.r * mo.mu / mo.s2;
        let load3 = 1.0 + p.load().powi(3);
        Ok(PointValue {
            n: p.n,
            m: p.m,
            d: p.d,
            value: scale * psi.psi_hat,
            std_error: Some(scale * psi.std_error),
            aux: Some(psi.psi_hat * (p.n as f64).sqrt() / load3),
        })
    };
    let coarse = eval_grid(grid, eval)?;
    let fine = eval_grid(&grid.refine(), eval)?;
    Ok(report(
        1,
        "r*mu*psi/sigma^2",
        coarse,
        &fine,
        "psi estimated by the standard deviation of E[Ys-Y|M], which dominates the Y-conditioned version",
    ))
}

/// Conditions 2, 3 and 5 in their moment forms, computed from the binomial law of `L`.
///
/// * 2: `r mu sqrt(E K^4) / sigma^3`.
/// * 3: `r^2 mu sqrt(E K^4) sqrt(E L^2) / (sigma^3 s)`; `aux` is the direct form
///   `r^2 mu E[K^2 1{L > s}] / sigma^3`, which it dominates.
/// * 5: `r^2 mu E K^2 / sigma^4` (with `B = 1`).
pub fn check_condition2_3_5(grid: &Grid) -> Result<Vec<ConditionReport>> {
    let eval = |p: &OccupancyParams| -> Result<[PointValue; 3]> {
        let mo = moments(p)?;
        let um = urn_moments(p);
        let s3 = mo.s2 * mo.s2.sqrt();
        let c2 = mo.r * mo.mu * um.k4.sqrt() / s3;
        let c3 = mo.r * mo.r * mo.mu * um.k4.sqrt() * um.l2.sqrt() / (s3 * um.s as f64);
        let c3_direct = mo.r * mo.r * mo.mu * um.k2_tail / s3;
        let c5 = mo.r * mo.r * mo.mu * um.k2 / (mo.s2 * mo.s2);
        let mut v3 = PointValue::exact(p, c3);
        v3.aux = Some(c3_direct);
        Ok([PointValue::exact(p, c2), v3, PointValue::exact(p, c5)])
    };
    let run = |g: &Grid| -> Result<Vec<[PointValue; 3]>> { g.points().par_iter().map(eval).collect() };
    let coarse = run(grid)?;
    let fine = run(&grid.refine())?;
    let column = |rows: &[[PointValue; 3]], i: usize| rows.iter().map(|r| r[i].clone()).collect::<Vec<_>>();
    let mut out = Vec::new();
    for (i, (id, q)) in [(2u8, "r*mu*sqrt(k4)/sigma^3"), (3, "r^2*mu*sqrt(k4)*sqrt(l2)/(sigma^3*s)"), (5, "r^2*mu*k2/sigma^4")]
        .into_iter()
        .enumerate()
    {
        let mut rep = report(id, q, column(&coarse, i), &column(&fine, i), "exact binomial moments of L");
        if id == 3 {
            let dominated = rep.points.iter().all(|v| v.aux.is_some_and(|a| a <= v.value * (1.0 + 1e-12)));
            rep.pass &= dominated;
            rep.note = "exact binomial moments of L; aux is the direct tail form, checked to be dominated".into();
        }
        out.push(rep);
    }
    Ok(out)
}

/// Ratios of the full problem to the reduced problem with `l <= ceil(sqrt n)`
/// balls and one urn removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition4Report {
    pub sigma_ratio: ConditionReport,
    pub rate_ratio: ConditionReport,
    pub mu_ratio: ConditionReport,
    pub mu_ratio_bound: f64,
    /// Smallest grid `n` from which every larger grid `n` keeps the mean ratio within the bound.
    pub n1: Option<u64>,
    /// Points with `1 + (n/(m-1))^3 > 8 (1 + (n/m)^3)`.
    pub cube_violations: Vec<(u64, u64)>,
    pub pass: bool,
}

pub const MU_RATIO_BOUND: f64 = 18.0;

fn reduced_ratios(p: &OccupancyParams) -> Result<[PointValue; 3]> {
    let mo = moments(p)?;
    let s = (p.n as f64).sqrt().ceil() as u64;
    let (mut sig, mut rat, mut mur) = (0.0f64, 0.0f64, 0.0f64);
    for l in 0..=s.min(p.n - p.d) {
        let q = OccupancyParams::new(p.n - l, p.m - 1, p.d);
        let reduced = moments(&q)?;
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
        sig = sig.max(ratio(mo.s2, reduced.s2));
        rat = rat.max(ratio(mo.r, reduced.r));
        mur = mur.max(ratio(mo.mu, reduced.mu));
    }
    Ok([PointValue::exact(p, sig), PointValue::exact(p, rat), PointValue::exact(p, mur)])
}

pub fn check_condition4(grid: &Grid) -> Result<Condition4Report> {
    let run = |g: &Grid| -> Result<Vec<[PointValue; 3]>> { g.points().par_iter().map(reduced_ratios).collect() };
    let coarse = run(grid)?;
    let fine = run(&grid.refine())?;
    let column = |rows: &[[PointValue; 3]], i: usize| rows.iter().map(|r| r[i].clone()).collect::<Vec<_>>();
    let note = "max over l <= ceil(sqrt n) of full / reduced (n - l balls, m - 1 urns)";
    let sigma_ratio = report(4, "sigma^2 ratio", column(&coarse, 0), &column(&fine, 0), note);
    let rate_ratio = report(4, "r ratio", column(&coarse, 1), &column(&fine, 1), note);
    let mu_ratio = report(4, "mu ratio", column(&coarse, 2), &column(&fine, 2), note);

    let mut by_n: Vec<(u64, f64)> = column(&fine, 2).iter().map(|v| (v.n, v.value)).collect();
    by_n.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut n1 = None;
    for (n, v) in by_n.iter().rev() {
        if v.is_nan() || *v > MU_RATIO_BOUND {
            break;
        }
        n1 = Some(*n);
    }
    let cube_violations: Vec<(u64, u64)> = grid
        .refine()
        .points()
        .iter()
        .filter(|p| {
            let x = p.load();
            let y = p.n as f64 / (p.m - 1) as f64;
            1.0 + y.powi(3) > 8.0 * (1.0 + x.powi(3)) * (1.0 + 1e-12)
        })
        .map(|p| (p.n, p.m))
        .collect();
    let pass = sigma_ratio.pass && rate_ratio.pass && mu_ratio.pass && n1.is_some() && cube_violations.is_empty();
    Ok(Condition4Report { sigma_ratio, rate_ratio, mu_ratio, mu_ratio_bound: MU_RATIO_BOUND, n1, cube_violations, pass })
}
