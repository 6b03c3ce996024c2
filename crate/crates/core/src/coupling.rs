//! Size-bias coupling of the occupancy count.
//!
//! An urn `I` is chosen uniformly and the configuration is modified so that `I`
//! holds exactly `d` balls: surplus balls of `I` are thrown uniformly onto the
//! other urns, or missing balls are pulled uniformly from them. The count of
//! `d`-urns in the modified configuration has the size-biased law.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{OccupancyError, Result};
use crate::params::OccupancyParams;
use crate::rng::{chunked, sample_values, stream_key, substream};
use crate::special::{binomial, ln_binomial};
use crate::stats::{tv_histogram, SampleSummary};

/// Urn occupancies together with their histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    occupancies: Vec<u64>,
    /// Sorted `(occupancy, number of urns)` pairs.
    histogram: Vec<(u64, u64)>,
}

impl Configuration {
    pub fn from_occupancies(occupancies: Vec<u64>) -> Self {
        let top = occupancies.iter().copied().max().unwrap_or(0) as usize;
        let histogram = if top <= 4 * occupancies.len() + 64 {
            let mut counts = vec![0u64; top + 1];
            for &x in &occupancies {
                counts[x as usize] += 1;
            }
            counts
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(v, c)| (v as u64, c))
                .collect()
        } else {
            let mut map: BTreeMap<u64, u64> = BTreeMap::new();
            for &x in &occupancies {
                *map.entry(x).or_default() += 1;
            }
            map.into_iter().collect()
        };
        Self { occupancies, histogram }
    }

    pub fn occupancies(&self) -> &[u64] {
        &self.occupancies
    }

    pub fn histogram(&self) -> &[(u64, u64)] {
        &self.histogram
    }

    pub fn balls(&self) -> u64 {
        self.occupancies.iter().sum()
    }

    pub fn urns(&self) -> u64 {
        self.occupancies.len() as u64
    }

    /// Number of urns holding exactly `d` balls.
    pub fn count_equal(&self, d: u64) -> u64 {
        self.histogram
            .binary_search_by_key(&d, |&(v, _)| v)
            .map(|i| self.histogram[i].1)
            .unwrap_or(0)
    }
}

fn draw_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

const BALL_THROW_LOAD: u64 = 4;

fn multinomial_vec<R: Rng + ?Sized>(rng: &mut R, n: u64, m: u64) -> Vec<u64> {
    let mut out = vec![0u64; m as usize];
    if n <= BALL_THROW_LOAD * m {
        for _ in 0..n {
            out[rng.random_range(0..m) as usize] += 1;
        }
        return out;
    }
    let mut left = n;
    for (idx, slot) in out.iter_mut().enumerate() {
        if left == 0 {
            break;
        }
        let urns_left = m - idx as u64;
        let x = if urns_left == 1 { left } else { draw_binomial(rng, left, 1.0 / urns_left as f64) };
        *slot = x;
        left -= x;
    }
    out
}

/// Uniform multinomial configuration of `n` balls over `m` urns.
///
/// Sequential binomial splitting, or one uniform draw per ball when `n <= 4m`.
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, m: u64, rng: &mut R) -> Result<Configuration> {
    if m == 0 {
        return Err(OccupancyError::InvalidArgument("need m >= 1".into()));
    }
    Ok(Configuration::from_occupancies(multinomial_vec(rng, n, m)))
}

/// One draw of the coupled pair with its condition variables. `i` is zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledSample {
    pub m: Configuration,
    pub m_s: Configuration,
    pub i: u64,
    pub y: u64,
    pub y_s: u64,
    pub k: u64,
    pub l: u64,
    pub v: u64,
    pub b: u64,
    pub r_total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledSummary {
    pub i: u64,
    pub y: u64,
    pub y_s: u64,
    pub k: u64,
    pub l: u64,
    pub v: u64,
    pub r_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_s: Option<Vec<u64>>,
}

impl CoupledSample {
    pub fn summary(&self, verbose: bool) -> CoupledSummary {
        CoupledSummary {
            i: self.i,
            y: self.y,
            y_s: self.y_s,
            k: self.k,
            l: self.l,
            v: self.v,
            r_total: self.r_total,
            m: verbose.then(|| self.m.occupancies.clone()),
            m_s: verbose.then(|| self.m_s.occupancies.clone()),
        }
    }

    pub fn to_json_line(&self, verbose: bool) -> String {
        serde_json::to_string(&self.summary(verbose)).expect("summary serializes")
    }
}

pub fn sample_coupled<R: Rng + ?Sized>(params: &OccupancyParams, rng: &mut R) -> Result<CoupledSample> {
    params.check_moments()?;
    let OccupancyParams { n, m, d } = *params;
    let i = rng.random_range(0..m);
    let mi = draw_binomial(rng, n, 1.0 / m as f64);
    let shared = multinomial_vec(rng, n - mi.max(d), m - 1);
    let r_total = mi.abs_diff(d);
    let moved = multinomial_vec(rng, r_total, m - 1);

    let mut occ = Vec::with_capacity(m as usize);
    let mut occ_s = Vec::with_capacity(m as usize);
    for (j, (&x, &r)) in shared.iter().zip(&moved).enumerate() {
        if j as u64 == i {
            occ.push(mi);
            occ_s.push(d);
        }
        occ.push(if mi < d { x + r } else { x });
        occ_s.push(if mi > d { x + r } else { x });
    }
    if i == m - 1 {
        occ.push(mi);
        occ_s.push(d);
    }
    let cfg = Configuration::from_occupancies(occ);
    let cfg_s = Configuration::from_occupancies(occ_s);
    let y = cfg.count_equal(d);
    let y_s = cfg_s.count_equal(d);
    let v = y - u64::from(mi == d);
    Ok(CoupledSample {
        m: cfg,
        m_s: cfg_s,
        i,
        y,
        y_s,
        k: 1 + r_total,
        l: mi,
        v,
        b: 1,
        r_total,
    })
}

/// Draws the size-biased configuration at urn `i` given the configuration `cfg`.
///
/// This is the conditional law used inside [`sample_coupled`]; it serves as a
/// resampling reference for the conditional probabilities below.
pub fn size_bias_at<R: Rng + ?Sized>(cfg: &Configuration, i: usize, d: u64, rng: &mut R) -> Configuration {
    let mut occ = cfg.occupancies.to_vec();
    let mi = occ[i];
    occ[i] = d;
    let others: Vec<usize> = (0..occ.len()).filter(|&j| j != i).collect();
    if mi > d {
        let extra = multinomial_vec(rng, mi - d, others.len() as u64);
        for (&j, r) in others.iter().zip(extra) {
            occ[j] += r;
        }
    } else if mi < d {
        let mut pool: u64 = others.iter().map(|&j| occ[j]).sum();
        for _ in 0..(d - mi) {
            let mut pick = rng.random_range(0..pool);
            for &j in &others {
                if pick < occ[j] {
                    occ[j] -= 1;
                    break;
                }
                pick -= occ[j];
            }
            pool -= 1;
        }
    }
    Configuration::from_occupancies(occ)
}

fn clamp_prob(x: f64) -> f64 {
    debug_assert!(x > -1e-12 && x < 1.0 + 1e-12, "probability {x} out of range");
    x.clamp(0.0, 1.0)
}

/// `x^k` with the convention `0^0 = 1`.
fn ipow(x: f64, k: u64) -> f64 {
    if k == 0 {
        1.0
    } else if k <= 64 {
        x.powi(k as i32)
    } else {
        (k as f64 * x.ln()).exp()
    }
}

/// Probability that urn `j` (holding `mj < d`) holds exactly `d` after the
/// surplus of urn `i` (holding `mi`) is redistributed.
pub fn a_prob(params: &OccupancyParams, mi: u64, mj: u64) -> f64 {
    let d = params.d;
    if mj >= d || mi + mj < 2 * d {
        return 0.0;
    }
    let (p, q) = (params.p(), params.q());
    let (top, hit, miss) = (mi - d, d - mj, mi + mj - 2 * d);
    let v = if top <= 64 {
        binomial(top, hit) * ipow(p, hit) * ipow(q, miss)
    } else {
        let lq = if miss == 0 { 0.0 } else { miss as f64 * (-p).ln_1p() };
        (ln_binomial(top, hit) + hit as f64 * p.ln() + lq).exp()
    };
    clamp_prob(v)
}

/// Probability that urn `j` (holding `mj > d`) holds exactly `d` after the
/// deficit of urn `i` is taken from the other urns.
pub fn b_prob(params: &OccupancyParams, mi: u64, mj: u64) -> f64 {
    let OccupancyParams { n, d, .. } = *params;
    if mj <= d || mi + mj > 2 * d || n < 2 * d || mi + mj > n {
        return 0.0;
    }
    let v = (ln_binomial(n - d, d) + ln_binomial(d - mi, mj - d) - ln_binomial(n - mi, mj)).exp();
    clamp_prob(v)
}

/// Probability that urn `j` (holding exactly `d`) loses that status when urn
/// `i` is set to `d`.
///
/// For `mi > d` the `mi - d` surplus balls each miss `j` with probability `q`.
/// For `mi < d` the `d - mi` balls are drawn without replacement from the
/// `n - mi` balls outside `i`, and `j` is untouched with probability
/// `C(n - d, d) / C(n - mi, d)`.
pub fn c_prob(params: &OccupancyParams, mi: u64, mj: u64) -> f64 {
    let OccupancyParams { n, d, .. } = *params;
    if mj != d || mi == d {
        return 0.0;
    }
    if mi > d {
        return clamp_prob(1.0 - ipow(params.q(), mi - d));
    }
    if n < 2 * d || mi + d > n {
        return if n < mi + d { 0.0 } else { 1.0 };
    }
    clamp_prob(1.0 - (ln_binomial(n - d, d) - ln_binomial(n - mi, d)).exp())
}

/// `(1 - q^{|mi - d|}) 1{mj = d}`; agrees with [`c_prob`] when `mi >= d`.
pub fn c_prob_closed_form(params: &OccupancyParams, mi: u64, mj: u64) -> f64 {
    if mj != params.d {
        return 0.0;
    }
    clamp_prob(1.0 - ipow(params.q(), mi.abs_diff(params.d)))
}

/// `sum_{i != j}` of the three conditional probabilities over a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSums {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn check_config(cfg: &Configuration, params: &OccupancyParams) -> Result<()> {
    params.check_coupling()?;
    if cfg.urns() != params.m || cfg.balls() != params.n {
        return Err(OccupancyError::InconsistentCounts {
            implied: cfg.balls(),
            expected: params.n,
        });
    }
    Ok(())
}

pub fn pair_sums(cfg: &Configuration, params: &OccupancyParams) -> Result<PairSums> {
    check_config(cfg, params)?;
    Ok(sum_pairs(cfg, |u, v| [a_prob(params, u, v), b_prob(params, u, v), c_prob(params, u, v)]))
}

fn sum_pairs(cfg: &Configuration, f: impl Fn(u64, u64) -> [f64; 3]) -> PairSums {
    let mut sums = PairSums { a: 0.0, b: 0.0, c: 0.0 };
    for &(u, cu) in &cfg.histogram {
        for &(v, cv) in &cfg.histogram {
            let pairs = if u == v { cu * (cu - 1) } else { cu * cv } as f64;
            if pairs == 0.0 {
                continue;
            }
            let [a, b, c] = f(u, v);
            sums.a += pairs * a;
            sums.b += pairs * b;
            sums.c += pairs * c;
        }
    }
    sums
}

/// Precomputed `a`, `b`, `c` for occupancies up to a cap, for repeated evaluation
/// under one parameter set. Larger occupancies fall back to direct evaluation.
#[derive(Debug, Clone)]
pub struct PairTable {
    params: OccupancyParams,
    cap: u64,
    values: Vec<[f64; 3]>,
}

impl PairTable {
    pub fn new(params: &OccupancyParams) -> Result<Self> {
        params.check_coupling()?;
        let cap = params.n.min((2 * params.d + 2).max((4.0 * params.load()).ceil() as u64 + 24));
        let width = cap as usize + 1;
        let mut values = Vec::with_capacity(width * width);
        for u in 0..=cap {
            for v in 0..=cap {
                values.push([a_prob(params, u, v), b_prob(params, u, v), c_prob(params, u, v)]);
            }
        }
        Ok(Self { params: *params, cap, values })
    }

    pub fn params(&self) -> &OccupancyParams {
        &self.params
    }

    pub fn get(&self, u: u64, v: u64) -> [f64; 3] {
        if u <= self.cap && v <= self.cap {
            self.values[(u * (self.cap + 1) + v) as usize]
        } else {
            let p = &self.params;
            [a_prob(p, u, v), b_prob(p, u, v), c_prob(p, u, v)]
        }
    }

    pub fn pair_sums(&self, cfg: &Configuration) -> Result<PairSums> {
        check_config(cfg, &self.params)?;
        Ok(sum_pairs(cfg, |u, v| self.get(u, v)))
    }

    pub fn cond_expectation_diff(&self, cfg: &Configuration) -> Result<f64> {
        let s = self.pair_sums(cfg)?;
        Ok(combine(cfg, &self.params, &s))
    }
}

fn combine(cfg: &Configuration, params: &OccupancyParams, s: &PairSums) -> f64 {
    let moved = (params.m - cfg.count_equal(params.d)) as f64;
    (moved + s.a + s.b - s.c) / params.m as f64
}

/// `E[Y^s - Y | M]`, averaging over the uniformly chosen urn.
pub fn cond_expectation_diff(cfg: &Configuration, params: &OccupancyParams) -> Result<f64> {
    let s = pair_sums(cfg, params)?;
    Ok(combine(cfg, params, &s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    /// Standard deviation of `E[Y^s - Y | M]` over sampled configurations.
    pub psi_hat: f64,
    pub std_error: f64,
    /// Sample mean of `E[Y^s - Y | M]`; estimates `E[Y^2]/mu - mu`.
    pub mean: f64,
    pub mean_std_error: f64,
    pub n_samples: u64,
}

pub fn estimate_psi(params: &OccupancyParams, n_samples: u64, seed: u64) -> Result<PsiEstimate> {
    params.check_coupling()?;
    if n_samples < 2 {
        return Err(OccupancyError::TooFewSamples { needed: 2, got: n_samples });
    }
    let key = stream_key(seed, "psi");
    let table = PairTable::new(params)?;
    let values = sample_values(n_samples, key, |rng| {
        let cfg = Configuration::from_occupancies(multinomial_vec(rng, params.n, params.m));
        table.cond_expectation_diff(&cfg).expect("configuration matches parameters")
    });
    let s = SampleSummary::from_slice(&values);
    Ok(PsiEstimate {
        psi_hat: s.sd(),
        std_error: s.se_sd(),
        mean: s.mean,
        mean_std_error: s.se_mean(),
        n_samples,
    })
}

/// Histograms of the coupled variables over many samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingDiagnostics {
    pub params: OccupancyParams,
    pub samples: u64,
    pub y: Vec<u64>,
    pub y_s: Vec<u64>,
    /// Counts of `(Y, Y^s)`.
    pub joint: BTreeMap<(u64, u64), u64>,
    /// Counts of `L = M(I)`.
    pub l: BTreeMap<u64, u64>,
    /// Counts of `(L, V)`.
    pub l_v: BTreeMap<(u64, u64), u64>,
    /// Samples with `|Y^s - Y| > K`.
    pub k_violations: u64,
    /// Samples with `|Y^s - Y| = K`.
    pub k_equalities: u64,
    /// Samples with `|Y - V| > B`.
    pub v_violations: u64,
}

impl CouplingDiagnostics {
    fn empty(params: OccupancyParams) -> Self {
        let len = params.m as usize + 1;
        Self {
            params,
            samples: 0,
            y: vec![0; len],
            y_s: vec![0; len],
            joint: BTreeMap::new(),
            l: BTreeMap::new(),
            l_v: BTreeMap::new(),
            k_violations: 0,
            k_equalities: 0,
            v_violations: 0,
        }
    }

    fn record(&mut self, s: &CoupledSample) {
        self.samples += 1;
        self.y[s.y as usize] += 1;
        self.y_s[s.y_s as usize] += 1;
        *self.joint.entry((s.y, s.y_s)).or_default() += 1;
        *self.l.entry(s.l).or_default() += 1;
        *self.l_v.entry((s.l, s.v)).or_default() += 1;
        let gap = s.y_s.abs_diff(s.y);
        if gap > s.k {
            self.k_violations += 1;
        }
        if gap == s.k {
            self.k_equalities += 1;
        }
        if s.y.abs_diff(s.v) > s.b {
            self.v_violations += 1;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.samples += other.samples;
        self.y.iter_mut().zip(&other.y).for_each(|(a, b)| *a += b);
        self.y_s.iter_mut().zip(&other.y_s).for_each(|(a, b)| *a += b);
        for (k, c) in other.joint {
            *self.joint.entry(k).or_default() += c;
        }
        for (k, c) in other.l {
            *self.l.entry(k).or_default() += c;
        }
        for (k, c) in other.l_v {
            *self.l_v.entry(k).or_default() += c;
        }
        self.k_violations += other.k_violations;
        self.k_equalities += other.k_equalities;
        self.v_violations += other.v_violations;
        self
    }

    pub fn tv_y(&self, law: &[f64]) -> f64 {
        tv_histogram(&self.y, law)
    }

    pub fn tv_y_s(&self, law: &[f64]) -> f64 {
        tv_histogram(&self.y_s, law)
    }

    /// Empirical `E[g(L)]`.
    fn l_mean(&self, g: impl Fn(u64) -> f64) -> f64 {
        self.l.iter().map(|(&l, &c)| g(l) * c as f64).sum::<f64>() / self.samples as f64
    }

    pub fn k_moment(&self, q: i32) -> f64 {
        let d = self.params.d;
        self.l_mean(|l| ((1 + l.abs_diff(d)) as f64).powi(q))
    }

    pub fn l_moment(&self, q: i32) -> f64 {
        self.l_mean(|l| (l as f64).powi(q))
    }

    /// Empirical `P(L <= s)`.
    pub fn l_at_most(&self, s: u64) -> f64 {
        self.l_mean(|l| f64::from(u8::from(l <= s)))
    }

    /// Empirical law of `V` given `L = l`, with the number of conditioning samples.
    pub fn v_given_l(&self, l: u64) -> (Vec<u64>, u64) {
        let mut counts = vec![0u64; self.params.m as usize + 1];
        let mut total = 0;
        for (&(ll, v), &c) in self.l_v.range((l, 0)..=(l, u64::MAX)) {
            debug_assert_eq!(ll, l);
            counts[v as usize] += c;
            total += c;
        }
        (counts, total)
    }

    /// Checks `E[Y f(Y)] = mu E[f(Y^s)]` for `f = id` and every indicator `1{. = k}`
    /// on the observed support.
    pub fn size_bias_identity(&self, mu: f64) -> Vec<IdentityCheck> {
        let mut checks = vec![self.identity_for("id".into(), mu, |y| y as f64)];
        let top = self.y.len().max(self.y_s.len());
        for k in 0..top as u64 {
            if self.y.get(k as usize).copied().unwrap_or(0) == 0 && self.y_s.get(k as usize).copied().unwrap_or(0) == 0 {
                continue;
            }
            checks.push(self.identity_for(format!("1{{={k}}}"), mu, move |y| f64::from(u8::from(y == k))));
        }
        checks
    }

    fn identity_for(&self, label: String, mu: f64, f: impl Fn(u64) -> f64) -> IdentityCheck {
        let nf = self.samples as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (&(y, ys), &c) in &self.joint {
            let c = c as f64;
            let a = y as f64 * f(y);
            let b = mu * f(ys);
            lhs += c * a;
            rhs += c * b;
            s1 += c * (a - b);
            s2 += c * (a - b) * (a - b);
        }
        let mean = s1 / nf;
        let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        IdentityCheck {
            function: label,
            lhs: lhs / nf,
            rhs: rhs / nf,
            std_error: (var / nf).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub function: String,
    /// Empirical `E[Y f(Y)]`.
    pub lhs: f64,
    /// `mu` times empirical `E[f(Y^s)]`.
    pub rhs: f64,
    /// Standard error of `lhs - rhs` from the joint draws.
    pub std_error: f64,
}

impl IdentityCheck {
    pub fn z_score(&self) -> f64 {
        let gap = (self.lhs - self.rhs).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Runs `samples` coupled draws from the named substream of `seed`.
pub fn coupling_diagnostics(params: &OccupancyParams, samples: u64, seed: u64) -> Result<CouplingDiagnostics> {
    params.check_moments()?;
    let key = stream_key(seed, "couple");
    let parts = chunked(samples, |range| {
        let mut diag = CouplingDiagnostics::empty(*params);
        for idx in range {
            let mut rng = substream(key, idx);
            let s = sample_coupled(params, &mut rng).expect("parameters checked");
            diag.record(&s);
        }
        diag
    });
    Ok(parts.into_iter().fold(CouplingDiagnostics::empty(*params), CouplingDiagnostics::merge))
}

/// The first `count` coupled draws of the substream used by [`coupling_diagnostics`].
pub fn coupled_samples(params: &OccupancyParams, count: u64, seed: u64) -> Result<Vec<CoupledSample>> {
    params.check_moments()?;
    let key = stream_key(seed, "couple");
    (0..count).map(|idx| sample_coupled(params, &mut substream(key, idx))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_key, substream};

    fn prm(n: u64, m: u64, d: u64) -> OccupancyParams {
        OccupancyParams::new(n, m, d)
    }

    #[test]
    fn configuration_histogram() {
        let c = Configuration::from_occupancies(vec![2, 0, 2, 5]);
        assert_eq!(c.histogram(), &[(0, 1), (2, 2), (5, 1)]);
        assert_eq!(c.count_equal(2), 2);
        assert_eq!(c.count_equal(3), 0);
        assert_eq!(c.balls(), 9);
    }

    #[test]
    fn multinomial_edge_cases() {
        let mut rng = substream(1, 0);
        let c = sample_multinomial(0, 4, &mut rng).unwrap();
        assert_eq!(c.occupancies(), &[0, 0, 0, 0]);
        let c = sample_multinomial(7, 1, &mut rng).unwrap();
        assert_eq!(c.occupancies(), &[7]);
        assert!(sample_multinomial(3, 0, &mut rng).is_err());
        for seed in 0..50 {
            let c = sample_multinomial(1000, 13, &mut substream(seed, 1)).unwrap();
            assert_eq!(c.balls(), 1000);
        }
    }

    #[test]
    fn coupled_sample_invariants() {
        let key = stream_key(3, "test");
        for &(n, m, d) in &[(10, 5, 2), (3, 7, 3), (40, 3, 1), (5, 2, 0), (12, 4, 3)] {
            let p = prm(n, m, d);
            for idx in 0..2000 {
                let s = sample_coupled(&p, &mut substream(key, idx)).unwrap();
                assert_eq!(s.m.balls(), n);
                assert_eq!(s.m_s.balls(), n);
                assert_eq!(s.m_s.occupancies()[s.i as usize], d);
                assert_eq!(s.m.occupancies()[s.i as usize], s.l);
                assert!(s.y_s.abs_diff(s.y) <= s.k);
                assert!(s.y.abs_diff(s.v) <= 1);
                if s.l == d {
                    assert_eq!(s.m, s.m_s);
                }
                let diff: Vec<i64> = s
                    .m
                    .occupancies()
                    .iter()
                    .zip(s.m_s.occupancies())
                    .enumerate()
                    .filter(|&(j, _)| j as u64 != s.i)
                    .map(|(_, (&a, &b))| b as i64 - a as i64)
                    .collect();
                assert_eq!(diff.iter().map(|x| x.unsigned_abs()).sum::<u64>(), s.r_total);
                assert!(diff.iter().all(|&x| x >= 0) || diff.iter().all(|&x| x <= 0));
            }
        }
    }

    #[test]
    fn coupled_sample_needs_valid_params() {
        let mut rng = substream(0, 0);
        assert!(sample_coupled(&prm(1, 3, 2), &mut rng).is_err());
        assert!(sample_coupled(&prm(1, 1, 0), &mut rng).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert!((a_prob(&prm(10, 3, 2), 5, 1) - 0.375).abs() < 1e-15);
        assert_eq!(a_prob(&prm(10, 3, 2), 5, 2), 0.0);
        assert!((b_prob(&prm(6, 3, 2), 1, 3) - 0.6).abs() < 1e-15);
        assert_eq!(b_prob(&prm(6, 3, 2), 1, 2), 0.0);
        assert_eq!(b_prob(&prm(3, 3, 2), 0, 3), 0.0);
        assert!((c_prob(&prm(10, 3, 2), 4, 2) - 0.75).abs() < 1e-15);
        assert_eq!(c_prob(&prm(10, 3, 2), 2, 2), 0.0);
        assert_eq!(c_prob(&prm(10, 3, 2), 4, 3), 0.0);
        assert_eq!(c_prob_closed_form(&prm(10, 3, 2), 4, 2), c_prob(&prm(10, 3, 2), 4, 2));
    }

    #[test]
    fn serialization_of_summaries() {
        let s = sample_coupled(&prm(10, 5, 2), &mut substream(9, 9)).unwrap();
        let short = s.to_json_line(false);
        assert!(!short.contains("\"m\""));
        let v: serde_json::Value = serde_json::from_str(&s.to_json_line(true)).unwrap();
        assert_eq!(v["m"].as_array().unwrap().len(), 5);
        assert_eq!(v["y_s"], s.y_s);
    }

    /// Resampling reference for the probability that urn `j` holds `d` after biasing at `i`.
    fn resampled_hit(cfg: &Configuration, i: usize, j: usize, d: u64, draws: u64) -> (f64, f64) {
        let mut hits = 0u64;
        for idx in 0..draws {
            let mut rng = substream(stream_key(11, "resample"), idx);
            let s = size_bias_at(cfg, i, d, &mut rng);
            hits += u64::from(s.occupancies()[j] == d);
        }
        let p = hits as f64 / draws as f64;
        (p, (p * (1.0 - p) / draws as f64).sqrt())
    }

    #[test]
    fn a_prob_matches_resampling() {
        let p = prm(6, 4, 2);
        let cfg = Configuration::from_occupancies(vec![6, 0, 0, 0]);
        let (est, se) = resampled_hit(&cfg, 0, 1, 2, 100_000);
        assert!((est - a_prob(&p, 6, 0)).abs() <= 3.0 * se, "{est} vs {}", a_prob(&p, 6, 0));
    }

    #[test]
    fn b_prob_matches_resampling() {
        let p = prm(5, 3, 2);
        let cfg = Configuration::from_occupancies(vec![0, 4, 1]);
        let (est, se) = resampled_hit(&cfg, 0, 1, 2, 100_000);
        assert!((est - b_prob(&p, 0, 4)).abs() <= 3.0 * se, "{est} vs {}", b_prob(&p, 0, 4));
    }

    #[test]
    fn c_prob_matches_resampling_on_both_sides() {
        let cfg = Configuration::from_occupancies(vec![0, 2, 3, 1]);
        let p = prm(6, 4, 2);
        let (est, se) = resampled_hit(&cfg, 0, 1, 2, 100_000);
        assert!((1.0 - est - c_prob(&p, 0, 2)).abs() <= 3.0 * se.max(1e-12));
        let cfg = Configuration::from_occupancies(vec![5, 2, 0, 0]);
        let p = prm(7, 4, 2);
        let (est, se) = resampled_hit(&cfg, 0, 1, 2, 100_000);
        assert!((1.0 - est - c_prob(&p, 5, 2)).abs() <= 3.0 * se);
    }

    #[test]
    fn table_agrees_with_direct_evaluation() {
        let p = prm(30, 6, 2);
        let table = PairTable::new(&p).unwrap();
        for seed in 0..200 {
            let cfg = sample_multinomial(30, 6, &mut substream(seed, 2)).unwrap();
            assert_eq!(table.pair_sums(&cfg).unwrap(), pair_sums(&cfg, &p).unwrap());
        }
        let wide = Configuration::from_occupancies(vec![30, 0, 0, 0, 0, 0]);
        assert_eq!(table.cond_expectation_diff(&wide).unwrap(), cond_expectation_diff(&wide, &p).unwrap());
    }

    #[test]
    fn all_urns_at_d_give_zero_difference() {
        let p = prm(12, 4, 3);
        let cfg = Configuration::from_occupancies(vec![3, 3, 3, 3]);
        assert_eq!(cond_expectation_diff(&cfg, &p).unwrap(), 0.0);
    }

    #[test]
    fn cond_expectation_diff_matches_nested_resampling() {
        let p = prm(4, 4, 2);
        let cfg = Configuration::from_occupancies(vec![4, 0, 0, 0]);
        let want = cond_expectation_diff(&cfg, &p).unwrap();
        let key = stream_key(5, "nested");
        let draws = 200_000u64;
        let diffs: Vec<f64> = (0..draws)
            .map(|idx| {
                let mut rng = substream(key, idx);
                let i = rng.random_range(0..4usize);
                let s = size_bias_at(&cfg, i, 2, &mut rng);
                s.count_equal(2) as f64 - cfg.count_equal(2) as f64
            })
            .collect();
        let s = SampleSummary::from_slice(&diffs);
        assert!((s.mean - want).abs() <= 3.0 * s.se_mean(), "{} vs {want}", s.mean);
    }

    #[test]
    fn cond_expectation_diff_rejects_bad_input() {
        let cfg = Configuration::from_occupancies(vec![1, 1, 1]);
        assert!(cond_expectation_diff(&cfg, &prm(4, 3, 1)).is_err());
        assert!(cond_expectation_diff(&Configuration::from_occupancies(vec![2, 2]), &prm(4, 2, 1)).is_err());
    }

    #[test]
    fn psi_estimate_basics() {
        assert!(matches!(estimate_psi(&prm(10, 5, 2), 1, 0), Err(OccupancyError::TooFewSamples { .. })));
        let e = estimate_psi(&prm(10, 5, 2), 4000, 0).unwrap();
        assert!(e.psi_hat >= 0.0 && e.std_error > 0.0);
        let e2 = estimate_psi(&prm(10, 5, 2), 16000, 0).unwrap();
        let shrink = e.std_error / e2.std_error;
        assert!((shrink - 2.0).abs() < 0.3, "{shrink}");
        assert_eq!(estimate_psi(&prm(10, 5, 2), 4000, 0).unwrap(), e);
    }

    #[test]
    fn diagnostics_are_thread_independent() {
        let p = prm(10, 5, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| coupling_diagnostics(&p, 20_000, 4).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a.k_violations, 0);
        assert_eq!(a.v_violations, 0);
        assert!(a.k_equalities > 0);
        let first = coupled_samples(&p, 3, 4).unwrap();
        assert_eq!(first.len(), 3);
    }
}
