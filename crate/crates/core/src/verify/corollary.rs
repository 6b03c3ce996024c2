//! The right-hand intermediate regime along `n = floor(m (log m + (d - a) log log m))`.

use serde::{Deserialize, Serialize};

use crate::error::{OccupancyError, Result};
use crate::model::{delta, rate};
use crate::params::OccupancyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePoint {
    pub m: u64,
    /// `None` when the sequence gives fewer than `d` balls.
    pub n: Option<u64>,
    pub r: Option<f64>,
    pub delta_over_loglog: Option<f64>,
    /// `log r^2 - (log m + (d - 6) log(n/m) - n/m)`.
    pub remainder: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub d: u64,
    pub a: f64,
    pub points: Vec<SequencePoint>,
    /// Fewer than three admissible points.
    pub vacuous: bool,
    pub increasing_tail: bool,
    pub delta_close: bool,
    pub remainder_spread: Option<f64>,
    pub pass: bool,
}

pub fn sequence_n(m: u64, d: u64, a: f64) -> Option<u64> {
    let lm = (m as f64).ln();
    let x = m as f64 * (lm + (d as f64 - a) * lm.ln());
    (x >= d as f64).then(|| x.floor() as u64)
}

pub fn check_sequence(d: u64, a: f64, m_values: &[u64]) -> Result<SequenceReport> {
    if a.is_nan() || a <= 6.0 {
        return Err(OccupancyError::InvalidArgument(format!("need a > 6, got {a}")));
    }
    if let Some(&m) = m_values.iter().find(|&&m| m < 16) {
        return Err(OccupancyError::InvalidArgument(format!("need m >= 16, got {m}")));
    }
    let mut points = Vec::new();
    for &m in m_values {
        let n = sequence_n(m, d, a);
        let mut pt = SequencePoint { m, n, r: None, delta_over_loglog: None, remainder: None };
        if let Some(n) = n {
            let p = OccupancyParams::new(n, m, d);
            let r = rate(&p)?;
            let ll = (m as f64).ln().ln();
            let x = p.load();
            pt.r = Some(r);
            pt.delta_over_loglog = Some(delta(&p)? / ll);
            pt.remainder = Some(2.0 * r.ln() - ((m as f64).ln() + (d as f64 - 6.0) * x.ln() - x));
        }
        points.push(pt);
    }
    let valid: Vec<&SequencePoint> = points.iter().filter(|p| p.n.is_some()).collect();
    let vacuous = valid.len() < 3;
    let tail: Vec<f64> = valid.iter().rev().take(3).rev().filter_map(|p| p.r).collect();
    let increasing_tail = !vacuous && tail.windows(2).all(|w| w[1] > w[0]);
    let delta_close = valid.last().and_then(|p| p.delta_over_loglog).is_some_and(|v| (v - a).abs() <= 0.1);
    let rems: Vec<f64> = valid.iter().filter_map(|p| p.remainder).collect();
    let remainder_spread = (!rems.is_empty()).then(|| {
        rems.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rems.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    Ok(SequenceReport {
        d,
        a,
        points,
        vacuous,
        increasing_tail,
        delta_close,
        remainder_spread,
        pass: !vacuous && increasing_tail && delta_close,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary41Report {
    pub sequences: Vec<SequenceReport>,
    /// Every non-vacuous sequence passes and at least one is non-vacuous.
    pub pass: bool,
}

pub fn check_corollary41(a_values: &[f64], m_values: &[u64], d_values: &[u64]) -> Result<Corollary41Report> {
    let mut sequences = Vec::new();
    for &d in d_values {
        for &a in a_values {
            sequences.push(check_sequence(d, a, m_values)?);
        }
    }
    let live: Vec<&SequenceReport> = sequences.iter().filter(|s| !s.vacuous).collect();
    let pass = !live.is_empty() && live.iter().all(|s| s.pass);
    Ok(Corollary41Report { sequences, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_sequence_is_vacuous_below_a_million() {
        for m in [1_000u64, 10_000, 100_000] {
            assert_eq!(sequence_n(m, 2, 7.0), None);
        }
        let rep = check_sequence(2, 7.0, &[1_000, 10_000, 100_000, 1_000_000]).unwrap();
        assert!(rep.vacuous);
    }

    #[test]
    fn delta_tracks_a() {
        let rep = check_sequence(6, 7.0, &[10_000, 100_000, 1_000_000]).unwrap();
        let last = rep.points.last().unwrap().delta_over_loglog.unwrap();
        assert!((last - 7.0).abs() < 0.1);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn preconditions() {
        assert!(check_sequence(5, 6.0, &[1000]).is_err());
        assert!(check_sequence(5, 7.0, &[10]).is_err());
    }
}
