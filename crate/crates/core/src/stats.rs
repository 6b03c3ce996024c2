//! Sample summaries and distances between discrete laws.

use serde::{Deserialize, Serialize};

/// Central moments of a sample, accumulated in index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Fourth central moment (plug-in).
    pub m4: f64,
}

impl SampleSummary {
    pub fn from_slice(xs: &[f64]) -> Self {
        let count = xs.len() as u64;
        if count == 0 {
            return Self { count, mean: f64::NAN, variance: f64::NAN, m4: f64::NAN };
        }
        let nf = count as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut s2, mut s4) = (0.0, 0.0);
        for x in xs {
            let e = x - mean;
            let e2 = e * e;
            s2 += e2;
            s4 += e2 * e2;
        }
        let variance = if count > 1 { s2 / (nf - 1.0) } else { 0.0 };
        Self { count, mean, variance, m4: s4 / nf }
    }

    pub fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    pub fn se_mean(&self) -> f64 {
        (self.variance.max(0.0) / self.count as f64).sqrt()
    }

    /// Standard error of the sample variance, `sqrt((m4 - s^4) / N)`.
    pub fn se_variance(&self) -> f64 {
        let s4 = self.variance * self.variance;
        ((self.m4 - s4).max(0.0) / self.count as f64).sqrt()
    }

    /// Delta-method standard error of the sample standard deviation.
    pub fn se_sd(&self) -> f64 {
        let sd = self.sd();
        if sd == 0.0 {
            0.0
        } else {
            self.se_variance() / (2.0 * sd)
        }
    }
}

/// Total variation distance between an empirical histogram and a law on `0..`.
pub fn tv_histogram(counts: &[u64], law: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return f64::NAN;
    }
    let len = counts.len().max(law.len());
    let mut acc = 0.0;
    for k in 0..len {
        let emp = counts.get(k).copied().unwrap_or(0) as f64 / total as f64;
        let p = law.get(k).copied().unwrap_or(0.0);
        acc += (emp - p).abs();
    }
    0.5 * acc
}

/// Relative change between a coarse and a refined supremum.
pub fn relative_drift(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        return 0.0;
    }
    (fine - coarse).abs() / coarse.abs().max(fine.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sample() {
        let s = SampleSummary::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.m4 - (2.0 * 5.0625 + 2.0 * 0.0625) / 4.0).abs() < 1e-15);
        assert_eq!(SampleSummary::from_slice(&[2.0, 2.0]).se_sd(), 0.0);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_histogram(&[5, 5], &[0.5, 0.5]), 0.0);
        assert_eq!(tv_histogram(&[10], &[0.0, 1.0]), 1.0);
        assert!((tv_histogram(&[3, 1], &[0.5, 0.5]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn drift_is_symmetric_and_scaled() {
        assert_eq!(relative_drift(1.0, 1.1), relative_drift(1.1, 1.0));
        assert!((relative_drift(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(relative_drift(0.0, 0.0), 0.0);
    }
}
