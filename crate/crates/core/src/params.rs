use serde::{Deserialize, Serialize};

use crate::error::{OccupancyError, Result};

/// `n` balls dropped uniformly into `m` urns; the statistic of interest counts
/// urns holding exactly `d` balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupancyParams {
    pub n: u64,
    pub m: u64,
    pub d: u64,
}

impl OccupancyParams {
    pub const fn new(n: u64, m: u64, d: u64) -> Self {
        Self { n, m, d }
    }

    fn reject(&self, reason: &'static str) -> OccupancyError {
        OccupancyError::Domain {
            n: self.n,
            m: self.m,
            d: self.d,
            reason,
        }
    }

    /// Range on which the closed-form moments are defined: `n >= d`, `m >= 2`.
    pub fn check_moments(&self) -> Result<()> {
        if self.m < 2 {
            return Err(self.reject("need m >= 2"));
        }
        if self.n < self.d {
            return Err(self.reject("need n >= d"));
        }
        Ok(())
    }

    /// The coupling quantities a/b/c and the conditional expectation need `p < 1`.
    pub fn check_coupling(&self) -> Result<()> {
        self.check_moments()?;
        if self.m < 3 {
            return Err(self.reject("need m >= 3"));
        }
        Ok(())
    }

    /// Probability that a redistributed ball lands in a given one of the other urns.
    pub fn p(&self) -> f64 {
        1.0 / (self.m as f64 - 1.0)
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p()
    }

    /// Balls per urn.
    pub fn load(&self) -> f64 {
        self.n as f64 / self.m as f64
    }
}

impl std::fmt::Display for OccupancyParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(n={}, m={}, d={})", self.n, self.m, self.d)
    }
}
