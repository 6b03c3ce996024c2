use serde::{Deserialize, Serialize};

use crate::params::OccupancyParams;

/// Points `(n, m)` with `n = round(ratio * m)` for every listed urn count and load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: u64,
    pub m_values: Vec<u64>,
    pub ratios: Vec<f64>,
}

impl Grid {
    pub fn new(d: u64, mut m_values: Vec<u64>, mut ratios: Vec<f64>) -> Self {
        m_values.sort_unstable();
        m_values.dedup();
        ratios.sort_by(f64::total_cmp);
        ratios.dedup();
        Self { d, m_values, ratios }
    }

    pub fn single(n: u64, m: u64, d: u64) -> Self {
        Self::new(d, vec![m], vec![n as f64 / m as f64])
    }

    /// Evenly spaced loads in `[lo, hi]`.
    pub fn band(d: u64, m_values: Vec<u64>, lo: f64, hi: f64, steps: usize) -> Self {
        let ratios = if steps <= 1 || lo == hi {
            vec![lo]
        } else {
            (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
        };
        Self::new(d, m_values, ratios)
    }

    /// Loads 0.5 to 2 in steps of 0.25 on `m` in {25, 50, 100, 200}.
    pub fn central(d: u64) -> Self {
        Self::band(d, vec![25, 50, 100, 200], 0.5, 2.0, 7)
    }

    /// Points ordered by `m`, then `n`, skipping `n < d` and duplicates.
    pub fn points(&self) -> Vec<OccupancyParams> {
        let mut out = Vec::new();
        for &m in &self.m_values {
            let mut last = None;
            for &r in &self.ratios {
                let n = (r * m as f64).round() as u64;
                if n < self.d || last == Some(n) {
                    continue;
                }
                last = Some(n);
                out.push(OccupancyParams::new(n, m, self.d));
            }
        }
        out
    }

    /// Inserts the midpoint between neighbours on both axes, doubling the density.
    pub fn refine(&self) -> Self {
        let mut m_values = self.m_values.clone();
        for w in self.m_values.windows(2) {
            m_values.push((w[0] + w[1]) / 2);
        }
        let mut ratios = self.ratios.clone();
        for w in self.ratios.windows(2) {
            ratios.push(0.5 * (w[0] + w[1]));
        }
        Self::new(self.d, m_values, ratios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_round_trips() {
        let g = Grid::single(37, 11, 2);
        assert_eq!(g.points(), vec![OccupancyParams::new(37, 11, 2)]);
    }

    #[test]
    fn refinement_inserts_midpoints() {
        let g = Grid::new(2, vec![20, 40], vec![0.5, 1.0]);
        let r = g.refine();
        assert_eq!(r.m_values, vec![20, 30, 40]);
        assert_eq!(r.ratios, vec![0.5, 0.75, 1.0]);
        assert_eq!(r.points().len(), 9);
        assert!(g.points().iter().all(|p| r.points().contains(p)));
    }

    #[test]
    fn points_skip_too_few_balls() {
        let g = Grid::new(3, vec![4], vec![0.25, 0.5, 1.0]);
        let pts = g.points();
        assert_eq!(pts, vec![OccupancyParams::new(4, 4, 3)]);
    }
}
