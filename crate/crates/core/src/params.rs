use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical/geometric parameter pair: Rayleigh number and cavity aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub rayleigh: f64,
    pub height: f64,
}

impl ParameterPoint {
    pub fn new(rayleigh: f64, height: f64) -> Self {
        Self { rayleigh, height }
    }

    /// Bit-exact key for caches and deterministic ordering.
    pub fn key(&self) -> (u64, u64) {
        (self.rayleigh.to_bits(), self.height.to_bits())
    }
}

/// Admissible parameter box, e.g. [1e3, 1e4] x [0.5, 2].
///
/// A degenerate range (lo == hi) fixes that parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub rayleigh: [f64; 2],
    pub height: [f64; 2],
}

impl ParameterBox {
    pub fn new(rayleigh: [f64; 2], height: [f64; 2]) -> Result<Self> {
        let b = Self { rayleigh, height };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rayleigh[0] > 0.0
            && self.height[0] > 0.0
            && self.rayleigh[0] <= self.rayleigh[1]
            && self.height[0] <= self.height[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "parameter box must satisfy 0 < lo <= hi per component, got Ra {:?}, height {:?}",
                self.rayleigh, self.height
            )))
        }
    }

    pub fn contains(&self, p: &ParameterPoint) -> bool {
        let tol_ra = 1e-12 * self.rayleigh[1].max(1.0);
        let tol_h = 1e-12 * self.height[1].max(1.0);
        p.rayleigh >= self.rayleigh[0] - tol_ra
            && p.rayleigh <= self.rayleigh[1] + tol_ra
            && p.height >= self.height[0] - tol_h
            && p.height <= self.height[1] + tol_h
    }

    pub fn check(&self, p: &ParameterPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::ParameterOutOfBox(
                *p,
                format!("Ra in {:?}, height in {:?}", self.rayleigh, self.height),
            ))
        }
    }

    pub fn height_is_fixed(&self) -> bool {
        self.height[0] == self.height[1]
    }

    pub fn rayleigh_is_fixed(&self) -> bool {
        self.rayleigh[0] == self.rayleigh[1]
    }

    /// Tensorized sample grid: log-uniform in Ra, uniform in height.
    ///
    /// Degenerate ranges always produce a single coordinate regardless of the
    /// requested count, so 1-parameter studies fall out naturally.
    pub fn tensor_grid(&self, n_ra: usize, n_h: usize) -> Vec<ParameterPoint> {
        let ras = log_space(self.rayleigh[0], self.rayleigh[1], n_ra);
        let hs = lin_space(self.height[0], self.height[1], n_h);
        let mut out = Vec::with_capacity(ras.len() * hs.len());
        for &h in &hs {
            for &ra in &ras {
                out.push(ParameterPoint::new(ra, h));
            }
        }
        out
    }

    /// Normalize to [-1,1]^2 with Ra on a log scale; used by surrogates and
    /// nearest-snapshot lookups so both parameters carry comparable weight.
    pub fn scale(&self, p: &ParameterPoint) -> [f64; 2] {
        [
            scale_log(p.rayleigh, self.rayleigh),
            scale_lin(p.height, self.height),
        ]
    }
}

fn scale_log(v: f64, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        return 0.0;
    }
    let (lo, hi) = (range[0].ln(), range[1].ln());
    2.0 * (v.ln() - lo) / (hi - lo) - 1.0
}

fn scale_lin(v: f64, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        return 0.0;
    }
    2.0 * (v - range[0]) / (range[1] - range[0]) - 1.0
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_membership() {
        let b = ParameterBox::new([1e3, 1e4], [0.5, 2.0]).unwrap();
        assert!(b.contains(&ParameterPoint::new(5e3, 1.0)));
        assert!(!b.contains(&ParameterPoint::new(5e4, 1.0)));
        assert!(!b.contains(&ParameterPoint::new(5e3, 0.1)));
    }

    #[test]
    fn degenerate_range_collapses_grid() {
        let b = ParameterBox::new([1e3, 1e4], [1.0, 1.0]).unwrap();
        let g = b.tensor_grid(5, 7);
        assert_eq!(g.len(), 5);
        assert!(g.iter().all(|p| p.height == 1.0));
        // log spacing: ratios between consecutive Ra constant
        let r0 = g[1].rayleigh / g[0].rayleigh;
        let r1 = g[2].rayleigh / g[1].rayleigh;
        assert!((r0 - r1).abs() < 1e-12 * r0);
    }

    #[test]
    fn scaling_hits_corners() {
        let b = ParameterBox::new([1e3, 1e4], [0.5, 2.0]).unwrap();
        let s = b.scale(&ParameterPoint::new(1e3, 0.5));
        assert!((s[0] + 1.0).abs() < 1e-12 && (s[1] + 1.0).abs() < 1e-12);
        let s = b.scale(&ParameterPoint::new(1e4, 2.0));
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12);
    }
}
