//! Empirical complementary CDFs on a fixed grid.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `P(value > t)` sampled at `thresholds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfTable {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    Ok(())
}

/// Grid `k·resolution` from one step below `min` to the first point at or above `max`.
pub fn grid_covering(min: f64, max: f64, resolution: f64) -> Result<Vec<f64>> {
    check_resolution(resolution)?;
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(Error::InvalidParameter(format!("bad value range [{min}, {max}]")));
    }
    let mut lo = (min / resolution).floor() as i64 - 1;
    let mut hi = (max / resolution).ceil() as i64;
    // the division may round across a grid point
    while lo as f64 * resolution >= min {
        lo -= 1;
    }
    while (hi as f64) * resolution < max {
        hi += 1;
    }
    // multiplying integers keeps the grid free of accumulated rounding
    Ok((lo..=hi).map(|k| k as f64 * resolution).collect())
}

/// Evaluates the empirical CCDF of `values` at the given thresholds.
pub fn ccdf_on_grid(values: &[f64], thresholds: &[f64]) -> Result<CcdfTable> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("CCDF of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let probabilities = thresholds
        .iter()
        .map(|&t| {
            let at_or_below = sorted.partition_point(|&v| v <= t);
            (sorted.len() - at_or_below) as f64 / n
        })
        .collect();
    Ok(CcdfTable {
        thresholds: thresholds.to_vec(),
        probabilities,
    })
}

pub fn ccdf(values: &[f64], resolution: f64) -> Result<CcdfTable> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("CCDF of an empty sample".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ccdf_on_grid(values, &grid_covering(min, max, resolution)?)
}

impl CcdfTable {
    pub fn at(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&x| x >= t)
            .map(|i| self.probabilities[i])
    }

    /// Threshold where the curve first drops to `p` or below, linearly interpolated between
    /// neighbouring grid points.
    pub fn level_at(&self, p: f64) -> Option<f64> {
        let i = self.probabilities.iter().position(|&q| q <= p)?;
        if i == 0 {
            return Some(self.thresholds[0]);
        }
        let (t0, t1) = (self.thresholds[i - 1], self.thresholds[i]);
        let (q0, q1) = (self.probabilities[i - 1], self.probabilities[i]);
        if q0 == q1 {
            return Some(t1);
        }
        Some(t0 + (q0 - p) / (q0 - q1) * (t1 - t0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function() {
        let t = ccdf(&[2.0; 5], 0.1).unwrap();
        for (x, p) in t.thresholds.iter().zip(&t.probabilities) {
            assert_eq!(*p, if *x < 2.0 - 1e-12 { 1.0 } else { 0.0 }, "t = {x}");
        }
    }

    #[test]
    fn counting_and_monotone() {
        let t = ccdf_on_grid(&[1.0, 2.0, 3.0], &[1.5]).unwrap();
        assert!((t.probabilities[0] - 2.0 / 3.0).abs() < 1e-15);
        let vals: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64 * 0.07).collect();
        let t = ccdf(&vals, 0.1).unwrap();
        assert_eq!(t.probabilities[0], 1.0);
        assert_eq!(*t.probabilities.last().unwrap(), 0.0);
        assert!(t.probabilities.windows(2).all(|w| w[1] <= w[0]));
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(ccdf_on_grid(&vals, &[min - 0.1]).unwrap().probabilities[0], 1.0);
    }

    #[test]
    fn level_interpolates() {
        let t = CcdfTable {
            thresholds: vec![0.0, 1.0, 2.0],
            probabilities: vec![1.0, 0.5, 0.0],
        };
        assert_eq!(t.level_at(0.25), Some(1.5));
        assert_eq!(t.level_at(1.0), Some(0.0));
        assert_eq!(t.at(0.5), Some(0.5));
    }

    #[test]
    fn errors() {
        assert!(ccdf(&[], 0.1).is_err());
        assert!(ccdf(&[1.0], 0.0).is_err());
    }
}
