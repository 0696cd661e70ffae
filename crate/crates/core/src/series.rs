//! Received-power traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One received-power sample: integer time step and power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: i64,
    pub dbm: f64,
}

/// Time-indexed received power of one receiver.
///
/// Indices are strictly increasing and every power value is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    samples: Vec<Sample>,
    /// Seconds per time step.
    resolution: f64,
}

impl PowerSeries {
    pub fn new(samples: Vec<Sample>, resolution: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("power series is empty"));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::domain(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.dbm.is_finite() {
                return Err(Error::domain(format!(
                    "non-finite power {} at time step {}",
                    s.dbm, s.t
                )));
            }
            if i > 0 && samples[i - 1].t >= s.t {
                return Err(Error::domain(format!(
                    "time steps not strictly increasing at position {i} ({} then {})",
                    samples[i - 1].t,
                    s.t
                )));
            }
        }
        Ok(Self {
            samples,
            resolution,
        })
    }

    /// Builds a series with time steps `0..values.len()`.
    pub fn from_values(values: &[f64], resolution: f64) -> Result<Self> {
        let samples = values
            .iter()
            .enumerate()
            .map(|(t, &dbm)| Sample { t: t as i64, dbm })
            .collect();
        Self::new(samples, resolution)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.dbm).collect()
    }

    /// Fraction of samples strictly below `u`.
    pub fn fraction_below(&self, u: f64) -> f64 {
        let k = self.samples.iter().filter(|s| s.dbm < u).count();
        k as f64 / self.samples.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_steps() {
        let s = vec![Sample { t: 0, dbm: -1.0 }, Sample { t: 0, dbm: -2.0 }];
        assert!(PowerSeries::new(s, 1.0).is_err());
    }

    #[test]
    fn rejects_non_finite_power() {
        assert!(PowerSeries::from_values(&[-1.0, f64::NAN], 1.0).is_err());
        assert!(PowerSeries::from_values(&[f64::INFINITY], 1.0).is_err());
    }

    #[test]
    fn fraction_below_is_strict() {
        let s = PowerSeries::from_values(&[-10.0, -15.0, -20.0, -15.0], 3e-3).unwrap();
        assert_eq!(s.fraction_below(-15.0), 0.25);
    }
}
