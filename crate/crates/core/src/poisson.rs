//! Point-process model of the joint tail through an empirical angular measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::transforms::PickandsPoint;

const MIN_RETAINED: usize = 30;

/// Bandwidth of the triangular kernel used for the smoothed angular density.
pub const SMOOTHING_BANDWIDTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub omega: f64,
    pub mass: f64,
}

/// Discrete probability measure on the angular coordinate.
///
/// When symmetrized, atoms come in mirror pairs `(w, 1 - w)` of equal mass
/// stored next to each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMeasure {
    pub atoms: Vec<Atom>,
    pub r0: f64,
    pub symmetrized: bool,
}

/// Mirror pair whose members sum to exactly 1 in floating point.
fn mirror(omega: f64) -> (f64, f64) {
    if omega >= 0.5 {
        (1.0 - omega, omega)
    } else {
        let hi = 1.0 - omega;
        (1.0 - hi, hi)
    }
}

impl AngularMeasure {
    pub fn mean(&self) -> f64 {
        if self.symmetrized {
            let (mut num, mut den) = (0.0, 0.0);
            for pair in self.atoms.chunks_exact(2) {
                num += pair[0].mass * (pair[0].omega + pair[1].omega);
                den += pair[0].mass;
            }
            return num / (2.0 * den);
        }
        let total: f64 = self.atoms.iter().map(|a| a.mass).sum();
        self.atoms.iter().map(|a| a.omega * a.mass).sum::<f64>() / total
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Discretizes a density on [0, 1] onto `points` equally spaced atoms
    /// with composite Simpson weights, normalized to unit mass.
    pub fn from_density(density: impl Fn(f64) -> f64, points: usize) -> Result<Self> {
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::domain("density discretization needs an odd number (>= 3) of points"));
        }
        let h = 1.0 / (points - 1) as f64;
        let mut atoms: Vec<Atom> = (0..points)
            .map(|i| {
                let w = if i == 0 || i == points - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let omega = i as f64 * h;
                Atom {
                    omega,
                    mass: w * h / 3.0 * density(omega),
                }
            })
            .filter(|a| a.mass > 0.0)
            .collect();
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if !(total > 0.0) {
            return Err(Error::domain("density has no mass on [0, 1]"));
        }
        for a in &mut atoms {
            a.mass /= total;
        }
        Ok(Self {
            atoms,
            r0: f64::NAN,
            symmetrized: false,
        })
    }
}

/// Equal-mass atoms at the angular components of points with `r > r0`.
/// With `symmetrize`, each atom `w` is split into `w` and `1 - w` at half
/// mass, which fixes the mean at exactly 1/2.
pub fn estimate_angular_measure(points: &[PickandsPoint], r0: f64, symmetrize: bool) -> Result<AngularMeasure> {
    let kept: Vec<f64> = points.iter().filter(|p| p.r > r0).map(|p| p.omega).collect();
    estimate_from_angles(&kept, r0, symmetrize, MIN_RETAINED)
}

fn estimate_from_angles(omegas: &[f64], r0: f64, symmetrize: bool, min: usize) -> Result<AngularMeasure> {
    if omegas.len() < min {
        return Err(Error::TooFewSamples {
            what: "angular measure (points beyond the radial cut-off)",
            needed: min,
            got: omegas.len(),
        });
    }
    let k = omegas.len() as f64;
    let atoms = if symmetrize {
        omegas
            .iter()
            .flat_map(|&w| {
                let (lo, hi) = mirror(w);
                let m = 0.5 / k;
                // Keep the original angle first.
                if w >= 0.5 {
                    [Atom { omega: hi, mass: m }, Atom { omega: lo, mass: m }]
                } else {
                    [Atom { omega: lo, mass: m }, Atom { omega: hi, mass: m }]
                }
            })
            .collect()
    } else {
        omegas.iter().map(|&w| Atom { omega: w, mass: 1.0 / k }).collect()
    };
    Ok(AngularMeasure {
        atoms,
        r0,
        symmetrized: symmetrize,
    })
}

/// Builds a measure directly from angles, bypassing the radial filter.
/// Intended for tests and for callers that filter themselves.
pub fn angular_measure_from_angles(omegas: &[f64], symmetrize: bool) -> Result<AngularMeasure> {
    estimate_from_angles(omegas, f64::NEG_INFINITY, symmetrize, 1)
}

/// `2 * sum_j m_j * max(w_j / x, (1 - w_j) / y)` on positive Fréchet scale.
pub fn exponent_measure(x_tilde: f64, y_tilde: f64, h: &AngularMeasure) -> f64 {
    let (ix, iy) = (1.0 / x_tilde, 1.0 / y_tilde);
    2.0 * h
        .atoms
        .iter()
        .map(|a| a.mass * (a.omega * ix).max((1.0 - a.omega) * iy))
        .sum::<f64>()
}

/// The same sum written on the negative coordinates `-x/n`, `-y/n` with a
/// leading `-2`. The max of negative ratios is minus a min, so this equals
/// `n * (1/x + 1/y - V)` for a measure with mean 1/2, not `V`.
pub fn exponent_measure_negative_coordinates(x_tilde: f64, y_tilde: f64, n: usize, h: &AngularMeasure) -> f64 {
    let nf = n as f64;
    let (cx, cy) = (-x_tilde / nf, -y_tilde / nf);
    -2.0 * h
        .atoms
        .iter()
        .map(|a| a.mass * (a.omega / cx).max((1.0 - a.omega) / cy))
        .sum::<f64>()
}

pub fn g_poisson(x_tilde: f64, y_tilde: f64, h: &AngularMeasure) -> f64 {
    (-exponent_measure(x_tilde, y_tilde, h)).exp()
}

/// Triangular-kernel estimate of the angular density, reflected at 0 and 1.
pub fn smoothed_angular_density(omega: f64, h: &AngularMeasure, bandwidth: f64) -> f64 {
    let k = |d: f64| {
        let u = (d / bandwidth).abs();
        if u < 1.0 {
            (1.0 - u) / bandwidth
        } else {
            0.0
        }
    };
    let total = h.total_mass();
    h.atoms
        .iter()
        .map(|a| a.mass * (k(omega - a.omega) + k(omega + a.omega) + k(omega - (2.0 - a.omega))))
        .sum::<f64>()
        / total
}

/// Point-process intensity `2 / r^2` times the smoothed angular density.
pub fn intensity_density(r: f64, omega: f64, h: &AngularMeasure) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::domain("intensity is singular at r = 0"));
    }
    Ok(2.0 / (r * r) * smoothed_angular_density(omega, h, SMOOTHING_BANDWIDTH))
}

/// Exponent measure of a continuous angular density by adaptive quadrature.
pub fn exponent_measure_of_density(x_tilde: f64, y_tilde: f64, density: impl Fn(f64) -> f64) -> f64 {
    let split = x_tilde / (x_tilde + y_tilde);
    let f = |w: f64| density(w) * (w / x_tilde).max((1.0 - w) / y_tilde);
    2.0 * (quadrature::integrate(f, 0.0, split, 1e-13, 1e-11) + quadrature::integrate(f, split, 1.0, 1e-13, 1e-11))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic;

    fn atoms(v: &[(f64, f64)]) -> AngularMeasure {
        AngularMeasure {
            atoms: v.iter().map(|&(omega, mass)| Atom { omega, mass }).collect(),
            r0: -1.0,
            symmetrized: false,
        }
    }

    #[test]
    fn estimation_examples() {
        let h = angular_measure_from_angles(&[0.3, 0.7], false).unwrap();
        assert_eq!(h.atoms, vec![Atom { omega: 0.3, mass: 0.5 }, Atom { omega: 0.7, mass: 0.5 }]);
        assert!((h.mean() - 0.5).abs() < 1e-15);
        let s = angular_measure_from_angles(&[0.2], true).unwrap();
        assert_eq!(s.atoms.len(), 2);
        assert!((s.atoms[0].omega - 0.2).abs() < 1e-16 && (s.atoms[1].omega - 0.8).abs() < 1e-16);
        assert_eq!(s.atoms[0].mass, 0.5);
        assert_eq!(s.mean(), 0.5);
    }

    #[test]
    fn radial_filter_and_floor() {
        let pts: Vec<PickandsPoint> = (0..100)
            .map(|i| PickandsPoint { omega: (i as f64 + 0.5) / 100.0, r: -(i as f64) / 100.0 })
            .collect();
        let h = estimate_angular_measure(&pts, -0.5, false).unwrap();
        assert_eq!(h.atoms.len(), 50);
        let err = estimate_angular_measure(&pts, -0.2, false).unwrap_err();
        assert!(matches!(err, Error::TooFewSamples { got: 20, .. }));
    }

    #[test]
    fn symmetrized_mean_is_exactly_half() {
        let omegas: Vec<f64> = (0..997).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 * 0.93 + 0.011).collect();
        let s = angular_measure_from_angles(&omegas, true).unwrap();
        assert_eq!(s.mean(), 0.5);
    }

    #[test]
    fn exponent_measure_examples() {
        assert_eq!(exponent_measure(1.0, 1.0, &atoms(&[(0.5, 1.0)])), 1.0);
        let ind = atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!((exponent_measure(2.0, 4.0, &ind) - 0.75).abs() < 1e-15);
        assert!((g_poisson(2.0, 4.0, &ind) - (-0.75f64).exp()).abs() < 1e-15);
        assert!((g_poisson(1.0, 1.0, &atoms(&[(0.5, 1.0)])) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(g_poisson(1e300, 1e300, &ind) == 1.0);
    }

    #[test]
    fn discretized_logistic_matches_closed_form() {
        let h = AngularMeasure::from_density(|w| logistic::angular_density(w, 0.5), 2001).unwrap();
        assert!((exponent_measure(1.0, 1.0, &h) - 2f64.sqrt()).abs() < 1e-3);
        let q = exponent_measure_of_density(1.0, 1.0, |w| logistic::angular_density(w, 0.5));
        assert!((q - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn homogeneity_and_margins() {
        let h = angular_measure_from_angles(&[0.1, 0.35, 0.5, 0.8], true).unwrap();
        let v = exponent_measure(0.7, 2.2, &h);
        assert!((exponent_measure(7.0, 22.0, &h) - v / 10.0).abs() < 1e-15);
        assert!((exponent_measure(0.7, f64::INFINITY, &h) - 1.0 / 0.7).abs() < 1e-14);
    }

    #[test]
    fn negative_coordinate_reading() {
        let h = angular_measure_from_angles(&[0.1, 0.35, 0.5, 0.8], true).unwrap();
        let (x, y, n) = (0.7, 2.2, 13);
        let v = exponent_measure(x, y, &h);
        let lit = exponent_measure_negative_coordinates(x, y, n, &h);
        assert!((lit - n as f64 * (1.0 / x + 1.0 / y - v)).abs() < 1e-12);
    }

    #[test]
    fn intensity_examples() {
        let grid: Vec<f64> = (0..20001).map(|i| i as f64 / 20000.0).collect();
        let u = angular_measure_from_angles(&grid, false).unwrap();
        let a = intensity_density(-1.0, 0.5, &u).unwrap();
        assert!((a - 2.0).abs() < 1e-3);
        let b = intensity_density(-2.0, 0.5, &u).unwrap();
        assert!((b - 0.5).abs() < 1e-3);
        assert!((a - 4.0 * b).abs() < 1e-12);
        // Reflection keeps the boundary density near 1.
        assert!((intensity_density(-1.0, 0.0, &u).unwrap() - 2.0).abs() < 1e-2);
        assert!(intensity_density(0.0, 0.5, &u).is_err());
    }
}
