//! Constellations: sets of complex points with unit average power.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `M` complex constellation points normalized to unit average power,
/// `(1/M) * sum |x_i|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
}

impl Constellation {
    /// Scales `points` by one common positive factor so the average power is 1.
    ///
    /// Fails with [`Error::DegenerateConstellation`] when every point is zero.
    pub fn normalized(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty constellation".into()));
        }
        let mean_power = mean_power(&points);
        if mean_power <= 0.0 || !mean_power.is_finite() {
            return Err(Error::DegenerateConstellation);
        }
        let scale = mean_power.sqrt().recip();
        Ok(Self {
            points: points.into_iter().map(|p| p * scale).collect(),
        })
    }

    /// Wraps points that are already normalized, verifying unit average power
    /// within `tol`.
    pub fn from_unit_power(points: Vec<Complex64>, tol: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty constellation".into()));
        }
        let mean_power = mean_power(&points);
        if (mean_power - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "constellation mean power {mean_power:.12} deviates from 1 by more than {tol:e}"
            )));
        }
        Ok(Self { points })
    }

    /// Square QAM constellation for `m = 4, 16, 64, ...` (any power of 4),
    /// normalized to unit average power.
    pub fn square_qam(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m || !side.is_power_of_two() || m < 4 {
            return Err(Error::Config(format!(
                "square QAM requires M to be a power of 4, got {m}"
            )));
        }
        let mut points = Vec::with_capacity(m);
        for row in 0..side {
            for col in 0..side {
                // Odd-integer grid {-(side-1), ..., -1, 1, ..., side-1}.
                let re = 2.0 * col as f64 - (side as f64 - 1.0);
                let im = 2.0 * row as f64 - (side as f64 - 1.0);
                points.push(Complex64::new(re, im));
            }
        }
        Self::normalized(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.points)
    }

    /// Index of the point nearest to `y` in Euclidean distance, ties broken by
    /// lowest index.
    pub fn nearest(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn mean_power(points: &[Complex64]) -> f64 {
    points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_by_common_scale() {
        let raw = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.0, -2.0),
        ];
        let c = Constellation::normalized(raw).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ];
        for (p, e) in c.points().iter().zip(expected) {
            assert!((p - e).norm() < 1e-15);
        }
    }

    #[test]
    fn already_unit_points_unchanged() {
        let raw = vec![Complex64::new(1.0, 0.0); 8];
        let c = Constellation::normalized(raw).unwrap();
        for p in c.points() {
            assert_eq!(*p, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn all_zero_is_degenerate() {
        let raw = vec![Complex64::new(0.0, 0.0); 4];
        assert!(matches!(
            Constellation::normalized(raw),
            Err(Error::DegenerateConstellation)
        ));
    }

    #[test]
    fn qam_is_unit_power() {
        for m in [4, 16, 64, 256] {
            let c = Constellation::square_qam(m).unwrap();
            assert_eq!(c.len(), m);
            assert!((c.mean_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qam_rejects_non_square_sizes() {
        for m in [2, 8, 32, 128] {
            assert!(Constellation::square_qam(m).is_err());
        }
    }

    #[test]
    fn nearest_picks_closest_point() {
        let c = Constellation::square_qam(4).unwrap();
        let target = c.point(2) * 1.01;
        assert_eq!(c.nearest(target), 2);
    }
}
