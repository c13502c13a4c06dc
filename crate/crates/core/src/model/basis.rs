use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Spherical-Bessel-style radial basis: component `k = 1..=n` is
/// `sqrt(2/c) * sin(kπd/c) / d`.
pub fn rbf_expand(d: f64, cutoff: f64, n: usize) -> Result<Vec<f64>> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("radial basis needs d > 0, got {d}")));
    }
    if d > cutoff {
        return Err(Error::Domain(format!("distance {d} exceeds cutoff {cutoff}")));
    }
    let norm = (2.0 / cutoff).sqrt();
    Ok((1..=n)
        .map(|k| norm * (k as f64 * PI * d / cutoff).sin() / d)
        .collect())
}

/// `cos(l θ)` for `l = 0..n`.
pub fn angle_basis(theta: f64, n: usize) -> Vec<f64> {
    let theta = theta.clamp(0.0, PI);
    (0..n).map(|l| (l as f64 * theta).cos()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_at_cutoff() {
        for v in rbf_expand(20.0, 20.0, 16).unwrap() {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn small_distance_limit() {
        let c = 2.6;
        let v = rbf_expand(1e-9, c, 6).unwrap();
        for (k, x) in v.iter().enumerate() {
            let limit = (2.0 / c).sqrt() * (k + 1) as f64 * PI / c;
            assert!((x - limit).abs() < 1e-6 * limit);
        }
    }

    #[test]
    fn half_cutoff_first_component() {
        let c = 20.0;
        let v = rbf_expand(c / 2.0, c, 1).unwrap()[0];
        let expected = 2.0 * 2f64.sqrt() / c.powf(1.5);
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_distance() {
        assert!(rbf_expand(0.0, 2.6, 6).is_err());
        assert!(rbf_expand(-1.0, 2.6, 6).is_err());
        assert!(rbf_expand(3.0, 2.6, 6).is_err());
    }

    #[test]
    fn angle_basis_closed_forms() {
        assert!(angle_basis(0.0, 7).iter().all(|&v| v == 1.0));
        for (l, v) in angle_basis(PI, 7).iter().enumerate() {
            let expected = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - expected).abs() < 1e-12);
        }
        let expected = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (v, e) in angle_basis(PI / 2.0, 7).iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }
}
