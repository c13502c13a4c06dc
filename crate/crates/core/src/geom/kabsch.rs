use nalgebra::{Matrix3, Vector3};

use super::Structure;
use crate::error::{Error, Result};

fn centered(points: impl Iterator<Item = Vector3<f64>> + Clone) -> Vec<Vector3<f64>> {
    let n = points.clone().count() as f64;
    let centroid = points.clone().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    points.map(|p| p - centroid).collect()
}

/// Minimum RMSD between corresponding atoms over proper rigid motions of `b`.
pub fn kabsch_rmsd(a: &Structure, b: &Structure) -> Result<f64> {
    if a.atoms.len() != b.atoms.len() {
        return Err(Error::Correspondence {
            left: a.atoms.len(),
            right: b.atoms.len(),
        });
    }
    let to_vec = |s: &Structure| {
        s.atoms
            .iter()
            .map(|atom| Vector3::from(atom.position))
            .collect::<Vec<_>>()
    };
    let pa = to_vec(a);
    let pb = to_vec(b);
    let ca = centered(pa.iter().copied());
    let cb = centered(pb.iter().copied());

    let cov: Matrix3<f64> = cb
        .iter()
        .zip(&ca)
        .fold(Matrix3::zeros(), |acc, (q, p)| acc + q * p.transpose());
    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();

    // Proper rotation only: flip the direction with the smallest singular value
    // when V U^T would be a reflection.
    let mut signs = [1.0, 1.0, 1.0];
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .unwrap_or(2);
        signs[smallest] = -1.0;
    }
    let rotation = v * Matrix3::from_diagonal(&Vector3::from(signs)) * u.transpose();

    let sum_sq: f64 = cb
        .iter()
        .zip(&ca)
        .map(|(q, p)| (rotation * q - p).norm_squared())
        .sum();
    Ok((sum_sq / ca.len() as f64).sqrt())
}
