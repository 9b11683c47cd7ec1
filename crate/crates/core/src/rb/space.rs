//! Reduced-basis spaces: velocity snapshots interleaved with pressure
//! supremizers, orthonormalized componentwise in the X inner product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParameterPoint;
use crate::sparse;

/// Rejection threshold for modified Gram-Schmidt: post-projection norm below
/// this fraction of the original norm signals a redundant snapshot.
const REDUNDANCY_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReducedBasisSpace {
    /// zeta_1 .. zeta_2N: snapshot and supremizer, interleaved per selection
    pub velocity: Vec<Vec<f64>>,
    pub temperature: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
    pub selected: Vec<ParameterPoint>,
}

impl ReducedBasisSpace {
    pub fn n(&self) -> usize {
        self.pressure.len()
    }

    pub fn n_vel(&self) -> usize {
        self.velocity.len()
    }
}

/// Append candidates to an orthonormal family by modified Gram-Schmidt (two
/// passes) in the given inner product. Errors on redundant candidates.
pub fn orthonormalize_append(
    basis: &mut Vec<Vec<f64>>,
    candidates: Vec<Vec<f64>>,
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<()> {
    for mut v in candidates {
        let norm0 = inner(&v, &v).max(0.0).sqrt();
        if norm0 == 0.0 {
            return Err(Error::RedundantSnapshot(0.0));
        }
        for _pass in 0..2 {
            for b in basis.iter() {
                let c = inner(&v, b);
                sparse::axpy(&mut v, -c, b);
            }
        }
        let norm = inner(&v, &v).max(0.0).sqrt();
        if norm < REDUNDANCY_RATIO * norm0 {
            return Err(Error::RedundantSnapshot(norm / norm0));
        }
        sparse::scale(&mut v, 1.0 / norm);
        basis.push(v);
    }
    Ok(())
}

/// Orthonormalize a family from scratch; the convenience form of
/// `orthonormalize_append`.
pub fn orthonormalize(
    vectors: &[Vec<f64>],
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let mut basis = Vec::with_capacity(vectors.len());
    orthonormalize_append(&mut basis, vectors.to_vec(), inner)?;
    Ok(basis)
}

/// Gram matrix of a family in the given inner product.
pub fn gram(
    basis: &[Vec<f64>],
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
) -> nalgebra::DMatrix<f64> {
    let n = basis.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| inner(&basis[i], &basis[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        sparse::dot(a, b)
    }

    #[test]
    fn gram_matrix_is_identity() {
        let vecs: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..12).map(|i| ((i * (k + 2)) as f64 * 0.41).sin()).collect())
            .collect();
        let basis = orthonormalize(&vecs, &euclid).unwrap();
        let g = gram(&basis, &euclid);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12, "G[{i}{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn orthonormal_input_is_unchanged() {
        let mut basis = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let before = basis.clone();
        orthonormalize_append(&mut basis, vec![vec![0.0, 0.0, 2.0]], &euclid).unwrap();
        for (a, b) in basis.iter().zip(&before) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-13);
            }
        }
        assert!((sparse::norm2(&basis[2]) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn duplicate_snapshot_is_rejected() {
        let mut basis = Vec::new();
        let v = vec![1.0, 2.0, 3.0];
        orthonormalize_append(&mut basis, vec![v.clone()], &euclid).unwrap();
        let err = orthonormalize_append(&mut basis, vec![v], &euclid);
        assert!(matches!(err, Err(Error::RedundantSnapshot(_))));
    }
}
