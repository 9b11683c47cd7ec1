//! Empirical interpolation of the eddy-viscosity field: greedy basis and
//! magic-point selection over quadrature-point samples, and the triangular
//! online coefficient solve.

use serde::{Deserialize, Serialize};

use crate::assembly::{self, ElementTables};
use crate::error::{Error, Result};
use crate::quadrature::N_QP;

/// Smallest residual sup-norm still considered informative by the greedy.
const DEGENERACY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EimApproximation {
    /// basis fields q_1..q_M on quadrature points
    pub basis_fields: Vec<Vec<f64>>,
    /// flat quadrature indices (element * N_QP + qp) of the magic points
    pub magic_points: Vec<usize>,
    /// lower-triangular interpolation matrix with unit diagonal, stored by
    /// rows: tri[i][j] = q_{j+1}(x_{i+1}) for j <= i
    pub tri: Vec<Vec<f64>>,
    /// max sup-norm interpolation error over the training set, recorded at
    /// every iteration including the final one that met the tolerance
    pub training_errors: Vec<f64>,
}

impl EimApproximation {
    pub fn m(&self) -> usize {
        self.basis_fields.len()
    }

    /// Greedy build from realized training fields.
    pub fn build(training_fields: &[Vec<f64>], tol: f64, max_m: usize) -> Result<Self> {
        assert!(!training_fields.is_empty(), "empty EIM training set");
        assert!(tol > 0.0);
        let scale = training_fields
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));

        let mut residuals: Vec<Vec<f64>> = training_fields.to_vec();
        let mut approx = Self {
            basis_fields: Vec::new(),
            magic_points: Vec::new(),
            tri: Vec::new(),
            training_errors: Vec::new(),
        };

        loop {
            // argmax of the residual sup-norm over fields; lowest index wins ties
            let mut best_field = 0;
            let mut best_err = -1.0;
            for (i, r) in residuals.iter().enumerate() {
                let e = sup_norm(r);
                if e > best_err {
                    best_err = e;
                    best_field = i;
                }
            }
            approx.training_errors.push(best_err);
            if best_err < tol {
                break;
            }
            if approx.m() >= max_m {
                break;
            }
            if best_err <= DEGENERACY_FLOOR * scale.max(1.0) {
                return Err(Error::DegenerateSnapshot(best_err));
            }

            let r = &residuals[best_field];
            let mut best_point = 0;
            let mut best_val = -1.0;
            for (k, v) in r.iter().enumerate() {
                if v.abs() > best_val {
                    best_val = v.abs();
                    best_point = k;
                }
            }
            let pivot = r[best_point];
            let q: Vec<f64> = r.iter().map(|v| v / pivot).collect();

            // new triangular row: previous bases sampled at the new magic
            // point, then the unit diagonal; columns above the diagonal are
            // zero because every q_j vanishes at the earlier magic points
            let mut row: Vec<f64> = approx.basis_fields.iter().map(|b| b[best_point]).collect();
            row.push(1.0);
            approx.tri.push(row);
            approx.magic_points.push(best_point);
            approx.basis_fields.push(q.clone());

            // the enriched interpolant additionally matches each field at the
            // new magic point
            for res in residuals.iter_mut() {
                let c = res[best_point];
                if c != 0.0 {
                    for (rv, qv) in res.iter_mut().zip(&q) {
                        *rv -= c * qv;
                    }
                    res[best_point] = 0.0;
                }
            }
        }
        Ok(approx)
    }

    /// Solve the unit-diagonal lower-triangular interpolation system.
    pub fn coefficients(&self, values_at_magic: &[f64]) -> Vec<f64> {
        let m = self.m();
        assert_eq!(values_at_magic.len(), m);
        let mut sigma = vec![0.0; m];
        for i in 0..m {
            let mut v = values_at_magic[i];
            for j in 0..i {
                v -= self.tri[i][j] * sigma[j];
            }
            sigma[i] = v;
        }
        sigma
    }

    /// Reconstruct the interpolant field from coefficients.
    pub fn reconstruct(&self, sigma: &[f64]) -> Vec<f64> {
        let n = self.basis_fields.first().map(|b| b.len()).unwrap_or(0);
        let mut out = vec![0.0; n];
        for (s, q) in sigma.iter().zip(&self.basis_fields) {
            if *s != 0.0 {
                for (o, qv) in out.iter_mut().zip(q) {
                    *o += s * qv;
                }
            }
        }
        out
    }

    /// Values of a full field at the magic points.
    pub fn sample(&self, field: &[f64]) -> Vec<f64> {
        self.magic_points.iter().map(|&k| field[k]).collect()
    }

    /// Interpolate a field and return the sup-norm error.
    pub fn interpolation_sup_error(&self, field: &[f64]) -> f64 {
        let sigma = self.coefficients(&self.sample(field));
        let rec = self.reconstruct(&sigma);
        field
            .iter()
            .zip(&rec)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Precomputed fluctuation-gradient samplers of a velocity basis at the magic
/// points: turns reduced velocity coefficients into eddy-viscosity values at
/// the magic points at a cost independent of the full-order dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MagicPointSampler {
    /// grads[k][j] = (dx u1, dy u1, dx u2, dy u2) of Pi_h* basis_j at point k
    pub grads: Vec<Vec<[f64; 4]>>,
    pub n_h: usize,
}

impl MagicPointSampler {
    pub fn build(
        tables: &ElementTables,
        magic_points: &[usize],
        velocity_basis: &[Vec<f64>],
        n_h: usize,
    ) -> Self {
        let grads = magic_points
            .iter()
            .map(|&flat| {
                let (elem, qp) = (flat / N_QP, flat % N_QP);
                velocity_basis
                    .iter()
                    .map(|zeta| assembly::fluct_gradient_at(tables, elem, qp, zeta))
                    .collect()
            })
            .collect();
        Self { grads, n_h }
    }

    /// Append samplers for newly added basis vectors.
    pub fn extend(
        &mut self,
        tables: &ElementTables,
        magic_points: &[usize],
        new_basis: &[Vec<f64>],
    ) {
        for (k, &flat) in magic_points.iter().enumerate() {
            let (elem, qp) = (flat / N_QP, flat % N_QP);
            for zeta in new_basis {
                self.grads[k].push(assembly::fluct_gradient_at(tables, elem, qp, zeta));
            }
        }
    }

    /// Eddy-viscosity values at the magic points for a reduced velocity state.
    pub fn eddy_values(&self, coeffs: &[f64], height: f64, c_s: f64) -> Vec<f64> {
        self.grads
            .iter()
            .map(|per_basis| {
                let mut g = [0.0; 4];
                for (c, gb) in coeffs.iter().zip(per_basis) {
                    g[0] += c * gb[0];
                    g[1] += c * gb[1];
                    g[2] += c * gb[2];
                    g[3] += c * gb[3];
                }
                assembly::eddy_viscosity(g, height, c_s, self.n_h)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_fields() -> Vec<Vec<f64>> {
        // smooth parametric family sampled on 40 points
        let n = 40;
        (0..8)
            .map(|s| {
                let a = 0.3 + 0.2 * s as f64;
                (0..n)
                    .map(|i| {
                        let x = i as f64 / (n - 1) as f64;
                        (a * 6.0 * x).sin() + a * x * x
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_field_is_reproduced_exactly() {
        let fields = vec![toy_fields()[3].clone()];
        let eim = EimApproximation::build(&fields, 1e-12, 10).unwrap();
        assert_eq!(eim.m(), 1);
        assert!(eim.interpolation_sup_error(&fields[0]) < 1e-14);
    }

    #[test]
    fn exact_at_magic_points_and_monotone_errors() {
        let fields = toy_fields();
        let eim = EimApproximation::build(&fields, 1e-10, 20).unwrap();
        assert!(eim.m() >= 2);
        for f in &fields {
            let sigma = eim.coefficients(&eim.sample(f));
            let rec = eim.reconstruct(&sigma);
            for &k in &eim.magic_points {
                assert!((rec[k] - f[k]).abs() < 1e-12);
            }
        }
        for w in eim.training_errors.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "not monotone: {w:?}");
        }
        assert!(*eim.training_errors.last().unwrap() < 1e-10);
    }

    #[test]
    fn triangular_system_and_unit_vectors() {
        let fields = toy_fields();
        let eim = EimApproximation::build(&fields, 1e-8, 20).unwrap();
        // q_1 sampled at magic points -> (1, 0, ..., 0)
        let sig = eim.coefficients(&eim.sample(&eim.basis_fields[0]));
        assert!((sig[0] - 1.0).abs() < 1e-13);
        assert!(sig[1..].iter().all(|v| v.abs() < 1e-13));
        // zero field -> zero coefficients
        let z = vec![0.0; eim.m()];
        assert!(eim.coefficients(&z).iter().all(|v| *v == 0.0));
        // lower-triangular rows with unit diagonal
        for (i, row) in eim.tri.iter().enumerate() {
            assert_eq!(row.len(), i + 1);
            assert_eq!(row[i], 1.0);
        }
    }

    #[test]
    fn nested_hierarchy() {
        let fields = toy_fields();
        let big = EimApproximation::build(&fields, 1e-12, 6).unwrap();
        let small = EimApproximation::build(&fields, 1e-12, 3).unwrap();
        assert_eq!(small.m(), 3);
        assert!(big.m() > small.m());
        assert_eq!(&big.magic_points[..3], &small.magic_points[..]);
        for k in 0..3 {
            for (a, b) in big.basis_fields[k].iter().zip(&small.basis_fields[k]) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn degenerate_training_set_is_reported() {
        // two proportional fields: rank one, cannot reach a tiny tolerance
        let base: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin()).collect();
        let fields = vec![base.clone(), base.iter().map(|v| 2.0 * v).collect()];
        let err = EimApproximation::build(&fields, 1e-30, 10);
        assert!(matches!(err, Err(Error::DegenerateSnapshot(_))));
    }
}
