//! Projection of the affine blocks, convective tensors and EIM kernel stacks
//! onto the reduced spaces, with incremental updates on enrichment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly;
use crate::eim::EimApproximation;
use crate::rb::space::ReducedBasisSpace;
use crate::sparse::{self, Csc};
use crate::system::FeSystem;

/// Dense reduced matrices and tensors. Tensor slices are indexed by the
/// advecting velocity basis (convection) or the EIM basis (Smagorinsky).
/// The lift blocks carry the temperature boundary data through the same
/// kernels.
#[derive(Clone, Serialize, Deserialize, Default)]
pub struct ReducedOperatorSet {
    pub a_ux: DMatrix<f64>,
    pub a_uy: DMatrix<f64>,
    pub a_tx: DMatrix<f64>,
    pub a_ty: DMatrix<f64>,
    /// N x 2N
    pub b_x: DMatrix<f64>,
    pub b_y: DMatrix<f64>,
    /// 2N x N (momentum rows, temperature columns)
    pub f_buoy: DMatrix<f64>,
    pub f_lift: DVector<f64>,
    pub a_t_lift_x: DVector<f64>,
    pub a_t_lift_y: DVector<f64>,
    /// per velocity-basis slice s: 2N x 2N
    pub c_ux: Vec<DMatrix<f64>>,
    pub c_uy: Vec<DMatrix<f64>>,
    /// per velocity-basis slice s: N x N
    pub c_tx: Vec<DMatrix<f64>>,
    pub c_ty: Vec<DMatrix<f64>>,
    /// N x 2N: entry (l, s) = c(zeta_s, lift, phi_l)
    pub c_lift_x: DMatrix<f64>,
    pub c_lift_y: DMatrix<f64>,
    /// per EIM basis k: 2N x 2N
    pub s_ux: Vec<DMatrix<f64>>,
    pub s_uy: Vec<DMatrix<f64>>,
    /// per EIM basis k: N x N
    pub s_tx: Vec<DMatrix<f64>>,
    pub s_ty: Vec<DMatrix<f64>>,
    /// per EIM basis k: N
    pub s_lift_x: Vec<DVector<f64>>,
    pub s_lift_y: Vec<DVector<f64>>,
}

/// Scalar-kernel pair (x-part, y-part) shared by the velocity and
/// temperature equations.
pub type KernelPair = (Csc, Csc);

/// Holds the full-order scalar kernels alongside the reduced set so that
/// enrichment only computes new rows, columns and slices.
pub struct OperatorProjector {
    /// per velocity-basis convection kernels KX(zeta_s), KY(zeta_s)
    conv_kernels: Vec<KernelPair>,
    /// per EIM-basis Smagorinsky kernels SX(q_k), SY(q_k); fixed after build
    eim_kernels: Vec<KernelPair>,
    lift: Vec<f64>,
    pub set: ReducedOperatorSet,
}

fn comp(v: &[f64], c: usize, n: usize) -> Vec<f64> {
    assembly::velocity_component(v, c, n)
}

/// c-kernel or s-kernel contraction for vector arguments:
/// sum over components of row^T K col.
fn vel_quad(k: &Csc, row: &[f64], col: &[f64], n: usize) -> f64 {
    sparse::quadform(k, &comp(row, 0, n), &comp(col, 0, n))
        + sparse::quadform(k, &comp(row, 1, n), &comp(col, 1, n))
}

impl OperatorProjector {
    pub fn new(sys: &FeSystem, eim: &EimApproximation) -> Self {
        let eim_kernels = eim
            .basis_fields
            .iter()
            .map(|q| assembly::smagorinsky_kernels(&sys.tables, &sys.layout, q))
            .collect();
        Self {
            conv_kernels: Vec::new(),
            eim_kernels,
            lift: sys.layout.lift_vector(),
            set: ReducedOperatorSet::default(),
        }
    }

    /// Extend all reduced operators for a grown space. Only entries touching
    /// the new basis vectors are computed; existing entries are kept.
    pub fn enrich(&mut self, sys: &FeSystem, space: &ReducedBasisSpace) {
        let n_nodes = sys.layout.n_p2_nodes;
        let nv_old = self.set.a_ux.nrows();
        let nt_old = self.set.a_tx.nrows();
        let np_old = self.set.b_x.nrows();
        let nv = space.n_vel();
        let nt = space.temperature.len();
        let np = space.pressure.len();
        assert!(nv >= nv_old && nt >= nt_old && np >= np_old);

        // kernels for the new advecting velocity vectors
        for s in nv_old..nv {
            self.conv_kernels.push(assembly::convection_kernels(
                &sys.tables,
                &sys.layout,
                &space.velocity[s],
            ));
        }

        let set = &mut self.set;
        let lift = &self.lift;

        // linear blocks
        grow(&mut set.a_ux, nv, nv, |i, j| {
            sparse::quadform(&sys.ops.a_ux, &space.velocity[i], &space.velocity[j])
        });
        grow(&mut set.a_uy, nv, nv, |i, j| {
            sparse::quadform(&sys.ops.a_uy, &space.velocity[i], &space.velocity[j])
        });
        grow(&mut set.a_tx, nt, nt, |i, j| {
            sparse::quadform(&sys.ops.a_tx, &space.temperature[i], &space.temperature[j])
        });
        grow(&mut set.a_ty, nt, nt, |i, j| {
            sparse::quadform(&sys.ops.a_ty, &space.temperature[i], &space.temperature[j])
        });
        grow(&mut set.b_x, np, nv, |l, j| {
            sparse::quadform(&sys.ops.b_x, &space.pressure[l], &space.velocity[j])
        });
        grow(&mut set.b_y, np, nv, |l, j| {
            sparse::quadform(&sys.ops.b_y, &space.pressure[l], &space.velocity[j])
        });
        grow(&mut set.f_buoy, nv, nt, |i, m| {
            sparse::quadform(&sys.ops.f_buoy, &space.velocity[i], &space.temperature[m])
        });
        grow_vec(&mut set.f_lift, nv, |i| {
            sparse::quadform(&sys.ops.f_buoy, &space.velocity[i], lift)
        });
        grow_vec(&mut set.a_t_lift_x, nt, |l| {
            sparse::quadform(&sys.ops.a_tx, &space.temperature[l], lift)
        });
        grow_vec(&mut set.a_t_lift_y, nt, |l| {
            sparse::quadform(&sys.ops.a_ty, &space.temperature[l], lift)
        });

        // convective tensors: new slices in full, new rows/cols in old slices
        for s in 0..nv {
            let (kx, ky) = &self.conv_kernels[s];
            let fresh = s >= nv_old;
            if set.c_ux.len() <= s {
                set.c_ux.push(DMatrix::zeros(0, 0));
                set.c_uy.push(DMatrix::zeros(0, 0));
                set.c_tx.push(DMatrix::zeros(0, 0));
                set.c_ty.push(DMatrix::zeros(0, 0));
            }
            grow_from(&mut set.c_ux[s], nv, nv, fresh, |i, j| {
                vel_quad(kx, &space.velocity[i], &space.velocity[j], n_nodes)
            });
            grow_from(&mut set.c_uy[s], nv, nv, fresh, |i, j| {
                vel_quad(ky, &space.velocity[i], &space.velocity[j], n_nodes)
            });
            grow_from(&mut set.c_tx[s], nt, nt, fresh, |l, m| {
                sparse::quadform(kx, &space.temperature[l], &space.temperature[m])
            });
            grow_from(&mut set.c_ty[s], nt, nt, fresh, |l, m| {
                sparse::quadform(ky, &space.temperature[l], &space.temperature[m])
            });
        }
        grow(&mut set.c_lift_x, nt, nv, |l, s| {
            sparse::quadform(&self.conv_kernels[s].0, &space.temperature[l], lift)
        });
        grow(&mut set.c_lift_y, nt, nv, |l, s| {
            sparse::quadform(&self.conv_kernels[s].1, &space.temperature[l], lift)
        });

        // EIM stacks: slices are fixed in k, only rows/cols grow
        let m_eim = self.eim_kernels.len();
        for k in 0..m_eim {
            let (sx, sy) = &self.eim_kernels[k];
            if set.s_ux.len() <= k {
                set.s_ux.push(DMatrix::zeros(0, 0));
                set.s_uy.push(DMatrix::zeros(0, 0));
                set.s_tx.push(DMatrix::zeros(0, 0));
                set.s_ty.push(DMatrix::zeros(0, 0));
                set.s_lift_x.push(DVector::zeros(0));
                set.s_lift_y.push(DVector::zeros(0));
            }
            grow(&mut set.s_ux[k], nv, nv, |i, j| {
                vel_quad(sx, &space.velocity[i], &space.velocity[j], n_nodes)
            });
            grow(&mut set.s_uy[k], nv, nv, |i, j| {
                vel_quad(sy, &space.velocity[i], &space.velocity[j], n_nodes)
            });
            grow(&mut set.s_tx[k], nt, nt, |l, m| {
                sparse::quadform(sx, &space.temperature[l], &space.temperature[m])
            });
            grow(&mut set.s_ty[k], nt, nt, |l, m| {
                sparse::quadform(sy, &space.temperature[l], &space.temperature[m])
            });
            grow_vec(&mut set.s_lift_x[k], nt, |l| {
                sparse::quadform(sx, &space.temperature[l], lift)
            });
            grow_vec(&mut set.s_lift_y[k], nt, |l| {
                sparse::quadform(sy, &space.temperature[l], lift)
            });
        }
    }

    /// Access to the cached convection kernels (shared with the Riesz
    /// library so generators reuse the same full-order assemblies).
    pub fn conv_kernels(&self) -> &[KernelPair] {
        &self.conv_kernels
    }

    pub fn eim_kernels(&self) -> &[KernelPair] {
        &self.eim_kernels
    }
}

/// Recompute everything; the oracle against which incremental updates are
/// checked.
pub fn project_from_scratch(
    sys: &FeSystem,
    space: &ReducedBasisSpace,
    eim: &EimApproximation,
) -> ReducedOperatorSet {
    let mut p = OperatorProjector::new(sys, eim);
    p.enrich(sys, space);
    p.set
}

fn grow(m: &mut DMatrix<f64>, nr: usize, nc: usize, f: impl Fn(usize, usize) -> f64) {
    grow_from(m, nr, nc, false, f)
}

/// Resize and fill new entries; `fresh` forces a full fill (new slices).
fn grow_from(m: &mut DMatrix<f64>, nr: usize, nc: usize, fresh: bool, f: impl Fn(usize, usize) -> f64) {
    let (or_, oc) = (m.nrows(), m.ncols());
    let mut out = m.clone().resize(nr, nc, 0.0);
    for i in 0..nr {
        for j in 0..nc {
            if fresh || i >= or_ || j >= oc {
                out[(i, j)] = f(i, j);
            }
        }
    }
    *m = out;
}

fn grow_vec(v: &mut DVector<f64>, n: usize, f: impl Fn(usize) -> f64) {
    let old = v.len();
    let mut out = v.clone().resize_vertically(n, 0.0);
    for i in old..n {
        out[i] = f(i);
    }
    *v = out;
}
