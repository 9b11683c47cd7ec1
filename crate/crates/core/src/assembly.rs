//! Assembly of the reference-domain operators: parameter-independent affine
//! blocks with their scalar coefficient functions of mu, the nonlinear
//! convective and VMS-Smagorinsky kernels, the pointwise eddy viscosity, and
//! the original-domain direct assembly used as the change-of-variables
//! oracle.

use crate::mesh::UniformMesh;
use crate::params::ParameterPoint;
use crate::quadrature::{self, N_QP};
use crate::sparse::{self, Csc};
use crate::spaces::{DofLayout, XNorm};

/// Per-element geometry evaluated at the quadrature points.
#[derive(Debug, Clone)]
pub struct ElemGeom {
    pub p2: [usize; 6],
    pub verts: [usize; 3],
    /// combined quadrature weights: rule weight * |det J| / ... such that
    /// integral over the element = sum_q w[q] * f(xy[q])
    pub w: [f64; N_QP],
    pub xy: [[f64; 2]; N_QP],
    /// physical gradients of the six P2 shapes at each quadrature point
    pub grad2: [[[f64; 2]; 6]; N_QP],
    /// physical gradients of the three P1 shapes (constant on the element)
    pub grad1: [[f64; 2]; 3],
    /// gradients of the fluctuation Pi_h* of each local P2 shape
    pub fluct_grad: [[[f64; 2]; 6]; N_QP],
}

/// Geometry tables for a whole mesh, on the reference square (`height = 1`)
/// or mapped to the original domain.
pub struct ElementTables {
    pub elems: Vec<ElemGeom>,
    /// P2 shape values at the quadrature points (element independent)
    pub val2: [[f64; 6]; N_QP],
    /// P1 shape values at the quadrature points
    pub val1: [[f64; 3]; N_QP],
}

impl ElementTables {
    pub fn new(mesh: &UniformMesh, layout: &DofLayout, height: f64) -> Self {
        let coords = mesh.mapped_vertices(height);
        let mut val2 = [[0.0; 6]; N_QP];
        let mut val1 = [[0.0; 3]; N_QP];
        for (q, p) in quadrature::QP_XY.iter().enumerate() {
            val2[q] = quadrature::p2_values(p[0], p[1]);
            val1[q] = quadrature::p1_values(p[0], p[1]);
        }
        let gp1 = quadrature::p1_gradients();
        let mut elems = Vec::with_capacity(mesh.n_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let (pa, pb, pc) = (coords[a], coords[b], coords[c]);
            let j00 = pb[0] - pa[0];
            let j01 = pc[0] - pa[0];
            let j10 = pb[1] - pa[1];
            let j11 = pc[1] - pa[1];
            let det = j00 * j11 - j01 * j10;
            // inverse transpose of J, for gradient pushforward
            let it00 = j11 / det;
            let it01 = -j10 / det;
            let it10 = -j01 / det;
            let it11 = j00 / det;
            let push = |g: [f64; 2]| [it00 * g[0] + it01 * g[1], it10 * g[0] + it11 * g[1]];

            let mut w = [0.0; N_QP];
            let mut xy = [[0.0; 2]; N_QP];
            let mut grad2 = [[[0.0; 2]; 6]; N_QP];
            let mut fluct_grad = [[[0.0; 2]; 6]; N_QP];
            let mut grad1 = [[0.0; 2]; 3];
            for k in 0..3 {
                grad1[k] = push(gp1[k]);
            }
            for q in 0..N_QP {
                let p = quadrature::QP_XY[q];
                w[q] = 0.5 * quadrature::QP_W[q] * det.abs();
                xy[q] = [
                    pa[0] + j00 * p[0] + j01 * p[1],
                    pa[1] + j10 * p[0] + j11 * p[1],
                ];
                let g2 = quadrature::p2_gradients(p[0], p[1]);
                for k in 0..6 {
                    grad2[q][k] = push(g2[k]);
                    fluct_grad[q][k] = if k < 3 {
                        [grad2[q][k][0] - grad1[k][0], grad2[q][k][1] - grad1[k][1]]
                    } else {
                        grad2[q][k]
                    };
                }
            }
            elems.push(ElemGeom {
                p2: layout.elem_p2[t],
                verts: *tri,
                w,
                xy,
                grad2,
                grad1,
                fluct_grad,
            });
        }
        Self { elems, val2, val1 }
    }
}

/// Smagorinsky eddy viscosity on the reference domain: the mapped-cell size
/// and the mapped gradient magnitude both carry the geometric parameter.
pub fn eddy_viscosity(grads: [f64; 4], height: f64, c_s: f64, n_h: usize) -> f64 {
    let [gx1, gy1, gx2, gy2] = grads;
    let h2 = height * height;
    let mag = (gx1 * gx1 + gy1 * gy1 / h2 + gx2 * gx2 + gy2 * gy2 / h2).sqrt();
    c_s * c_s * (h2 + 1.0) / ((n_h * n_h) as f64) * mag
}

/// Named affine blocks and nonlinear kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    AUx,
    AUy,
    ATx,
    ATy,
    BX,
    BY,
    FBuoy,
    CUx,
    CUy,
    CTx,
    CTy,
    SUx,
    SUy,
    STx,
    STy,
}

/// Scalar coefficient of each block as a function of the parameter.
pub fn theta(block: Block, mu: &ParameterPoint, pr: f64) -> f64 {
    let h = mu.height;
    match block {
        Block::AUx => pr * h,
        Block::AUy => pr / h,
        Block::ATx => h,
        Block::ATy => 1.0 / h,
        Block::BX => h,
        Block::BY => 1.0,
        Block::FBuoy => pr * mu.rayleigh * h,
        Block::CUx | Block::CTx => h,
        Block::CUy | Block::CTy => 1.0,
        Block::SUx => h,
        Block::SUy => 1.0 / h,
        Block::STx => h / pr,
        Block::STy => 1.0 / (pr * h),
    }
}

/// Parameter-independent matrices assembled once on the reference mesh.
///
/// Blocks are stored without their theta coefficients; the buoyancy block is
/// -int(theta v_2) so that theta_F = Pr*Ra*mu_g reproduces the original-domain
/// form.
pub struct AffineOperatorSet {
    pub a_ux: Csc,
    pub a_uy: Csc,
    pub a_tx: Csc,
    pub a_ty: Csc,
    /// rows: pressure, cols: velocity; entries -int(psi_l dx phi_j) on u1
    pub b_x: Csc,
    pub b_y: Csc,
    /// rows: velocity (v2 component), cols: temperature; entries -int(phi_m phi_i)
    pub f_buoy: Csc,
    pub mass_vel: Csc,
    pub mass_temp: Csc,
    pub m_pres: Csc,
    /// integrals of the P1 pressure basis (zero-mean constraint row)
    pub pres_integral: Vec<f64>,
}

impl AffineOperatorSet {
    pub fn xnorm(&self) -> XNorm {
        XNorm {
            k_vel: add_csc(&self.a_ux, &self.a_uy),
            k_temp: add_csc(&self.a_tx, &self.a_ty),
            m_pres: clone_csc(&self.m_pres),
        }
    }
}

pub fn clone_csc(a: &Csc) -> Csc {
    Csc::new(a.symbolic().to_owned().unwrap(), a.val().to_vec())
}

fn add_csc(a: &Csc, b: &Csc) -> Csc {
    let mut trips = Vec::with_capacity(a.compute_nnz() + b.compute_nnz());
    for m in [a, b] {
        let sym = m.symbolic();
        for col in 0..m.ncols() {
            let r = sym.col_range(col);
            for (row, v) in sym.row_idx()[r.clone()].iter().zip(&m.val()[r]) {
                trips.push((*row, col, *v));
            }
        }
    }
    sparse::csc_from_triplets(a.nrows(), a.ncols(), &trips)
}

/// Assemble all affine blocks on the given geometry tables.
pub fn assemble_affine(tables: &ElementTables, layout: &DofLayout) -> AffineOperatorSet {
    let np2 = layout.n_p2_nodes;
    let nvel = layout.n_vel;
    let ntemp = layout.n_temp;
    let npres = layout.n_pres;

    let mut ax = Vec::new();
    let mut ay = Vec::new();
    let mut mass = Vec::new();
    for e in &tables.elems {
        for q in 0..N_QP {
            let w = e.w[q];
            for i in 0..6 {
                let gi = e.grad2[q][i];
                let vi = tables.val2[q][i];
                for j in 0..6 {
                    let gj = e.grad2[q][j];
                    let vj = tables.val2[q][j];
                    ax.push((e.p2[i], e.p2[j], w * gj[0] * gi[0]));
                    ay.push((e.p2[i], e.p2[j], w * gj[1] * gi[1]));
                    mass.push((e.p2[i], e.p2[j], w * vj * vi));
                }
            }
        }
    }
    let a_tx = sparse::csc_from_triplets(ntemp, ntemp, &ax);
    let a_ty = sparse::csc_from_triplets(ntemp, ntemp, &ay);
    let mass_temp = sparse::csc_from_triplets(ntemp, ntemp, &mass);
    let expand = |trips: &[(usize, usize, f64)]| -> Csc {
        let mut out = Vec::with_capacity(2 * trips.len());
        for &(i, j, v) in trips {
            out.push((2 * i, 2 * j, v));
            out.push((2 * i + 1, 2 * j + 1, v));
        }
        sparse::csc_from_triplets(nvel, nvel, &out)
    };
    let a_ux = expand(&ax);
    let a_uy = expand(&ay);
    let mass_vel = expand(&mass);

    let mut bx = Vec::new();
    let mut by = Vec::new();
    let mut mp = Vec::new();
    let mut pres_integral = vec![0.0; npres];
    for e in &tables.elems {
        for q in 0..N_QP {
            let w = e.w[q];
            for l in 0..3 {
                let pl = tables.val1[q][l];
                pres_integral[e.verts[l]] += w * pl;
                for j in 0..6 {
                    let gj = e.grad2[q][j];
                    bx.push((e.verts[l], 2 * e.p2[j], -w * pl * gj[0]));
                    by.push((e.verts[l], 2 * e.p2[j] + 1, -w * pl * gj[1]));
                }
                for m in 0..3 {
                    mp.push((e.verts[l], e.verts[m], w * pl * tables.val1[q][m]));
                }
            }
        }
    }
    let b_x = sparse::csc_from_triplets(npres, nvel, &bx);
    let b_y = sparse::csc_from_triplets(npres, nvel, &by);
    let m_pres = sparse::csc_from_triplets(npres, npres, &mp);

    let mut fb = Vec::new();
    for e in &tables.elems {
        for q in 0..N_QP {
            let w = e.w[q];
            for i in 0..6 {
                let vi = tables.val2[q][i];
                for m in 0..6 {
                    fb.push((2 * e.p2[i] + 1, e.p2[m], -w * tables.val2[q][m] * vi));
                }
            }
        }
    }
    let f_buoy = sparse::csc_from_triplets(nvel, ntemp, &fb);

    let _ = np2;
    AffineOperatorSet {
        a_ux,
        a_uy,
        a_tx,
        a_ty,
        b_x,
        b_y,
        f_buoy,
        mass_vel,
        mass_temp,
        m_pres,
        pres_integral,
    }
}

/// Extract one velocity component as a scalar nodal vector.
pub fn velocity_component(vel: &[f64], comp: usize, n_nodes: usize) -> Vec<f64> {
    (0..n_nodes).map(|n| vel[2 * n + comp]).collect()
}

/// Scalar convection kernels for a frozen advecting velocity field:
/// KX[i][j] = int(w1 dx phi_j phi_i), KY[i][j] = int(w2 dy phi_j phi_i).
///
/// The same kernels serve the velocity equation (applied per component) and
/// the energy equation.
pub fn convection_kernels(tables: &ElementTables, layout: &DofLayout, vel: &[f64]) -> (Csc, Csc) {
    let n = layout.n_p2_nodes;
    let mut kx = Vec::new();
    let mut ky = Vec::new();
    for e in &tables.elems {
        let mut loc_x = [[0.0; 6]; 6];
        let mut loc_y = [[0.0; 6]; 6];
        for q in 0..N_QP {
            let w = e.w[q];
            let mut w1 = 0.0;
            let mut w2 = 0.0;
            for k in 0..6 {
                let v = tables.val2[q][k];
                w1 += vel[2 * e.p2[k]] * v;
                w2 += vel[2 * e.p2[k] + 1] * v;
            }
            for i in 0..6 {
                let vi = tables.val2[q][i];
                for j in 0..6 {
                    loc_x[i][j] += w * w1 * e.grad2[q][j][0] * vi;
                    loc_y[i][j] += w * w2 * e.grad2[q][j][1] * vi;
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                kx.push((e.p2[i], e.p2[j], loc_x[i][j]));
                ky.push((e.p2[i], e.p2[j], loc_y[i][j]));
            }
        }
    }
    (
        sparse::csc_from_triplets(n, n, &kx),
        sparse::csc_from_triplets(n, n, &ky),
    )
}

/// Scalar VMS-Smagorinsky kernels for a quadrature-point multiplier field:
/// SX[i][j] = int(q dx(Pi* phi_j) dx(Pi* phi_i)), SY likewise in y.
pub fn smagorinsky_kernels(tables: &ElementTables, layout: &DofLayout, q_field: &[f64]) -> (Csc, Csc) {
    let n = layout.n_p2_nodes;
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    for (ei, e) in tables.elems.iter().enumerate() {
        let mut loc_x = [[0.0; 6]; 6];
        let mut loc_y = [[0.0; 6]; 6];
        for q in 0..N_QP {
            let wq = e.w[q] * q_field[ei * N_QP + q];
            if wq == 0.0 {
                continue;
            }
            for i in 0..6 {
                let gi = e.fluct_grad[q][i];
                for j in 0..6 {
                    let gj = e.fluct_grad[q][j];
                    loc_x[i][j] += wq * gj[0] * gi[0];
                    loc_y[i][j] += wq * gj[1] * gi[1];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                sx.push((e.p2[i], e.p2[j], loc_x[i][j]));
                sy.push((e.p2[i], e.p2[j], loc_y[i][j]));
            }
        }
    }
    (
        sparse::csc_from_triplets(n, n, &sx),
        sparse::csc_from_triplets(n, n, &sy),
    )
}

/// Eddy viscosity of the velocity fluctuation at every quadrature point.
pub fn eddy_field(
    tables: &ElementTables,
    _layout: &DofLayout,
    vel: &[f64],
    height: f64,
    c_s: f64,
    n_h: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; tables.elems.len() * N_QP];
    for (ei, e) in tables.elems.iter().enumerate() {
        for q in 0..N_QP {
            let mut g = [0.0; 4];
            for k in 0..6 {
                let gs = e.fluct_grad[q][k];
                let c1 = vel[2 * e.p2[k]];
                let c2 = vel[2 * e.p2[k] + 1];
                g[0] += c1 * gs[0];
                g[1] += c1 * gs[1];
                g[2] += c2 * gs[0];
                g[3] += c2 * gs[1];
            }
            out[ei * N_QP + q] = eddy_viscosity(g, height, c_s, n_h);
        }
    }
    out
}

/// Gradient of the fluctuation of both velocity components at one quadrature
/// point: (dx u1, dy u1, dx u2, dy u2).
pub fn fluct_gradient_at(tables: &ElementTables, elem: usize, qp: usize, vel: &[f64]) -> [f64; 4] {
    let e = &tables.elems[elem];
    let mut g = [0.0; 4];
    for k in 0..6 {
        let gs = e.fluct_grad[qp][k];
        let c1 = vel[2 * e.p2[k]];
        let c2 = vel[2 * e.p2[k] + 1];
        g[0] += c1 * gs[0];
        g[1] += c1 * gs[1];
        g[2] += c2 * gs[0];
        g[3] += c2 * gs[1];
    }
    g
}

/// Full nonlinear residual of the reference-domain problem at a given state,
/// with the Smagorinsky terms driven by the supplied eddy-viscosity
/// quadrature field (pass the exact field or an EIM reconstruction).
///
/// Components are returned as dual vectors over all (unconstrained) dofs;
/// restriction to test spaces happens at the caller.
pub struct ResidualVecs {
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
    pub continuity: Vec<f64>,
}

pub struct State<'a> {
    pub velocity: &'a [f64],
    /// temperature fluctuation
    pub temperature: &'a [f64],
    pub pressure: &'a [f64],
}

pub fn nonlinear_residual(
    tables: &ElementTables,
    layout: &DofLayout,
    ops: &AffineOperatorSet,
    state: &State,
    mu: &ParameterPoint,
    pr: f64,
    nu_qp: &[f64],
) -> ResidualVecs {
    let h = mu.height;
    let theta_total = {
        let lift = layout.lift_vector();
        let mut t = state.temperature.to_vec();
        sparse::axpy(&mut t, 1.0, &lift);
        t
    };
    let (kx, ky) = convection_kernels(tables, layout, state.velocity);
    let (sx, sy) = smagorinsky_kernels(tables, layout, nu_qp);

    let mut momentum = vec![0.0; layout.n_vel];
    sparse::matvec_add(&ops.a_ux, state.velocity, &mut momentum, theta(Block::AUx, mu, pr));
    sparse::matvec_add(&ops.a_uy, state.velocity, &mut momentum, theta(Block::AUy, mu, pr));
    sparse::matvec_transpose_add(&ops.b_x, state.pressure, &mut momentum, theta(Block::BX, mu, pr));
    sparse::matvec_transpose_add(&ops.b_y, state.pressure, &mut momentum, theta(Block::BY, mu, pr));
    sparse::matvec_add(&ops.f_buoy, &theta_total, &mut momentum, theta(Block::FBuoy, mu, pr));
    let u1 = velocity_component(state.velocity, 0, layout.n_p2_nodes);
    let u2 = velocity_component(state.velocity, 1, layout.n_p2_nodes);
    let mut acc1 = vec![0.0; layout.n_p2_nodes];
    let mut acc2 = vec![0.0; layout.n_p2_nodes];
    for (kernel, weight) in [
        (&kx, theta(Block::CUx, mu, pr)),
        (&ky, theta(Block::CUy, mu, pr)),
        (&sx, theta(Block::SUx, mu, pr)),
        (&sy, theta(Block::SUy, mu, pr)),
    ] {
        sparse::matvec_add(kernel, &u1, &mut acc1, weight);
        sparse::matvec_add(kernel, &u2, &mut acc2, weight);
    }
    for n in 0..layout.n_p2_nodes {
        momentum[2 * n] += acc1[n];
        momentum[2 * n + 1] += acc2[n];
    }

    let mut energy = vec![0.0; layout.n_temp];
    sparse::matvec_add(&ops.a_tx, &theta_total, &mut energy, theta(Block::ATx, mu, pr));
    sparse::matvec_add(&ops.a_ty, &theta_total, &mut energy, theta(Block::ATy, mu, pr));
    sparse::matvec_add(&kx, &theta_total, &mut energy, theta(Block::CTx, mu, pr));
    sparse::matvec_add(&ky, &theta_total, &mut energy, theta(Block::CTy, mu, pr));
    sparse::matvec_add(&sx, &theta_total, &mut energy, theta(Block::STx, mu, pr));
    sparse::matvec_add(&sy, &theta_total, &mut energy, theta(Block::STy, mu, pr));

    let mut continuity = vec![0.0; layout.n_pres];
    sparse::matvec_add(&ops.b_x, state.velocity, &mut continuity, h);
    sparse::matvec_add(&ops.b_y, state.velocity, &mut continuity, 1.0);

    ResidualVecs {
        momentum,
        energy,
        continuity,
    }
}

/// Operators assembled directly on the mapped (original) domain; the oracle
/// for the affine decomposition.
pub struct OriginalOperators {
    /// Pr * int(grad u : grad v) on the mapped domain
    pub diff_u: Csc,
    pub diff_t: Csc,
    /// -int((div u) p) on the mapped domain
    pub b: Csc,
    /// -Pr * Ra * int(theta v_2)
    pub f: Csc,
    /// convection kernels for a given advecting field expressed on the mapped
    /// domain (the coefficient vector is shared between both descriptions)
    pub conv: Csc,
    /// Smagorinsky kernel with the original-domain eddy viscosity
    /// (C_S h_K)^2 |grad_o(Pi* w)|, h_K the mapped cell diagonal
    pub smago: Csc,
}

/// Assemble the original-domain forms at a parameter directly, by mapping the
/// mesh through the transformation and integrating in original coordinates.
pub fn assemble_on_original(
    mesh: &UniformMesh,
    layout: &DofLayout,
    mu: &ParameterPoint,
    pr: f64,
    c_s: f64,
    advecting: &[f64],
) -> OriginalOperators {
    let tables = ElementTables::new(mesh, layout, mu.height);
    let nvel = layout.n_vel;
    let ntemp = layout.n_temp;
    let npres = layout.n_pres;

    let mut du = Vec::new();
    let mut dt = Vec::new();
    let mut b = Vec::new();
    let mut f = Vec::new();
    let mut conv = Vec::new();
    let mut smago = Vec::new();
    let h_k2 = (mu.height * mu.height + 1.0) / ((layout.n_h * layout.n_h) as f64);
    for e in &tables.elems {
        for q in 0..N_QP {
            let w = e.w[q];
            let mut w1 = 0.0;
            let mut w2 = 0.0;
            let mut grad_fluct = [0.0f64; 4];
            for k in 0..6 {
                let v = tables.val2[q][k];
                w1 += advecting[2 * e.p2[k]] * v;
                w2 += advecting[2 * e.p2[k] + 1] * v;
                let gs = e.fluct_grad[q][k];
                grad_fluct[0] += advecting[2 * e.p2[k]] * gs[0];
                grad_fluct[1] += advecting[2 * e.p2[k]] * gs[1];
                grad_fluct[2] += advecting[2 * e.p2[k] + 1] * gs[0];
                grad_fluct[3] += advecting[2 * e.p2[k] + 1] * gs[1];
            }
            // original-domain eddy viscosity: gradients here are already in
            // mapped coordinates, so no 1/mu_g factors
            let mag = (grad_fluct[0] * grad_fluct[0]
                + grad_fluct[1] * grad_fluct[1]
                + grad_fluct[2] * grad_fluct[2]
                + grad_fluct[3] * grad_fluct[3])
                .sqrt();
            let nu = c_s * c_s * h_k2 * mag;
            for i in 0..6 {
                let gi = e.grad2[q][i];
                let vi = tables.val2[q][i];
                let gsi = e.fluct_grad[q][i];
                for j in 0..6 {
                    let gj = e.grad2[q][j];
                    let vj = tables.val2[q][j];
                    let gsj = e.fluct_grad[q][j];
                    let lap = w * (gj[0] * gi[0] + gj[1] * gi[1]);
                    du.push((2 * e.p2[i], 2 * e.p2[j], pr * lap));
                    du.push((2 * e.p2[i] + 1, 2 * e.p2[j] + 1, pr * lap));
                    dt.push((e.p2[i], e.p2[j], lap));
                    f.push((2 * e.p2[i] + 1, e.p2[j], -pr * mu.rayleigh * w * vj * vi));
                    let cval = w * (w1 * gj[0] + w2 * gj[1]) * vi;
                    conv.push((e.p2[i], e.p2[j], cval));
                    let sval = w * nu * (gsj[0] * gsi[0] + gsj[1] * gsi[1]);
                    smago.push((e.p2[i], e.p2[j], sval));
                }
            }
            for l in 0..3 {
                let pl = tables.val1[q][l];
                for j in 0..6 {
                    let gj = e.grad2[q][j];
                    b.push((e.verts[l], 2 * e.p2[j], -w * pl * gj[0]));
                    b.push((e.verts[l], 2 * e.p2[j] + 1, -w * pl * gj[1]));
                }
            }
        }
    }
    OriginalOperators {
        diff_u: sparse::csc_from_triplets(nvel, nvel, &du),
        diff_t: sparse::csc_from_triplets(ntemp, ntemp, &dt),
        b: sparse::csc_from_triplets(npres, nvel, &b),
        f: sparse::csc_from_triplets(nvel, ntemp, &f),
        conv: sparse::csc_from_triplets(ntemp, ntemp, &conv),
        smago: sparse::csc_from_triplets(ntemp, ntemp, &smago),
    }
}

/// theta-weighted sum of two affine blocks, for oracle comparisons.
pub fn weighted_sum(a: &Csc, wa: f64, b: &Csc, wb: f64) -> Csc {
    let mut trips = Vec::with_capacity(a.compute_nnz() + b.compute_nnz());
    for (m, s) in [(a, wa), (b, wb)] {
        let sym = m.symbolic();
        for col in 0..m.ncols() {
            let r = sym.col_range(col);
            for (row, v) in sym.row_idx()[r.clone()].iter().zip(&m.val()[r]) {
                trips.push((*row, col, s * v));
            }
        }
    }
    sparse::csc_from_triplets(a.nrows(), a.ncols(), &trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;

    fn setup(n: usize) -> (UniformMesh, DofLayout, ElementTables, AffineOperatorSet) {
        let mesh = build_uniform_mesh(n).unwrap();
        let layout = DofLayout::new(&mesh).unwrap();
        let tables = ElementTables::new(&mesh, &layout, 1.0);
        let ops = assemble_affine(&tables, &layout);
        (mesh, layout, tables, ops)
    }

    #[test]
    fn eddy_viscosity_examples() {
        assert_eq!(eddy_viscosity([0.0; 4], 1.3, 0.1, 12), 0.0);
        let v = eddy_viscosity([1.0, 0.0, 0.0, 0.0], 1.0, 0.1, 50);
        assert!((v - 8.0e-6).abs() < 1e-20);
        // positive homogeneity in the gradient
        let a = eddy_viscosity([0.3, -0.2, 0.1, 0.9], 1.7, 0.1, 16);
        let b = eddy_viscosity([0.6, -0.4, 0.2, 1.8], 1.7, 0.1, 16);
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn stiffness_integrates_linear_fields_exactly() {
        // theta = 1 - x has squared H1 seminorm 1 on the unit square
        let (_, layout, tables, ops) = setup(8);
        let lift = layout.lift_vector();
        let xx = sparse::quadform(&ops.a_tx, &lift, &lift);
        let yy = sparse::quadform(&ops.a_ty, &lift, &lift);
        assert!((xx - 1.0).abs() < 1e-13);
        assert!(yy.abs() < 1e-13);
        // and the pressure mass of the constant 1 is the domain area
        let ones = vec![1.0; layout.n_pres];
        assert!((sparse::quadform(&ops.m_pres, &ones, &ones) - 1.0).abs() < 1e-13);
        assert!((ops.pres_integral.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn divergence_blocks_kill_constant_fields() {
        let (_, layout, _, ops) = setup(6);
        // u = (1, 2) everywhere: all derivatives vanish
        let mut u = vec![0.0; layout.n_vel];
        for n in 0..layout.n_p2_nodes {
            u[2 * n] = 1.0;
            u[2 * n + 1] = 2.0;
        }
        let mut out = vec![0.0; layout.n_pres];
        sparse::matvec_add(&ops.b_x, &u, &mut out, 1.0);
        sparse::matvec_add(&ops.b_y, &u, &mut out, 1.0);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vector_laplacian_matches_component_sum_at_reference() {
        let (_, layout, tables, ops) = setup(4);
        let orig = assemble_on_original(
            &build_uniform_mesh(4).unwrap(),
            &layout,
            &ParameterPoint::new(1.0, 1.0),
            0.71,
            0.1,
            &vec![0.0; layout.n_vel],
        );
        // Pr*(A_ux + A_uy) at mu_g = 1 equals the directly assembled Pr-scaled
        // vector Laplacian
        let sum = weighted_sum(&ops.a_ux, 0.71, &ops.a_uy, 0.71);
        let d = sparse::frobenius_diff(&sum, &orig.diff_u);
        assert!(d / sparse::frobenius(&orig.diff_u) < 1e-13);
        let _ = tables;
    }

    #[test]
    fn affine_decomposition_matches_original_assembly() {
        let (mesh, layout, _, ops) = setup(4);
        let pr = 0.71;
        let cs = 0.1;
        // a smooth in-space advecting field exercising the nonlinear kernels
        let mut w = vec![0.0; layout.n_vel];
        for (n, c) in layout.p2_coords.iter().enumerate() {
            w[2 * n] = (std::f64::consts::PI * c[0]).sin() * c[1];
            w[2 * n + 1] = c[0] * c[0] - 0.3 * c[1];
        }
        for &h in &[0.5, 1.0, 2.0] {
            let mu = ParameterPoint::new(1234.0, h);
            let orig = assemble_on_original(&mesh, &layout, &mu, pr, cs, &w);
            let tables = ElementTables::new(&mesh, &layout, 1.0);

            let du = weighted_sum(&ops.a_ux, theta(Block::AUx, &mu, pr), &ops.a_uy, theta(Block::AUy, &mu, pr));
            let rel = sparse::frobenius_diff(&du, &orig.diff_u) / sparse::frobenius(&orig.diff_u);
            assert!(rel < 1e-12, "velocity diffusion mu_g={h}: {rel}");

            let dt = weighted_sum(&ops.a_tx, theta(Block::ATx, &mu, pr), &ops.a_ty, theta(Block::ATy, &mu, pr));
            let rel = sparse::frobenius_diff(&dt, &orig.diff_t) / sparse::frobenius(&orig.diff_t);
            assert!(rel < 1e-12, "temperature diffusion mu_g={h}: {rel}");

            let b = weighted_sum(&ops.b_x, theta(Block::BX, &mu, pr), &ops.b_y, theta(Block::BY, &mu, pr));
            let rel = sparse::frobenius_diff(&b, &orig.b) / sparse::frobenius(&orig.b);
            assert!(rel < 1e-12, "divergence mu_g={h}: {rel}");

            let f = weighted_sum(&ops.f_buoy, theta(Block::FBuoy, &mu, pr), &ops.f_buoy, 0.0);
            let rel = sparse::frobenius_diff(&f, &orig.f) / sparse::frobenius(&orig.f);
            assert!(rel < 1e-12, "buoyancy mu_g={h}: {rel}");

            let (kx, ky) = convection_kernels(&tables, &layout, &w);
            let conv = weighted_sum(&kx, theta(Block::CUx, &mu, pr), &ky, theta(Block::CUy, &mu, pr));
            let rel = sparse::frobenius_diff(&conv, &orig.conv) / sparse::frobenius(&orig.conv);
            assert!(rel < 1e-12, "convection mu_g={h}: {rel}");

            let nu = eddy_field(&tables, &layout, &w, h, cs, layout.n_h);
            let (sx, sy) = smagorinsky_kernels(&tables, &layout, &nu);
            let smago = weighted_sum(&sx, theta(Block::SUx, &mu, pr), &sy, theta(Block::SUy, &mu, pr));
            let rel = sparse::frobenius_diff(&smago, &orig.smago) / sparse::frobenius(&orig.smago);
            assert!(rel < 1e-12, "smagorinsky mu_g={h}: {rel}");
        }
    }

    #[test]
    fn smagorinsky_vanishes_on_p1_advecting_fields() {
        let (_, layout, tables, _) = setup(5);
        // u linear in space: its fluctuation is zero, so nu_T = 0 while the
        // convection kernel is not
        let mut u = vec![0.0; layout.n_vel];
        for (n, c) in layout.p2_coords.iter().enumerate() {
            u[2 * n] = 0.3 * c[0] - c[1];
            u[2 * n + 1] = 1.2 * c[0];
        }
        let nu = eddy_field(&tables, &layout, &u, 1.0, 0.1, layout.n_h);
        assert!(nu.iter().all(|v| v.abs() < 1e-13));
        let (kx, _) = convection_kernels(&tables, &layout, &u);
        assert!(sparse::frobenius(&kx) > 1e-3);
    }

    #[test]
    fn eddy_term_is_nonnegative() {
        let (_, layout, tables, _) = setup(4);
        let mut w = vec![0.0; layout.n_vel];
        let mut v = vec![0.0; layout.n_vel];
        for (n, c) in layout.p2_coords.iter().enumerate() {
            w[2 * n] = (7.0 * c[0] * c[1]).sin();
            w[2 * n + 1] = (3.0 * c[0]).cos() * c[1];
            v[2 * n] = (5.0 * c[1]).sin() + c[0];
            v[2 * n + 1] = c[0] * c[1];
        }
        let nu = eddy_field(&tables, &layout, &w, 1.7, 0.1, layout.n_h);
        assert!(nu.iter().all(|x| *x >= 0.0));
        let (sx, sy) = smagorinsky_kernels(&tables, &layout, &nu);
        let v1 = velocity_component(&v, 0, layout.n_p2_nodes);
        let v2 = velocity_component(&v, 1, layout.n_p2_nodes);
        for &h in &[0.5, 1.0, 2.0] {
            let mu = ParameterPoint::new(1.0, h);
            let quad = theta(Block::SUx, &mu, 0.71)
                * (sparse::quadform(&sx, &v1, &v1) + sparse::quadform(&sx, &v2, &v2))
                + theta(Block::SUy, &mu, 0.71)
                    * (sparse::quadform(&sy, &v1, &v1) + sparse::quadform(&sy, &v2, &v2));
            assert!(quad >= 0.0);
        }
    }

    #[test]
    fn frobenius_norms_scale_with_refinement() {
        // stiffness entries are h-independent in 2D; mass should scale by h^2
        let (_, _, _, ops8) = setup(8);
        let (_, _, _, ops16) = setup(16);
        let s8 = sparse::frobenius(&ops8.a_tx);
        let s16 = sparse::frobenius(&ops16.a_tx);
        // nnz grows ~4x, entries same magnitude: Frobenius grows ~2x
        assert!(s16 / s8 > 1.5 && s16 / s8 < 2.5);
        let m8 = sparse::frobenius(&ops8.mass_temp);
        let m16 = sparse::frobenius(&ops16.mass_temp);
        // entries shrink h^2 = 4x, count grows 4x: Frobenius halves
        assert!(m16 / m8 > 0.35 && m16 / m8 < 0.65);
    }
}
