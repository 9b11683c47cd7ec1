//! Full-order steady solver: semi-implicit pseudo-time marching of the
//! reference-domain problem, the pressure supremizer, and the steady residual
//! check.
//!
//! Splitting per step: the advecting velocity and the eddy viscosity are
//! frozen at the previous iterate; diffusion, pressure, incompressibility and
//! buoyancy are implicit. The energy equation then decouples from the
//! momentum/continuity saddle point, which is solved second with the fresh
//! temperature. The step size may grow geometrically (switched-evolution
//! continuation); `dt_growth = 1` recovers fixed-step marching.

use std::time::Instant;

use faer::sparse::linalg::solvers::SymbolicLu;
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use serde::{Deserialize, Serialize};

use crate::assembly::{self, Block};
use crate::error::{Error, Result};
use crate::params::ParameterPoint;
use crate::quadrature::N_QP;
use crate::sparse::{self, LuSolver};
use crate::spaces::FESolution;
use crate::system::FeSystem;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FomConfig {
    /// initial pseudo-time step
    pub dt: f64,
    /// geometric growth factor per step (1 = fixed step)
    pub dt_growth: f64,
    pub dt_max: f64,
    /// steady tolerance on the X-norm of the inter-iterate increment
    pub steady_tol: f64,
    pub max_steps: usize,
}

impl Default for FomConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            dt_growth: 1.05,
            dt_max: 10.0,
            steady_tol: 1e-10,
            max_steps: 20_000,
        }
    }
}

impl FomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.steady_tol > 0.0 && self.dt_growth >= 1.0 && self.dt_max >= self.dt
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "need dt > 0, steady_tol > 0, dt_growth >= 1, dt_max >= dt".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceLog {
    /// (step, increment X-norm, dt, seconds since start)
    pub rows: Vec<(usize, f64, f64, f64)>,
}

impl ConvergenceLog {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "step,increment,dt,wall_seconds")?;
        for (s, inc, dt, t) in &self.rows {
            writeln!(f, "{s},{inc:.16e},{dt:.16e},{t:.6}")?;
        }
        Ok(())
    }
}

/// Fixed sparsity patterns and geometry-local matrices for the two step
/// systems; built once per mesh and reused across solves and parameters.
pub struct StepPatterns {
    elem_ax: Vec<[[f64; 6]; 6]>,
    elem_ay: Vec<[[f64; 6]; 6]>,
    elem_mass: Vec<[[f64; 6]; 6]>,
    elem_bx: Vec<[[f64; 6]; 3]>,
    elem_by: Vec<[[f64; 6]; 3]>,
    energy_sym: SymbolicSparseColMat<usize>,
    energy_order: Argsort<usize>,
    energy_nnz: usize,
    energy_symlu: SymbolicLu<usize>,
    saddle_sym: SymbolicSparseColMat<usize>,
    saddle_order: Argsort<usize>,
    saddle_nnz: usize,
    saddle_symlu: SymbolicLu<usize>,
    n_saddle: usize,
}

impl StepPatterns {
    pub fn new(sys: &FeSystem) -> Result<Self> {
        let layout = &sys.layout;
        let tables = &sys.tables;
        let ne = tables.elems.len();
        let mut elem_ax = vec![[[0.0; 6]; 6]; ne];
        let mut elem_ay = vec![[[0.0; 6]; 6]; ne];
        let mut elem_mass = vec![[[0.0; 6]; 6]; ne];
        let mut elem_bx = vec![[[0.0; 6]; 3]; ne];
        let mut elem_by = vec![[[0.0; 6]; 3]; ne];
        for (ei, e) in tables.elems.iter().enumerate() {
            for q in 0..N_QP {
                let w = e.w[q];
                for i in 0..6 {
                    let gi = e.grad2[q][i];
                    let vi = tables.val2[q][i];
                    for j in 0..6 {
                        let gj = e.grad2[q][j];
                        elem_ax[ei][i][j] += w * gj[0] * gi[0];
                        elem_ay[ei][i][j] += w * gj[1] * gi[1];
                        elem_mass[ei][i][j] += w * tables.val2[q][j] * vi;
                    }
                }
                for l in 0..3 {
                    let pl = tables.val1[q][l];
                    for j in 0..6 {
                        let gj = e.grad2[q][j];
                        elem_bx[ei][l][j] += -w * pl * gj[0];
                        elem_by[ei][l][j] += -w * pl * gj[1];
                    }
                }
            }
        }

        // energy pattern: free temperature dofs
        let mut energy_pairs = Vec::new();
        for e in &tables.elems {
            for i in 0..6 {
                let fi = layout.temp_full_to_free[e.p2[i]];
                if fi == usize::MAX {
                    continue;
                }
                for j in 0..6 {
                    let fj = layout.temp_full_to_free[e.p2[j]];
                    if fj == usize::MAX {
                        continue;
                    }
                    energy_pairs.push(Pair::new(fi, fj));
                }
            }
        }
        let nt = layout.temp_free.len();
        let energy_nnz = energy_pairs.len();
        let (energy_sym, energy_order) =
            SymbolicSparseColMat::try_new_from_indices(nt, nt, &energy_pairs)
                .map_err(|e| Error::LinearSolveFailure(format!("energy pattern: {e:?}")))?;
        let energy_symlu = SymbolicLu::try_new(energy_sym.as_ref())
            .map_err(|e| Error::LinearSolveFailure(format!("energy symbolic lu: {e:?}")))?;

        // saddle pattern: free velocity dofs, all pressures, one multiplier
        let nu = layout.vel_free.len();
        let np = layout.n_pres;
        let n_saddle = nu + np + 1;
        let mut saddle_pairs = Vec::new();
        for e in &tables.elems {
            for i in 0..6 {
                for j in 0..6 {
                    for c in 0..2 {
                        let fi = layout.vel_full_to_free[2 * e.p2[i] + c];
                        let fj = layout.vel_full_to_free[2 * e.p2[j] + c];
                        if fi != usize::MAX && fj != usize::MAX {
                            saddle_pairs.push(Pair::new(fi, fj));
                        }
                    }
                }
            }
            for l in 0..3 {
                let lp = nu + e.verts[l];
                for j in 0..6 {
                    for c in 0..2 {
                        let fj = layout.vel_full_to_free[2 * e.p2[j] + c];
                        if fj != usize::MAX {
                            saddle_pairs.push(Pair::new(fj, lp));
                            saddle_pairs.push(Pair::new(lp, fj));
                        }
                    }
                }
            }
        }
        for l in 0..np {
            saddle_pairs.push(Pair::new(nu + np, nu + l));
            saddle_pairs.push(Pair::new(nu + l, nu + np));
        }
        let saddle_nnz = saddle_pairs.len();
        let (saddle_sym, saddle_order) =
            SymbolicSparseColMat::try_new_from_indices(n_saddle, n_saddle, &saddle_pairs)
                .map_err(|e| Error::LinearSolveFailure(format!("saddle pattern: {e:?}")))?;
        let saddle_symlu = SymbolicLu::try_new(saddle_sym.as_ref())
            .map_err(|e| Error::LinearSolveFailure(format!("saddle symbolic lu: {e:?}")))?;

        Ok(Self {
            elem_ax,
            elem_ay,
            elem_mass,
            elem_bx,
            elem_by,
            energy_sym,
            energy_order,
            energy_nnz,
            energy_symlu,
            saddle_sym,
            saddle_order,
            saddle_nnz,
            saddle_symlu,
            n_saddle,
        })
    }
}

struct StepMatrices {
    energy: SparseColMat<usize, f64>,
    saddle: SparseColMat<usize, f64>,
    /// per-step kernel action on the lift, restricted to free temperature dofs
    energy_lift_rhs: Vec<f64>,
}

/// One pass over the elements: builds both step matrices and the energy
/// lift right-hand side for the current frozen state.
#[allow(clippy::too_many_arguments)]
fn build_step_matrices(
    sys: &FeSystem,
    pat: &StepPatterns,
    mu: &ParameterPoint,
    pr: f64,
    dt: f64,
    vel: &[f64],
    nu_qp: &[f64],
    lift: &[f64],
) -> Result<StepMatrices> {
    let layout = &sys.layout;
    let tables = &sys.tables;
    let h = mu.height;
    let th_ax = assembly::theta(Block::ATx, mu, pr);
    let th_ay = assembly::theta(Block::ATy, mu, pr);
    let th_cx = assembly::theta(Block::CTx, mu, pr);
    let th_cy = assembly::theta(Block::CTy, mu, pr);
    let th_sx = assembly::theta(Block::STx, mu, pr);
    let th_sy = assembly::theta(Block::STy, mu, pr);
    let th_aux = assembly::theta(Block::AUx, mu, pr);
    let th_auy = assembly::theta(Block::AUy, mu, pr);
    let th_sux = assembly::theta(Block::SUx, mu, pr);
    let th_suy = assembly::theta(Block::SUy, mu, pr);
    let th_bx = assembly::theta(Block::BX, mu, pr);
    let th_by = assembly::theta(Block::BY, mu, pr);
    let mass_scale = h / dt;

    let mut energy_vals = Vec::with_capacity(pat.energy_nnz);
    let mut saddle_vals = Vec::with_capacity(pat.saddle_nnz);
    let mut lift_rhs_full = vec![0.0; layout.n_temp];

    let np = layout.n_pres;
    for (ei, e) in tables.elems.iter().enumerate() {
        // frozen-state kernels on this element
        let mut kx = [[0.0; 6]; 6];
        let mut ky = [[0.0; 6]; 6];
        let mut sx = [[0.0; 6]; 6];
        let mut sy = [[0.0; 6]; 6];
        for q in 0..N_QP {
            let w = e.w[q];
            let mut w1 = 0.0;
            let mut w2 = 0.0;
            for k in 0..6 {
                let v = tables.val2[q][k];
                w1 += vel[2 * e.p2[k]] * v;
                w2 += vel[2 * e.p2[k] + 1] * v;
            }
            let wnu = w * nu_qp[ei * N_QP + q];
            for i in 0..6 {
                let vi = tables.val2[q][i];
                let gsi = e.fluct_grad[q][i];
                for j in 0..6 {
                    let gj = e.grad2[q][j];
                    let gsj = e.fluct_grad[q][j];
                    kx[i][j] += w * w1 * gj[0] * vi;
                    ky[i][j] += w * w2 * gj[1] * vi;
                    sx[i][j] += wnu * gsj[0] * gsi[0];
                    sy[i][j] += wnu * gsj[1] * gsi[1];
                }
            }
        }

        let ax = &pat.elem_ax[ei];
        let ay = &pat.elem_ay[ei];
        let ms = &pat.elem_mass[ei];
        for i in 0..6 {
            let gi_free = layout.temp_full_to_free[e.p2[i]];
            for j in 0..6 {
                let val_energy = th_ax * ax[i][j]
                    + th_ay * ay[i][j]
                    + mass_scale * ms[i][j]
                    + th_cx * kx[i][j]
                    + th_cy * ky[i][j]
                    + th_sx * sx[i][j]
                    + th_sy * sy[i][j];
                if gi_free != usize::MAX {
                    // lift contribution to the rhs: everything but the mass
                    // term (the lift is stationary in pseudo-time)
                    lift_rhs_full[e.p2[i]] += val_energy_lift_part(
                        th_ax, th_ay, th_cx, th_cy, th_sx, th_sy, ax[i][j], ay[i][j], kx[i][j],
                        ky[i][j], sx[i][j], sy[i][j],
                    ) * lift[e.p2[j]];
                    if layout.temp_full_to_free[e.p2[j]] != usize::MAX {
                        energy_vals.push(val_energy);
                    }
                }
                let val_saddle = th_aux * ax[i][j]
                    + th_auy * ay[i][j]
                    + mass_scale * ms[i][j]
                    + th_cx * kx[i][j]
                    + th_cy * ky[i][j]
                    + th_sux * sx[i][j]
                    + th_suy * sy[i][j];
                for c in 0..2 {
                    let fi = layout.vel_full_to_free[2 * e.p2[i] + c];
                    let fj = layout.vel_full_to_free[2 * e.p2[j] + c];
                    if fi != usize::MAX && fj != usize::MAX {
                        saddle_vals.push(val_saddle);
                    }
                }
            }
        }
        for l in 0..3 {
            for j in 0..6 {
                for c in 0..2 {
                    let fj = layout.vel_full_to_free[2 * e.p2[j] + c];
                    if fj != usize::MAX {
                        let v = if c == 0 {
                            th_bx * pat.elem_bx[ei][l][j]
                        } else {
                            th_by * pat.elem_by[ei][l][j]
                        };
                        saddle_vals.push(v);
                        saddle_vals.push(v);
                    }
                }
            }
        }
    }
    for l in 0..np {
        saddle_vals.push(sys.ops.pres_integral[l]);
        saddle_vals.push(sys.ops.pres_integral[l]);
    }
    debug_assert_eq!(energy_vals.len(), pat.energy_nnz);
    debug_assert_eq!(saddle_vals.len(), pat.saddle_nnz);

    let energy = SparseColMat::new_from_argsort(
        pat.energy_sym.clone(),
        &pat.energy_order,
        &energy_vals,
    )
    .map_err(|e| Error::LinearSolveFailure(format!("energy values: {e:?}")))?;
    let saddle = SparseColMat::new_from_argsort(
        pat.saddle_sym.clone(),
        &pat.saddle_order,
        &saddle_vals,
    )
    .map_err(|e| Error::LinearSolveFailure(format!("saddle values: {e:?}")))?;

    let energy_lift_rhs = sys.temp_to_free(&lift_rhs_full);
    Ok(StepMatrices {
        energy,
        saddle,
        energy_lift_rhs,
    })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn val_energy_lift_part(
    th_ax: f64,
    th_ay: f64,
    th_cx: f64,
    th_cy: f64,
    th_sx: f64,
    th_sy: f64,
    ax: f64,
    ay: f64,
    kx: f64,
    ky: f64,
    sx: f64,
    sy: f64,
) -> f64 {
    th_ax * ax + th_ay * ay + th_cx * kx + th_cy * ky + th_sx * sx + th_sy * sy
}

/// Steady solve by semi-implicit pseudo-time marching from the conduction
/// state.
pub fn solve_fom(
    sys: &FeSystem,
    pat: &StepPatterns,
    mu: &ParameterPoint,
    pr: f64,
    c_s: f64,
    config: &FomConfig,
) -> Result<(FESolution, ConvergenceLog)> {
    config.validate()?;
    let layout = &sys.layout;
    let start = Instant::now();
    let lift = layout.lift_vector();
    let nu_free_n = layout.vel_free.len();
    let np = layout.n_pres;

    let mut u = vec![0.0; layout.n_vel];
    let mut tfluct = vec![0.0; layout.n_temp];
    let mut p = vec![0.0; np];
    let mut dt = config.dt;
    let mut log = ConvergenceLog::default();
    let th_f = assembly::theta(Block::FBuoy, mu, pr);

    for step in 0..config.max_steps {
        let nu_qp = assembly::eddy_field(&sys.tables, layout, &u, mu.height, c_s, layout.n_h);
        let mats = build_step_matrices(sys, pat, mu, pr, dt, &u, &nu_qp, &lift)?;

        // energy step
        let mut rhs_t_full = vec![0.0; layout.n_temp];
        sparse::matvec_add(&sys.ops.mass_temp, &tfluct, &mut rhs_t_full, mu.height / dt);
        let mut rhs_t = sys.temp_to_free(&rhs_t_full);
        sparse::axpy(&mut rhs_t, -1.0, &mats.energy_lift_rhs);
        let energy_lu = LuSolver::with_symbolic(pat.energy_symlu.clone(), &mats.energy)?;
        let t_new_free = energy_lu.solve(&rhs_t);
        let t_new = sys.temp_to_full(&t_new_free);

        // momentum/continuity step with the fresh temperature
        let mut theta_total = t_new.clone();
        sparse::axpy(&mut theta_total, 1.0, &lift);
        let mut buoy_full = vec![0.0; layout.n_vel];
        sparse::matvec_add(&sys.ops.f_buoy, &theta_total, &mut buoy_full, th_f);
        let mut rhs_s = vec![0.0; pat.n_saddle];
        let mut mass_u_full = vec![0.0; layout.n_vel];
        sparse::matvec_add(&sys.ops.mass_vel, &u, &mut mass_u_full, mu.height / dt);
        for (k, &i) in layout.vel_free.iter().enumerate() {
            rhs_s[k] = mass_u_full[i] - buoy_full[i];
        }
        let saddle_lu = LuSolver::with_symbolic(pat.saddle_symlu.clone(), &mats.saddle)?;
        let sol = saddle_lu.solve(&rhs_s);
        let u_new = sys.vel_to_full(&sol[..nu_free_n]);
        let mut p_new: Vec<f64> = sol[nu_free_n..nu_free_n + np].to_vec();
        sys.project_pressure_zero_mean(&mut p_new);

        // increment in the X-norm
        let du: Vec<f64> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
        let dtv: Vec<f64> = t_new.iter().zip(&tfluct).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = p_new.iter().zip(&p).map(|(a, b)| a - b).collect();
        let inc = sys.xnorm.x_norm(&du, &dtv, &dp);
        log.rows
            .push((step, inc, dt, start.elapsed().as_secs_f64()));

        u = u_new;
        tfluct = t_new;
        p = p_new;

        if inc < config.steady_tol {
            let solution = FESolution::new(*mu, u, tfluct, p, &sys.xnorm);
            return Ok((solution, log));
        }
        dt = (dt * config.dt_growth).min(config.dt_max);
    }
    Err(Error::NonConvergence {
        steps: config.max_steps,
        last_increment: log.rows.last().map(|r| r.1).unwrap_or(f64::NAN),
    })
}

/// Inner pressure supremizer: (grad T, grad v) = -mu_g (q, dx v1) - (q, dy v2).
pub fn solve_supremizer(sys: &FeSystem, pressure: &[f64], height: f64) -> Vec<f64> {
    let mut rhs_full = vec![0.0; sys.layout.n_vel];
    sparse::matvec_transpose_add(&sys.ops.b_x, pressure, &mut rhs_full, height);
    sparse::matvec_transpose_add(&sys.ops.b_y, pressure, &mut rhs_full, 1.0);
    let rhs = sys.vel_to_free(&rhs_full);
    let sol = sys.k_vel_solver.solve(&rhs);
    sys.vel_to_full(&sol)
}

/// Dual norm of the exact nonlinear residual at a state; the steady-state
/// quality measure.
pub fn steady_residual_dual_norm(
    sys: &FeSystem,
    sol: &FESolution,
    pr: f64,
    c_s: f64,
) -> f64 {
    let nu_qp = assembly::eddy_field(
        &sys.tables,
        &sys.layout,
        &sol.velocity,
        sol.parameter.height,
        c_s,
        sys.layout.n_h,
    );
    residual_dual_norm_with_field(sys, sol, pr, &nu_qp)
}

/// Dual norm of the residual with a caller-supplied eddy-viscosity field
/// (exact or EIM-reconstructed).
pub fn residual_dual_norm_with_field(
    sys: &FeSystem,
    sol: &FESolution,
    pr: f64,
    nu_qp: &[f64],
) -> f64 {
    let state = assembly::State {
        velocity: &sol.velocity,
        temperature: &sol.temperature,
        pressure: &sol.pressure,
    };
    let res = assembly::nonlinear_residual(
        &sys.tables,
        &sys.layout,
        &sys.ops,
        &state,
        &sol.parameter,
        pr,
        nu_qp,
    );
    let (_, n1) = sys.riesz_velocity(&res.momentum);
    let (_, n2) = sys.riesz_temperature(&res.energy);
    let (_, n3) = sys.riesz_pressure(&res.continuity);
    (n1 + n2 + n3).max(0.0).sqrt()
}

/// Discrete divergence residual: max over pressure test functions of
/// |b_x(u, q) + b_y(u, q)|.
pub fn divergence_residual(sys: &FeSystem, velocity: &[f64], height: f64) -> f64 {
    let mut out = vec![0.0; sys.layout.n_pres];
    sparse::matvec_add(&sys.ops.b_x, velocity, &mut out, height);
    sparse::matvec_add(&sys.ops.b_y, velocity, &mut out, 1.0);
    out.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
