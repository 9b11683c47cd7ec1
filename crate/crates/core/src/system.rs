//! The discretization context shared by every stage: mesh, dof layout,
//! geometry tables, affine operators, X-norm Gram matrices and their
//! factorizations on the constrained spaces.

use crate::assembly::{self, AffineOperatorSet, ElementTables};
use crate::error::Result;
use crate::mesh::{build_uniform_mesh, UniformMesh};
use crate::sparse::{self, Csc, SpdSolver};
use crate::spaces::{DofLayout, XNorm};

pub struct FeSystem {
    pub mesh: UniformMesh,
    pub layout: DofLayout,
    pub tables: ElementTables,
    pub ops: AffineOperatorSet,
    pub xnorm: XNorm,
    /// velocity stiffness restricted to free dofs (X Gram, supremizer matrix)
    pub k_vel_free: Csc,
    pub k_temp_free: Csc,
    pub k_vel_solver: SpdSolver,
    pub k_temp_solver: SpdSolver,
    pub m_pres_solver: SpdSolver,
    /// M_p^{-1} applied to the constant-1 vector, and 1^T M 1; used to remove
    /// pressure means in Riesz solves
    pub pres_mean_weight: Vec<f64>,
    pub pres_total_mass: f64,
}

impl FeSystem {
    pub fn new(n_h: usize) -> Result<Self> {
        let mesh = build_uniform_mesh(n_h)?;
        let layout = DofLayout::new(&mesh)?;
        let tables = ElementTables::new(&mesh, &layout, 1.0);
        let ops = assembly::assemble_affine(&tables, &layout);
        let xnorm = ops.xnorm();
        let k_vel_free = sparse::restrict(
            &xnorm.k_vel,
            &layout.vel_full_to_free,
            layout.vel_free.len(),
            &layout.vel_full_to_free,
            layout.vel_free.len(),
        );
        let k_temp_free = sparse::restrict(
            &xnorm.k_temp,
            &layout.temp_full_to_free,
            layout.temp_free.len(),
            &layout.temp_full_to_free,
            layout.temp_free.len(),
        );
        let k_vel_solver = SpdSolver::new(&k_vel_free)?;
        let k_temp_solver = SpdSolver::new(&k_temp_free)?;
        let m_pres_solver = SpdSolver::new(&ops.m_pres)?;
        let ones = vec![1.0; layout.n_pres];
        let pres_total_mass = sparse::quadform(&ops.m_pres, &ones, &ones);
        let pres_mean_weight = ops.pres_integral.clone();
        Ok(Self {
            mesh,
            layout,
            tables,
            ops,
            xnorm,
            k_vel_free,
            k_temp_free,
            k_vel_solver,
            k_temp_solver,
            m_pres_solver,
            pres_mean_weight,
            pres_total_mass,
        })
    }

    pub fn n_h(&self) -> usize {
        self.layout.n_h
    }

    /// Restrict a full velocity vector to free dofs.
    pub fn vel_to_free(&self, full: &[f64]) -> Vec<f64> {
        self.layout.vel_free.iter().map(|&i| full[i]).collect()
    }

    pub fn vel_to_full(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.layout.n_vel];
        for (k, &i) in self.layout.vel_free.iter().enumerate() {
            full[i] = free[k];
        }
        full
    }

    pub fn temp_to_free(&self, full: &[f64]) -> Vec<f64> {
        self.layout.temp_free.iter().map(|&i| full[i]).collect()
    }

    pub fn temp_to_full(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.layout.n_temp];
        for (k, &i) in self.layout.temp_free.iter().enumerate() {
            full[i] = free[k];
        }
        full
    }

    /// Mean of a pressure field in the L2 sense.
    pub fn pressure_mean(&self, p: &[f64]) -> f64 {
        sparse::dot(&self.pres_mean_weight, p) / self.pres_total_mass
    }

    /// Shift a pressure vector to zero mean in place.
    pub fn project_pressure_zero_mean(&self, p: &mut [f64]) {
        let m = self.pressure_mean(p);
        for v in p.iter_mut() {
            *v -= m;
        }
    }

    /// Riesz representer (on the velocity space) of a momentum dual vector
    /// given over all velocity dofs, and its squared X-norm contribution.
    pub fn riesz_velocity(&self, dual_full: &[f64]) -> (Vec<f64>, f64) {
        let rhs = self.vel_to_free(dual_full);
        let rep = self.k_vel_solver.solve(&rhs);
        let nsq = sparse::dot(&rep, &rhs);
        (rep, nsq)
    }

    pub fn riesz_temperature(&self, dual_full: &[f64]) -> (Vec<f64>, f64) {
        let rhs = self.temp_to_free(dual_full);
        let rep = self.k_temp_solver.solve(&rhs);
        let nsq = sparse::dot(&rep, &rhs);
        (rep, nsq)
    }

    /// Riesz representer of a continuity dual vector on the zero-mean
    /// pressure space and its squared norm: the representer is
    /// M^{-1} r shifted to zero mean, its norm taken against r.
    pub fn riesz_pressure(&self, dual: &[f64]) -> (Vec<f64>, f64) {
        let mut rep = self.m_pres_solver.solve(dual);
        self.project_pressure_zero_mean(&mut rep);
        let nsq = sparse::dot(&rep, dual);
        (rep, nsq)
    }
}
