//! Taylor-Hood-plus-temperature spaces on the reference mesh: P2 velocity,
//! P2 temperature, P1 pressure, Dirichlet bookkeeping, the temperature lift,
//! the VMS projector, and the X-norm.
//!
//! P2 nodes form the fine (2n+1) x (2n+1) grid: even/even entries are mesh
//! vertices, the rest are edge midpoints (odd/odd lies on the cell diagonal).
//! Velocity dofs are interleaved per node: (2*node, 2*node+1).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::UniformMesh;
use crate::params::ParameterPoint;
use crate::sparse::{self, Csc};

const WALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DofLayout {
    pub n_h: usize,
    /// fine-grid side length, 2*n_h + 1
    pub fine: usize,
    pub n_p2_nodes: usize,
    pub n_vertices: usize,
    pub n_vel: usize,
    pub n_temp: usize,
    pub n_pres: usize,
    /// per-triangle P2 node indices in local order [v0, v1, v2, m01, m12, m20]
    pub elem_p2: Vec<[usize; 6]>,
    /// coordinates of all P2 nodes on the reference square
    pub p2_coords: Vec<[f64; 2]>,
    /// for midpoint nodes, the two endpoint vertex-node indices
    pub midpoint_ends: Vec<Option<(usize, usize)>>,
    pub node_on_boundary: Vec<bool>,
    pub node_on_wall: Vec<bool>,
    /// constrained velocity dofs (all boundary nodes, both components)
    pub vel_dirichlet: Vec<usize>,
    /// constrained temperature dofs (left/right wall nodes)
    pub temp_dirichlet: Vec<usize>,
    pub vel_free: Vec<usize>,
    pub vel_full_to_free: Vec<usize>,
    pub temp_free: Vec<usize>,
    pub temp_full_to_free: Vec<usize>,
}

impl DofLayout {
    pub fn new(mesh: &UniformMesh) -> Result<Self> {
        let n = mesh.divisions_per_side;
        let fine = 2 * n + 1;
        let n_p2 = fine * fine;
        let n_vertices = mesh.n_vertices();
        let node_at = |fi: usize, fj: usize| fj * fine + fi;
        let nv = n + 1;
        let vert_fine = |v: usize| {
            let i = v % nv;
            let j = v / nv;
            (2 * i, 2 * j)
        };

        let mut p2_coords = vec![[0.0; 2]; n_p2];
        for fj in 0..fine {
            for fi in 0..fine {
                p2_coords[node_at(fi, fj)] =
                    [fi as f64 / (2 * n) as f64, fj as f64 / (2 * n) as f64];
            }
        }

        let mut elem_p2 = Vec::with_capacity(mesh.n_triangles());
        for t in &mesh.triangles {
            let f: Vec<(usize, usize)> = t.iter().map(|&v| vert_fine(v)).collect();
            let mid = |a: (usize, usize), b: (usize, usize)| {
                node_at((a.0 + b.0) / 2, (a.1 + b.1) / 2)
            };
            elem_p2.push([
                node_at(f[0].0, f[0].1),
                node_at(f[1].0, f[1].1),
                node_at(f[2].0, f[2].1),
                mid(f[0], f[1]),
                mid(f[1], f[2]),
                mid(f[2], f[0]),
            ]);
        }

        let mut midpoint_ends = vec![None; n_p2];
        let mut node_on_boundary = vec![false; n_p2];
        let mut node_on_wall = vec![false; n_p2];
        for fj in 0..fine {
            for fi in 0..fine {
                let id = node_at(fi, fj);
                let on_b = fi == 0 || fi == fine - 1 || fj == 0 || fj == fine - 1;
                node_on_boundary[id] = on_b;
                node_on_wall[id] = fi == 0 || fi == fine - 1;
                match (fi % 2, fj % 2) {
                    (0, 0) => {}
                    (1, 0) => midpoint_ends[id] = Some((node_at(fi - 1, fj), node_at(fi + 1, fj))),
                    (0, 1) => midpoint_ends[id] = Some((node_at(fi, fj - 1), node_at(fi, fj + 1))),
                    // diagonal midpoint: lower-left-to-upper-right split
                    (1, 1) => {
                        midpoint_ends[id] = Some((node_at(fi - 1, fj - 1), node_at(fi + 1, fj + 1)))
                    }
                    _ => unreachable!(),
                }
            }
        }

        let mut vel_dirichlet = Vec::new();
        let mut temp_dirichlet = Vec::new();
        for id in 0..n_p2 {
            if node_on_boundary[id] {
                vel_dirichlet.push(2 * id);
                vel_dirichlet.push(2 * id + 1);
            }
            if node_on_wall[id] {
                temp_dirichlet.push(id);
            }
        }

        let n_vel = 2 * n_p2;
        let n_temp = n_p2;
        let (vel_free, vel_full_to_free) = free_maps(n_vel, &vel_dirichlet);
        let (temp_free, temp_full_to_free) = free_maps(n_temp, &temp_dirichlet);
        if vel_free.is_empty() {
            return Err(Error::SingularLayout("velocity"));
        }
        if temp_free.is_empty() {
            return Err(Error::SingularLayout("temperature"));
        }

        Ok(Self {
            n_h: n,
            fine,
            n_p2_nodes: n_p2,
            n_vertices,
            n_vel,
            n_temp,
            n_pres: n_vertices,
            elem_p2,
            p2_coords,
            midpoint_ends,
            node_on_boundary,
            node_on_wall,
            vel_dirichlet,
            temp_dirichlet,
            vel_free,
            vel_full_to_free,
            temp_free,
            temp_full_to_free,
        })
    }

    /// P2 interpolant of the lift theta_g(x, y) = 1 - x.
    pub fn lift_vector(&self) -> Vec<f64> {
        self.p2_coords.iter().map(|c| 1.0 - c[0]).collect()
    }

    /// Vertex-node index (into P2 numbering) of mesh vertex v.
    pub fn vertex_p2_node(&self, v: usize) -> usize {
        let nv = self.n_h + 1;
        let i = v % nv;
        let j = v / nv;
        2 * j * self.fine + 2 * i
    }

    /// Nodal interpolation onto P1 re-expressed in P2 coefficients: vertex
    /// values kept, midpoint values replaced by endpoint averages.
    pub fn vms_project_scalar(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.n_temp);
        let mut out = field.to_vec();
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                out[id] = 0.5 * (field[*a] + field[*b]);
            }
        }
        out
    }

    /// Fluctuation operator: field - projection.
    pub fn vms_fluctuation_scalar(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                out[id] = field[id] - 0.5 * (field[*a] + field[*b]);
            }
        }
        out
    }

    pub fn vms_project_velocity(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.n_vel);
        let mut out = field.to_vec();
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                out[2 * id] = 0.5 * (field[2 * a] + field[2 * b]);
                out[2 * id + 1] = 0.5 * (field[2 * a + 1] + field[2 * b + 1]);
            }
        }
        out
    }

    pub fn vms_fluctuation_velocity(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                out[2 * id] = field[2 * id] - 0.5 * (field[2 * a] + field[2 * b]);
                out[2 * id + 1] = field[2 * id + 1] - 0.5 * (field[2 * a + 1] + field[2 * b + 1]);
            }
        }
        out
    }

    /// Adjoint of the fluctuation operator (same dof space).
    pub fn vms_fluctuation_scalar_adjoint(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                let v = field[id];
                out[id] += v;
                out[*a] -= 0.5 * v;
                out[*b] -= 0.5 * v;
            }
        }
        out
    }

    pub fn vms_fluctuation_velocity_adjoint(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (id, ends) in self.midpoint_ends.iter().enumerate() {
            if let Some((a, b)) = ends {
                for c in 0..2 {
                    let v = field[2 * id + c];
                    out[2 * id + c] += v;
                    out[2 * a + c] -= 0.5 * v;
                    out[2 * b + c] -= 0.5 * v;
                }
            }
        }
        out
    }

    /// Split a raw temperature field (theta = 1 on the left wall, 0 on the
    /// right) into its fluctuation around the lift. Rejects fields violating
    /// the wall data.
    pub fn apply_lift(&self, raw: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(raw.len(), self.n_temp);
        let mut worst: f64 = 0.0;
        for (id, c) in self.p2_coords.iter().enumerate() {
            if self.node_on_wall[id] {
                let want = if c[0] < 0.5 { 1.0 } else { 0.0 };
                worst = worst.max((raw[id] - want).abs());
            }
        }
        if worst > WALL_TOL {
            return Err(Error::BoundaryValueViolation(worst));
        }
        let lift = self.lift_vector();
        Ok(raw.iter().zip(&lift).map(|(r, g)| r - g).collect())
    }

    /// Inverse of `apply_lift`.
    pub fn remove_lift(&self, fluctuation: &[f64]) -> Vec<f64> {
        let lift = self.lift_vector();
        fluctuation.iter().zip(&lift).map(|(f, g)| f + g).collect()
    }

    /// Index map of the pi-rotation about the cavity center on the fine grid.
    pub fn rotated_node(&self, id: usize) -> usize {
        let fi = id % self.fine;
        let fj = id / self.fine;
        (self.fine - 1 - fj) * self.fine + (self.fine - 1 - fi)
    }
}

fn free_maps(n: usize, constrained: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut full_to_free = vec![usize::MAX; n];
    for &c in constrained {
        full_to_free[c] = usize::MAX - 1; // mark
    }
    let mut free = Vec::with_capacity(n - constrained.len());
    for (i, slot) in full_to_free.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = free.len();
            free.push(i);
        } else {
            *slot = usize::MAX;
        }
    }
    (free, full_to_free)
}

/// Gram matrices of the X inner product on the full dof vectors.
pub struct XNorm {
    pub k_vel: Csc,
    pub k_temp: Csc,
    pub m_pres: Csc,
}

impl XNorm {
    pub fn x_norm(&self, u: &[f64], theta: &[f64], p: &[f64]) -> f64 {
        self.x_norm_sq(u, theta, p).max(0.0).sqrt()
    }

    pub fn x_norm_sq(&self, u: &[f64], theta: &[f64], p: &[f64]) -> f64 {
        sparse::quadform(&self.k_vel, u, u)
            + sparse::quadform(&self.k_temp, theta, theta)
            + sparse::quadform(&self.m_pres, p, p)
    }

    pub fn vel_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        sparse::quadform(&self.k_vel, a, b)
    }

    pub fn temp_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        sparse::quadform(&self.k_temp, a, b)
    }

    pub fn pres_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        sparse::quadform(&self.m_pres, a, b)
    }
}

/// Full-order solution on the reference mesh. Temperature is stored as the
/// fluctuation around the lift interpolant of 1 - x.
#[derive(Debug, Clone)]
pub struct FESolution {
    pub parameter: ParameterPoint,
    pub velocity: Vec<f64>,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
    pub x_norm: f64,
}

impl FESolution {
    pub fn new(
        parameter: ParameterPoint,
        velocity: Vec<f64>,
        temperature: Vec<f64>,
        pressure: Vec<f64>,
        xn: &XNorm,
    ) -> Self {
        let x_norm = xn.x_norm(&velocity, &temperature, &pressure);
        Self {
            parameter,
            velocity,
            temperature,
            pressure,
            x_norm,
        }
    }

    pub fn zero(parameter: ParameterPoint, layout: &DofLayout) -> Self {
        Self {
            parameter,
            velocity: vec![0.0; layout.n_vel],
            temperature: vec![0.0; layout.n_temp],
            pressure: vec![0.0; layout.n_pres],
            x_norm: 0.0,
        }
    }

    /// X-norm of the difference with another solution.
    pub fn error_to(&self, other: &FESolution, xn: &XNorm) -> f64 {
        let du: Vec<f64> = self
            .velocity
            .iter()
            .zip(&other.velocity)
            .map(|(a, b)| a - b)
            .collect();
        let dt: Vec<f64> = self
            .temperature
            .iter()
            .zip(&other.temperature)
            .map(|(a, b)| a - b)
            .collect();
        let dp: Vec<f64> = self
            .pressure
            .iter()
            .zip(&other.pressure)
            .map(|(a, b)| a - b)
            .collect();
        xn.x_norm(&du, &dt, &dp)
    }

    /// Export vertex-sampled fields as legacy-VTK point data on the mapped
    /// domain. The lift is re-added to the temperature.
    pub fn export_vtk(&self, mesh: &UniformMesh, layout: &DofLayout, path: &Path) -> Result<()> {
        let height = self.parameter.height;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# vtk DataFile Version 3.0")?;
        writeln!(
            f,
            "cavity fields Ra={} height={height}",
            self.parameter.rayleigh
        )?;
        writeln!(f, "ASCII")?;
        writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(f, "POINTS {} double", mesh.n_vertices())?;
        for v in mesh.mapped_vertices(height) {
            writeln!(f, "{:.17} {:.17} 0.0", v[0], v[1])?;
        }
        writeln!(f, "CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
        for t in &mesh.triangles {
            writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(f, "CELL_TYPES {}", mesh.n_triangles())?;
        for _ in 0..mesh.n_triangles() {
            writeln!(f, "5")?;
        }
        let lift = layout.lift_vector();
        writeln!(f, "POINT_DATA {}", mesh.n_vertices())?;
        writeln!(f, "VECTORS velocity double")?;
        for v in 0..mesh.n_vertices() {
            let id = layout.vertex_p2_node(v);
            writeln!(
                f,
                "{:.17} {:.17} 0.0",
                self.velocity[2 * id],
                self.velocity[2 * id + 1]
            )?;
        }
        writeln!(f, "SCALARS temperature double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in 0..mesh.n_vertices() {
            let id = layout.vertex_p2_node(v);
            writeln!(f, "{:.17}", self.temperature[id] + lift[id])?;
        }
        writeln!(f, "SCALARS pressure double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in 0..mesh.n_vertices() {
            writeln!(f, "{:.17}", self.pressure[v])?;
        }
        Ok(())
    }
}

/// Apply the centro-symmetry transform on stored (fluctuation) coefficients:
/// velocity flips sign under the pi-rotation about the cavity center, the
/// temperature fluctuation is antisymmetric, and the pressure picks up the
/// hydrostatic shift Pr*Ra*mu_g*(y - 1/2) generated by mapping theta to
/// 1 - theta in the buoyancy term. The differentially heated cavity solution
/// is a fixed point of this map.
pub fn centro_symmetric_image(layout: &DofLayout, sol: &FESolution, pr: f64) -> FESolution {
    let n = layout.n_p2_nodes;
    let mut u = vec![0.0; layout.n_vel];
    let mut t = vec![0.0; layout.n_temp];
    for id in 0..n {
        let r = layout.rotated_node(id);
        u[2 * id] = -sol.velocity[2 * r];
        u[2 * id + 1] = -sol.velocity[2 * r + 1];
        t[id] = -sol.temperature[r];
    }
    let nv = layout.n_h + 1;
    let shift = pr * sol.parameter.rayleigh * sol.parameter.height;
    let mut p = vec![0.0; layout.n_pres];
    for v in 0..layout.n_pres {
        let i = v % nv;
        let j = v / nv;
        let r = (nv - 1 - j) * nv + (nv - 1 - i);
        let y = j as f64 / layout.n_h as f64;
        p[v] = sol.pressure[r] + shift * (y - 0.5);
    }
    FESolution {
        parameter: sol.parameter,
        velocity: u,
        temperature: t,
        pressure: p,
        x_norm: sol.x_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;

    fn layout(n: usize) -> DofLayout {
        DofLayout::new(&build_uniform_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn dof_counts() {
        let l = layout(4);
        assert_eq!(l.n_p2_nodes, 81);
        assert_eq!(l.n_vel, 162);
        assert_eq!(l.n_pres, 25);
        // boundary nodes: 4 * (2*4) = 32, both components constrained
        assert_eq!(l.vel_dirichlet.len(), 64);
        // wall nodes: 2 * 9
        assert_eq!(l.temp_dirichlet.len(), 18);
        assert_eq!(l.vel_free.len(), l.n_vel - 64);
    }

    #[test]
    fn projector_reproduces_p1_and_is_idempotent() {
        let l = layout(5);
        // a globally linear field is P1: fluctuation must vanish
        let lin: Vec<f64> = l.p2_coords.iter().map(|c| 2.0 * c[0] - 0.7 * c[1]).collect();
        let fluct = l.vms_fluctuation_scalar(&lin);
        assert!(fluct.iter().all(|v| v.abs() < 1e-13));

        // idempotence on an arbitrary field
        let field: Vec<f64> = (0..l.n_temp).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let p1 = l.vms_project_scalar(&field);
        let p2 = l.vms_project_scalar(&p1);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn projector_keeps_vertex_values() {
        let l = layout(3);
        let field: Vec<f64> = (0..l.n_temp).map(|i| (i as f64).sin()).collect();
        let proj = l.vms_project_scalar(&field);
        for (id, ends) in l.midpoint_ends.iter().enumerate() {
            if ends.is_none() {
                assert_eq!(proj[id], field[id]);
            }
        }
    }

    #[test]
    fn fluctuation_adjoint_is_adjoint() {
        let l = layout(3);
        let a: Vec<f64> = (0..l.n_temp).map(|i| (0.3 * i as f64).cos()).collect();
        let b: Vec<f64> = (0..l.n_temp).map(|i| (0.7 * i as f64).sin()).collect();
        let fa = l.vms_fluctuation_scalar(&a);
        let fadj_b = l.vms_fluctuation_scalar_adjoint(&b);
        let lhs = sparse::dot(&fa, &b);
        let rhs = sparse::dot(&a, &fadj_b);
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lift_roundtrip() {
        let l = layout(4);
        // start from any wall-compatible raw field
        let mut raw = l.lift_vector();
        for (id, v) in raw.iter_mut().enumerate() {
            if !l.node_on_wall[id] {
                *v += (id as f64 * 0.13).sin();
            }
        }
        let fluct = l.apply_lift(&raw).unwrap();
        let back = l.remove_lift(&fluct);
        for (a, b) in raw.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        // lift itself maps to zero fluctuation
        let zero = l.apply_lift(&l.lift_vector()).unwrap();
        assert!(zero.iter().all(|v| v.abs() == 0.0));
        // violating the wall data is rejected
        let mut bad = l.lift_vector();
        bad[0] += 1e-6;
        assert!(matches!(
            l.apply_lift(&bad),
            Err(Error::BoundaryValueViolation(_))
        ));
    }

    #[test]
    fn rotation_is_involutive() {
        let l = layout(4);
        for id in 0..l.n_p2_nodes {
            assert_eq!(l.rotated_node(l.rotated_node(id)), id);
        }
    }
}
