//! Uniform triangulation of the reference unit square and the affine map to
//! the variable-height cavity.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
}

/// Boundary edge given by its two vertex indices (ordered, a < b) and side tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: (usize, usize),
    pub side: BoundarySide,
}

/// Uniform mesh of the unit square: every cell split by its
/// lower-left-to-upper-right diagonal.
#[derive(Debug, Clone)]
pub struct UniformMesh {
    pub divisions_per_side: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

const COORD_TOL: f64 = 1e-12;

/// Build the uniform reference mesh with `n` divisions per side.
pub fn build_uniform_mesh(n: usize) -> Result<UniformMesh> {
    if n < 2 {
        return Err(Error::MeshTooCoarse(n));
    }
    let nv = n + 1;
    let mut vertices = Vec::with_capacity(nv * nv);
    for j in 0..nv {
        for i in 0..nv {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let vid = |i: usize, j: usize| j * nv + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for cj in 0..n {
        for ci in 0..n {
            let a = vid(ci, cj);
            let b = vid(ci + 1, cj);
            let c = vid(ci + 1, cj + 1);
            let d = vid(ci, cj + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for k in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: (vid(k, 0), vid(k + 1, 0)),
            side: BoundarySide::Bottom,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: (vid(k, n), vid(k + 1, n)),
            side: BoundarySide::Top,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: (vid(0, k), vid(0, k + 1)),
            side: BoundarySide::Left,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: (vid(n, k), vid(n, k + 1)),
            side: BoundarySide::Right,
        });
    }
    let mesh = UniformMesh {
        divisions_per_side: n,
        vertices,
        triangles,
        boundary_edges,
    };
    debug_assert!(mesh.triangles.iter().all(|t| mesh.signed_area(*t) > 0.0));
    Ok(mesh)
}

/// Map a reference point to the original domain: (x, y) -> (x, height * y).
pub fn map_to_original(point: [f64; 2], height: f64) -> [f64; 2] {
    [point[0], height * point[1]]
}

/// Jacobian matrix of the transformation map and its determinant.
pub fn jacobian(height: f64) -> ([[f64; 2]; 2], f64) {
    ([[1.0, 0.0], [0.0, height]], height)
}

impl UniformMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, tri: [usize; 3]) -> f64 {
        let [a, b, c] = tri;
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Classify a point on the boundary of the unit square, if it is on one.
    pub fn side_of(&self, p: [f64; 2]) -> Option<BoundarySide> {
        if p[0].abs() < COORD_TOL {
            Some(BoundarySide::Left)
        } else if (p[0] - 1.0).abs() < COORD_TOL {
            Some(BoundarySide::Right)
        } else if p[1].abs() < COORD_TOL {
            Some(BoundarySide::Bottom)
        } else if (p[1] - 1.0).abs() < COORD_TOL {
            Some(BoundarySide::Top)
        } else {
            None
        }
    }

    /// Vertex coordinates mapped to the original domain for a given height.
    pub fn mapped_vertices(&self, height: f64) -> Vec<[f64; 2]> {
        self.vertices
            .iter()
            .map(|&v| map_to_original(v, height))
            .collect()
    }

    /// Write the mesh as a legacy-VTK ASCII unstructured grid, mapped to the
    /// original domain of the given height.
    pub fn export_vtk(&self, path: &Path, height: f64) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# vtk DataFile Version 3.0")?;
        writeln!(f, "cavity mesh (height {height})")?;
        writeln!(f, "ASCII")?;
        writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(f, "POINTS {} double", self.n_vertices())?;
        for v in self.mapped_vertices(height) {
            writeln!(f, "{:.17} {:.17} 0.0", v[0], v[1])?;
        }
        writeln!(f, "CELLS {} {}", self.n_triangles(), 4 * self.n_triangles())?;
        for t in &self.triangles {
            writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(f, "CELL_TYPES {}", self.n_triangles())?;
        for _ in 0..self.n_triangles() {
            writeln!(f, "5")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_formula() {
        let m = build_uniform_mesh(2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        let m = build_uniform_mesh(50).unwrap();
        assert_eq!(m.n_vertices(), 2601);
        assert_eq!(m.n_triangles(), 5000);
    }

    #[test]
    fn rejects_too_coarse() {
        assert!(matches!(build_uniform_mesh(1), Err(Error::MeshTooCoarse(1))));
    }

    #[test]
    fn areas_sum_to_one() {
        let m = build_uniform_mesh(16).unwrap();
        let total: f64 = m.triangles.iter().map(|&t| m.signed_area(t)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(m.triangles.iter().all(|&t| m.signed_area(t) > 0.0));
    }

    #[test]
    fn map_examples() {
        assert_eq!(map_to_original([0.5, 0.25], 1.0), [0.5, 0.25]);
        assert_eq!(map_to_original([1.0, 1.0], 2.0), [1.0, 2.0]);
        assert_eq!(map_to_original([0.3, 0.8], 0.5), [0.3, 0.4]);
    }

    #[test]
    fn jacobian_examples() {
        let (j, d) = jacobian(1.0);
        assert_eq!(j, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(d, 1.0);
        let (j, d) = jacobian(2.0);
        assert_eq!(j, [[1.0, 0.0], [0.0, 2.0]]);
        assert_eq!(d, 2.0);
        assert_eq!(jacobian(0.5).1, 0.5);
    }

    #[test]
    fn identity_map_fixes_vertices() {
        let m = build_uniform_mesh(5).unwrap();
        for &v in &m.vertices {
            assert_eq!(map_to_original(v, 1.0), v);
        }
    }

    #[test]
    fn mapped_area_scales_with_height_and_matches_jacobian() {
        let m = build_uniform_mesh(7).unwrap();
        for &h in &[0.5, 1.0, 2.0] {
            let mapped = m.mapped_vertices(h);
            let area = |t: [usize; 3]| {
                let (a, b, c) = (mapped[t[0]], mapped[t[1]], mapped[t[2]]);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            };
            let total: f64 = m.triangles.iter().map(|&t| area(t)).sum();
            assert!((total - h).abs() < 1e-13);
            let (_, det) = jacobian(h);
            for &t in &m.triangles {
                let ratio = area(t) / m.signed_area(t);
                assert!((ratio - det).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_tags_cover_all_sides() {
        let m = build_uniform_mesh(4).unwrap();
        assert_eq!(m.boundary_edges.len(), 16);
        // both endpoints of a tagged edge must lie on the claimed side
        let on_side = |p: [f64; 2], s: BoundarySide| match s {
            BoundarySide::Left => p[0].abs() < 1e-12,
            BoundarySide::Right => (p[0] - 1.0).abs() < 1e-12,
            BoundarySide::Bottom => p[1].abs() < 1e-12,
            BoundarySide::Top => (p[1] - 1.0).abs() < 1e-12,
        };
        for e in &m.boundary_edges {
            let (a, b) = e.vertices;
            assert!(on_side(m.vertices[a], e.side));
            assert!(on_side(m.vertices[b], e.side));
        }
        for side in [
            BoundarySide::Left,
            BoundarySide::Right,
            BoundarySide::Bottom,
            BoundarySide::Top,
        ] {
            assert_eq!(m.boundary_edges.iter().filter(|e| e.side == side).count(), 4);
        }
    }
}
