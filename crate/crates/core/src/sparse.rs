//! Thin utilities over faer's sparse types: triplet assembly, mat-vec
//! helpers, and factorization wrappers used throughout the solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

pub type Csc = SparseColMat<usize, f64>;

/// Build a CSC matrix from (row, col, value) triplets; duplicates are summed.
pub fn csc_from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Csc {
    let entries: Vec<Triplet<usize, usize, f64>> = trips
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &entries)
        .expect("valid triplet indices")
}

/// y = A x
pub fn matvec(a: &Csc, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    matvec_add(a, x, y, 1.0);
}

/// y += scale * A x
pub fn matvec_add(a: &Csc, x: &[f64], y: &mut [f64], scale: f64) {
    let sym = a.symbolic();
    let val = a.val();
    for col in 0..a.ncols() {
        let xc = scale * x[col];
        if xc == 0.0 {
            continue;
        }
        let range = sym.col_range(col);
        let rows = &sym.row_idx()[range.clone()];
        let vals = &val[range];
        for (r, v) in rows.iter().zip(vals) {
            y[*r] += v * xc;
        }
    }
}

/// y += scale * A^T x
pub fn matvec_transpose_add(a: &Csc, x: &[f64], y: &mut [f64], scale: f64) {
    let sym = a.symbolic();
    let val = a.val();
    for col in 0..a.ncols() {
        let range = sym.col_range(col);
        let rows = &sym.row_idx()[range.clone()];
        let vals = &val[range];
        let mut acc = 0.0;
        for (r, v) in rows.iter().zip(vals) {
            acc += v * x[*r];
        }
        y[col] += scale * acc;
    }
}

/// x^T A y
pub fn quadform(a: &Csc, x: &[f64], y: &[f64]) -> f64 {
    let sym = a.symbolic();
    let val = a.val();
    let mut acc = 0.0;
    for col in 0..a.ncols() {
        let yc = y[col];
        if yc == 0.0 {
            continue;
        }
        let range = sym.col_range(col);
        let rows = &sym.row_idx()[range.clone()];
        let vals = &val[range];
        let mut s = 0.0;
        for (r, v) in rows.iter().zip(vals) {
            s += v * x[*r];
        }
        acc += s * yc;
    }
    acc
}

pub fn frobenius(a: &Csc) -> f64 {
    a.val().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ||A - B||_F computed over the union pattern.
pub fn frobenius_diff(a: &Csc, b: &Csc) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut acc = 0.0;
    let mut dense_col_a = vec![0.0; a.nrows()];
    for col in 0..a.ncols() {
        let ra = a.symbolic().col_range(col);
        let rb = b.symbolic().col_range(col);
        for (r, v) in a.symbolic().row_idx()[ra.clone()]
            .iter()
            .zip(&a.val()[ra])
        {
            dense_col_a[*r] = *v;
        }
        for (r, v) in b.symbolic().row_idx()[rb.clone()]
            .iter()
            .zip(&b.val()[rb.clone()])
        {
            let d = dense_col_a[*r] - v;
            acc += d * d;
            dense_col_a[*r] = 0.0;
        }
        // entries of A not present in B
        let ra = a.symbolic().col_range(col);
        for r in &a.symbolic().row_idx()[ra] {
            let d = dense_col_a[*r];
            acc += d * d;
            dense_col_a[*r] = 0.0;
        }
    }
    acc.sqrt()
}

/// Restrict a full matrix to selected rows/columns (maps use usize::MAX for
/// dropped indices).
pub fn restrict(a: &Csc, row_map: &[usize], n_rows: usize, col_map: &[usize], n_cols: usize) -> Csc {
    let mut trips = Vec::new();
    let sym = a.symbolic();
    let val = a.val();
    for col in 0..a.ncols() {
        let fc = col_map[col];
        if fc == usize::MAX {
            continue;
        }
        let range = sym.col_range(col);
        for (r, v) in sym.row_idx()[range.clone()].iter().zip(&val[range]) {
            let fr = row_map[*r];
            if fr != usize::MAX {
                trips.push((fr, fc, *v));
            }
        }
    }
    csc_from_triplets(n_rows, n_cols, &trips)
}

fn col_from_slice(x: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

/// Sparse Cholesky of an SPD matrix.
pub struct SpdSolver {
    fact: Llt<usize, f64>,
    n: usize,
}

impl SpdSolver {
    pub fn new(a: &Csc) -> Result<Self> {
        let sym = SymbolicLlt::try_new(a.symbolic(), faer::Side::Lower)
            .map_err(|e| Error::LinearSolveFailure(format!("symbolic cholesky: {e:?}")))?;
        let fact = Llt::try_new_with_symbolic(sym, a.as_ref(), faer::Side::Lower)
            .map_err(|e| Error::LinearSolveFailure(format!("cholesky: {e:?}")))?;
        Ok(Self { fact, n: a.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = col_from_slice(b);
        self.fact.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Sparse LU of a general square matrix, with reusable symbolic analysis.
pub struct LuSolver {
    fact: Lu<usize, f64>,
    n: usize,
}

impl LuSolver {
    pub fn new(a: &Csc) -> Result<Self> {
        let sym = SymbolicLu::try_new(a.symbolic())
            .map_err(|e| Error::LinearSolveFailure(format!("symbolic lu: {e:?}")))?;
        Self::with_symbolic(sym, a)
    }

    pub fn with_symbolic(sym: SymbolicLu<usize>, a: &Csc) -> Result<Self> {
        let fact = Lu::try_new_with_symbolic(sym, a.as_ref())
            .map_err(|e| Error::LinearSolveFailure(format!("numeric lu: {e:?}")))?;
        Ok(Self { fact, n: a.nrows() })
    }

    pub fn analyze(a: &Csc) -> Result<SymbolicLu<usize>> {
        SymbolicLu::try_new(a.symbolic())
            .map_err(|e| Error::LinearSolveFailure(format!("symbolic lu: {e:?}")))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = col_from_slice(b);
        self.fact.solve_in_place(rhs.as_mut());
        let out: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        out
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = col_from_slice(b);
        self.fact.solve_transpose_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(x: &mut [f64], s: f64) {
    x.iter_mut().for_each(|v| *v *= s);
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_matvec() {
        let a = csc_from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 1.5), (1, 0, 2.0), (0, 1, 3.0)]);
        let mut y = vec![0.0; 2];
        matvec(&a, &[1.0, 1.0], &mut y);
        assert_eq!(y, vec![5.5, 2.0]);
        let mut yt = vec![0.0; 2];
        matvec_transpose_add(&a, &[1.0, 1.0], &mut yt, 1.0);
        assert_eq!(yt, vec![4.5, 3.0]);
        assert!((quadform(&a, &[1.0, 0.0], &[0.0, 1.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn solvers_roundtrip() {
        let spd = csc_from_triplets(2, 2, &[(0, 0, 4.0), (1, 1, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let s = SpdSolver::new(&spd).unwrap();
        let x = s.solve(&[5.0, 3.0]);
        assert!((4.0 * x[0] + x[1] - 5.0).abs() < 1e-14);
        assert!((x[0] + 2.0 * x[1] - 3.0).abs() < 1e-14);

        let gen = csc_from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let lu = LuSolver::new(&gen).unwrap();
        let x = lu.solve(&[4.0, 3.0]);
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let xt = lu.solve_transpose(&[4.0, 3.0]);
        assert!((2.0 * xt[0] - 4.0).abs() < 1e-14);
        assert!((xt[0] + 3.0 * xt[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn frobenius_diff_over_union_pattern() {
        let a = csc_from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]);
        let b = csc_from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 3.0)]);
        let d = frobenius_diff(&a, &b);
        assert!((d - (4.0f64 + 9.0).sqrt()).abs() < 1e-14);
    }
}
