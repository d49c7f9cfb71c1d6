//! Dense linear-algebra kernel.
//!
//! Everything downstream (shift factors, gamma factors, the QP solver) funnels
//! through the two factorizations in this module: Cholesky for symmetric
//! positive-definite systems and partially-pivoted LU for general square
//! systems. Solutions are verified with an infinity-norm residual check and
//! one pass of iterative refinement before they are returned.

use thiserror::Error;

/// Relative singularity threshold: a pivot below `max|A| * SINGULARITY_REL`
/// is treated as zero.
pub const SINGULARITY_REL: f64 = 1e-12;

/// Residual acceptance threshold, relative to the problem scale.
pub const RESIDUAL_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinsolveError {
    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:.3e}")]
    NotSpd { pivot: usize, value: f64 },
    #[error("matrix is singular: no usable pivot in column {pivot}")]
    Singular { pivot: usize },
    #[error("dimension mismatch: {context}")]
    DimMismatch { context: String },
    #[error("solution rejected: residual {residual:.3e} exceeds {bound:.3e} after refinement")]
    ResidualTooLarge { residual: f64, bound: f64 },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinsolveError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinsolveError::DimMismatch { context: "ragged rows".into() });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `A^T x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            if xr != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(r)) {
                    *o += a * xr;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.at(r, c));
            }
        }
        t
    }

    /// Extracts the submatrix with the given row and column index lists.
    pub fn submatrix(&self, row_ix: &[usize], col_ix: &[usize]) -> Mat {
        let mut s = Mat::zeros(row_ix.len(), col_ix.len());
        for (i, &r) in row_ix.iter().enumerate() {
            for (j, &c) in col_ix.iter().enumerate() {
                s.set(i, j, self.at(r, c));
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn square(&self) -> Result<usize, LinsolveError> {
        if self.rows != self.cols {
            return Err(LinsolveError::DimMismatch {
                context: format!("expected square matrix, got {}x{}", self.rows, self.cols),
            });
        }
        Ok(self.rows)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Checks `||Ax - b||_inf` against the scaled acceptance threshold, applying
/// one pass of iterative refinement through `resolve` if the first residual
/// fails the check.
fn check_and_refine(
    a: &Mat,
    b: &[f64],
    x: &mut [f64],
    resolve: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(), LinsolveError> {
    let scale = 1.0_f64.max(inf_norm(b)).max(a.max_abs() * inf_norm(x));
    let bound = RESIDUAL_REL * scale;
    let residual = |x: &[f64]| {
        let ax = a.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        r
    };
    let r = residual(x);
    if inf_norm(&r) <= bound {
        return Ok(());
    }
    let dx = resolve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    let r2 = inf_norm(&residual(x));
    if r2 <= bound {
        Ok(())
    } else {
        Err(LinsolveError::ResidualTooLarge { residual: r2, bound })
    }
}

/// Cholesky factorization `A = L L^T` of a symmetric positive-definite matrix.
///
/// The factor retains a copy of `A` so solves can be residual-checked and
/// refined.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Mat,
    a: Mat,
}

impl SpdFactor {
    /// Factors a symmetric positive-definite matrix. A non-positive pivot
    /// (within the singularity threshold) reports the failing pivot index.
    pub fn new(a: &Mat) -> Result<Self, LinsolveError> {
        let n = a.square()?;
        let threshold = SINGULARITY_REL * a.max_abs().max(1.0);
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a.at(j, j);
            for k in 0..j {
                let ljk = l.at(j, k);
                d -= ljk * ljk;
            }
            if d <= threshold {
                return Err(LinsolveError::NotSpd { pivot: j, value: d });
            }
            let djs = d.sqrt();
            l.set(j, j, djs);
            for i in (j + 1)..n {
                let mut v = a.at(i, j);
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    v -= l.data[ri + k] * l.data[rj + k];
                }
                l.set(i, j, v / djs);
            }
        }
        Ok(SpdFactor { lower: l, a: a.clone() })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= l.at(i, k) * y[k];
            }
            y[i] = v / l.at(i, i);
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= l.at(k, i) * y[k];
            }
            y[i] = v / l.at(i, i);
        }
        y
    }

    /// Solves `A x = b` with a residual check and one refinement pass.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        if b.len() != self.dim() {
            return Err(LinsolveError::DimMismatch {
                context: format!("rhs length {} vs dimension {}", b.len(), self.dim()),
            });
        }
        let mut x = self.solve_raw(b);
        check_and_refine(&self.a, b, &mut x, |r| self.solve_raw(r))?;
        Ok(x)
    }
}

/// LU factorization with partial pivoting for general square systems.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Mat,
    perm: Vec<usize>,
    a: Mat,
}

impl LuFactor {
    pub fn new(a: &Mat) -> Result<Self, LinsolveError> {
        let n = a.square()?;
        let threshold = SINGULARITY_REL * a.max_abs().max(1.0);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu.at(col, col).abs();
            for r in (col + 1)..n {
                let v = lu.at(r, col).abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val <= threshold {
                return Err(LinsolveError::Singular { pivot: col });
            }
            if pivot_row != col {
                for c in 0..n {
                    let tmp = lu.at(col, c);
                    lu.set(col, c, lu.at(pivot_row, c));
                    lu.set(pivot_row, c, tmp);
                }
                perm.swap(col, pivot_row);
            }
            let inv_p = 1.0 / lu.at(col, col);
            for r in (col + 1)..n {
                let factor = lu.at(r, col) * inv_p;
                lu.set(r, col, factor);
                if factor != 0.0 {
                    let (head, tail) = lu.data.split_at_mut(r * n);
                    let src = &head[col * n + col + 1..col * n + n];
                    let dst = &mut tail[col + 1..n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= factor * s;
                    }
                }
            }
        }
        Ok(LuFactor { lu, perm, a: a.clone() })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.lu.at(i, k) * y[k];
            }
            y[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.lu.at(i, k) * y[k];
            }
            y[i] = v / self.lu.at(i, i);
        }
        y
    }

    /// Solves `A x = b` with a residual check and one refinement pass.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        if b.len() != self.dim() {
            return Err(LinsolveError::DimMismatch {
                context: format!("rhs length {} vs dimension {}", b.len(), self.dim()),
            });
        }
        let mut x = self.solve_raw(b);
        check_and_refine(&self.a, b, &mut x, |r| self.solve_raw(r))?;
        Ok(x)
    }
}

/// One-shot general solve of `A x = b` via partially-pivoted LU.
pub fn solve_general(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    LuFactor::new(a)?.solve(b)
}

/// One-shot SPD solve of `A x = b` via Cholesky.
pub fn solve_spd(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    SpdFactor::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let mut b = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                b.set(r, c, rng.gen_range(-1.0..1.0));
            }
        }
        let mut a = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += b.at(k, r) * b.at(k, c);
                }
                a.set(r, c, v);
            }
        }
        for i in 0..n {
            a.add_at(i, i, n as f64);
        }
        a
    }

    #[test]
    fn spd_recovers_constructed_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1, 2, 5, 20, 60] {
            let a = random_spd(n, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let b = a.matvec(&x_true);
            let x = SpdFactor::new(&a).unwrap().solve(&b).unwrap();
            let err = x
                .iter()
                .zip(&x_true)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-8, "n={n}: error {err:.3e}");
        }
    }

    #[test]
    fn lu_recovers_constructed_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 3, 10, 40] {
            let mut a = Mat::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    a.set(r, c, rng.gen_range(-1.0..1.0));
                }
                a.add_at(r, r, 4.0);
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b = a.matvec(&x_true);
            let x = solve_general(&a, &b).unwrap();
            let err = x
                .iter()
                .zip(&x_true)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-8, "n={n}: error {err:.3e}");
        }
    }

    #[test]
    fn lu_handles_permutation_pivoting() {
        // Leading zero forces a row swap.
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let x = solve_general(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix_naming_pivot() {
        // Eigenvalues 3 and -1: pivot 1 goes negative.
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match SpdFactor::new(&a) {
            Err(LinsolveError::NotSpd { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn lu_rejects_singular_matrix() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match LuFactor::new(&a) {
            Err(LinsolveError::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = SpdFactor::new(&a).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(LinsolveError::DimMismatch { .. })));
        let rect = Mat::zeros(2, 3);
        assert!(matches!(
            LuFactor::new(&rect),
            Err(LinsolveError::DimMismatch { .. })
        ));
    }

    #[test]
    fn submatrix_and_transpose_agree_with_direct_indexing() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ])
        .unwrap();
        let s = a.submatrix(&[2, 0], &[1]);
        assert_eq!(s.at(0, 0), 8.0);
        assert_eq!(s.at(1, 0), 2.0);
        let t = a.transpose();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(t.at(c, r), a.at(r, c));
            }
        }
        let x = vec![1.0, -1.0, 2.0];
        let via_tr = a.tr_matvec(&x);
        let via_t = t.matvec(&x);
        assert_eq!(via_tr, via_t);
    }
}
