//! Dense row-major matrices and the few factorizations the pipeline needs.
//!
//! Everything is dependency-free and sized for desk-scale problems
//! (n up to a few hundred): straightforward triple-loop products, LU with
//! partial pivoting, and rank by Gaussian elimination with a relative pivot
//! tolerance. No SVD anywhere.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Default singularity tolerance factor for [`lu_solve`]: pivots below
/// `1e-10 * max_abs(A)` are treated as zero.
pub const LU_SINGULAR_TOL_FACTOR: f64 = 1e-10;

/// Dense row-major matrix with finite entries and positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension("data length must equal rows * cols"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from explicit rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParameter("matrix dimensions must be positive"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("all rows must have equal length"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert!(i < self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Transposed copy.
    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Largest absolute entry (zero only for the zero matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(math::abs(v)))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension("inner dimensions must agree in matmul"));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &lv) in lhs_row.iter().enumerate() {
                if lv == 0.0 {
                    continue;
                }
                let rhs_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &rv) in out_row.iter_mut().zip(rhs_row) {
                    *o += lv * rv;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &DenseVector) -> Result<DenseVector> {
        if self.cols != v.len() {
            return Err(Error::Dimension("matrix-vector dimensions must agree"));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = dot(self.row(i), v.as_slice());
        }
        Ok(DenseVector { data: out })
    }
}

/// Dense vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    /// Builds a vector, validating finiteness.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("vector must be nonempty"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("vector entries must be finite"));
        }
        Ok(Self { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Dot product of equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// l1 norm of a slice.
pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| math::abs(*v)).sum()
}

/// l2 norm of a slice.
pub fn l2_norm(a: &[f64]) -> f64 {
    math::sqrt(a.iter().map(|v| v * v).sum())
}

/// Largest absolute entry of a slice.
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &v| m.max(math::abs(v)))
}

/// Number of entries with `|a_k| > rel_tol * max_abs(a)`.
///
/// The zero vector has count zero; `rel_tol` is relative so the count is
/// invariant under rescaling.
pub fn l0_count(a: &[f64], rel_tol: f64) -> usize {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0;
    }
    let thr = rel_tol * scale;
    a.iter().filter(|v| math::abs(**v) > thr).count()
}

/// Solves `A X = B` by LU with partial pivoting at the default tolerance.
pub fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    lu_solve_tol(a, b, LU_SINGULAR_TOL_FACTOR * a.max_abs())
}

/// Solves `A X = B` by LU with partial pivoting; pivots with absolute value
/// at most `singular_tol` raise [`Error::SingularMatrix`].
pub fn lu_solve_tol(a: &DenseMatrix, b: &DenseMatrix, singular_tol: f64) -> Result<DenseMatrix> {
    if a.rows != a.cols {
        return Err(Error::Dimension("coefficient matrix must be square"));
    }
    if a.rows != b.rows {
        return Err(Error::Dimension("right-hand side rows must match matrix order"));
    }
    let n = a.rows;
    let k = b.cols;
    let mut lu = a.data.clone();
    let mut x = b.data.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = math::abs(lu[col * n + col]);
        for r in col + 1..n {
            let v = math::abs(lu[r * n + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= singular_tol {
            return Err(Error::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                lu.swap(col * n + j, piv * n + j);
            }
            for j in 0..k {
                x.swap(col * k + j, piv * k + j);
            }
        }
        let d = lu[col * n + col];
        for r in col + 1..n {
            let f = lu[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            lu[r * n + col] = f;
            for j in col + 1..n {
                lu[r * n + j] -= f * lu[col * n + j];
            }
            for j in 0..k {
                x[r * k + j] -= f * x[col * k + j];
            }
        }
    }
    for col in (0..n).rev() {
        let d = lu[col * n + col];
        for j in 0..k {
            let mut acc = x[col * k + j];
            for m in col + 1..n {
                acc -= lu[col * n + m] * x[m * k + j];
            }
            x[col * k + j] = acc / d;
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    DenseMatrix::new(n, k, x)
}

/// Factors the square row-major matrix in place (`L` below, `U` on and
/// above the diagonal, row swaps in `piv`); `false` if a pivot falls at or
/// below `singular_tol`. Pairs with [`lu_solve_factored`] for repeated
/// solves against one matrix without allocation.
pub(crate) fn lu_factor_inplace(lu: &mut [f64], n: usize, piv: &mut [usize], singular_tol: f64) -> bool {
    debug_assert_eq!(lu.len(), n * n);
    debug_assert_eq!(piv.len(), n);
    for col in 0..n {
        let mut pr = col;
        let mut best = math::abs(lu[col * n + col]);
        for r in col + 1..n {
            let v = math::abs(lu[r * n + col]);
            if v > best {
                best = v;
                pr = r;
            }
        }
        if best <= singular_tol {
            return false;
        }
        piv[col] = pr;
        if pr != col {
            for j in 0..n {
                lu.swap(col * n + j, pr * n + j);
            }
        }
        let d = lu[col * n + col];
        for r in col + 1..n {
            let f = lu[r * n + col] / d;
            lu[r * n + col] = f;
            if f == 0.0 {
                continue;
            }
            for j in col + 1..n {
                lu[r * n + j] -= f * lu[col * n + j];
            }
        }
    }
    true
}

/// Solves in place against a factorization from [`lu_factor_inplace`].
///
/// All row swaps are applied before substitution: the stored `L` reflects
/// the fully permuted matrix, so interleaving would pair multipliers with
/// the wrong rows.
pub(crate) fn lu_solve_factored(lu: &[f64], piv: &[usize], n: usize, b: &mut [f64]) {
    for col in 0..n {
        b.swap(col, piv[col]);
    }
    for col in 0..n {
        let bc = b[col];
        if bc != 0.0 {
            for r in col + 1..n {
                b[r] -= lu[r * n + col] * bc;
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for m in col + 1..n {
            acc -= lu[col * n + m] * b[m];
        }
        b[col] = acc / lu[col * n + col];
    }
}

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// Pivots with absolute value at most `tol * max_abs(a)` are treated as zero.
pub fn rank(a: &DenseMatrix, tol: f64) -> usize {
    let mut m = a.data.clone();
    let (rows, cols) = (a.rows, a.cols);
    let thr = tol * a.max_abs();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let mut piv = row;
        let mut best = math::abs(m[row * cols + col]);
        for r in row + 1..rows {
            let v = math::abs(m[r * cols + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= thr {
            continue;
        }
        if piv != row {
            for j in col..cols {
                m.swap(row * cols + j, piv * cols + j);
            }
        }
        let d = m[row * cols + col];
        for r in row + 1..rows {
            let f = m[r * cols + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..cols {
                m[r * cols + j] -= f * m[row * cols + j];
            }
        }
        rank += 1;
        row += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert_eq!(
            DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0]),
            Err(Error::Dimension("data length must equal rows * cols"))
        );
        assert_eq!(
            DenseMatrix::new(1, 1, vec![f64::NAN]),
            Err(Error::NonFinite("matrix entries must be finite"))
        );
        assert!(DenseMatrix::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn identity_product_is_identity() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i = DenseMatrix::identity(2);
        assert_eq!(a.mul(&i).unwrap(), a);
        assert_eq!(i.mul(&a).unwrap(), a);
    }

    #[test]
    fn hand_checked_product() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[0.0], &[1.0]]);
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab, mat(&[&[2.0], &[4.0]]));
    }

    #[test]
    fn zero_matrix_annihilates() {
        let a = mat(&[&[1.0, -2.0, 3.0], &[0.5, 0.0, -1.0]]);
        let z = DenseMatrix::zeros(3, 4);
        assert_eq!(a.mul(&z).unwrap(), DenseMatrix::zeros(2, 4));
    }

    #[test]
    fn mismatched_shapes_error() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[1.0, 2.0]]);
        assert_eq!(a.mul(&b), Err(Error::Dimension("inner dimensions must agree in matmul")));
    }

    #[test]
    fn lu_solves_identity_and_diagonal_systems() {
        let i = DenseMatrix::identity(3);
        let b = mat(&[&[1.0], &[2.0], &[3.0]]);
        assert_eq!(lu_solve(&i, &b).unwrap(), b);

        let d = mat(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let rhs = mat(&[&[2.0], &[8.0]]);
        let x = lu_solve(&d, &rhs).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular_matrices() {
        let s = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = mat(&[&[1.0], &[1.0]]);
        assert_eq!(lu_solve(&s, &b), Err(Error::SingularMatrix));
    }

    #[test]
    fn lu_residual_is_small_for_well_conditioned_systems() {
        let a = mat(&[
            &[4.0, 1.0, 0.3],
            &[-1.0, 5.0, 2.0],
            &[0.2, -2.0, 6.0],
        ]);
        let b = mat(&[&[1.0], &[-2.0], &[0.5]]);
        let x = lu_solve(&a, &b).unwrap();
        let ax = a.mul(&x).unwrap();
        let resid = (0..3).map(|i| (ax.get(i, 0) - b.get(i, 0)).abs()).fold(0.0, f64::max);
        let bound = 1e-8 * (1.0 + b.max_abs());
        assert!(resid <= bound, "residual {resid} bound {bound}");
    }

    #[test]
    fn factored_lu_matches_the_one_shot_solver() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let n = 6;
            let data: Vec<f64> = (0..n * n).map(|_| next()).collect();
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let a = DenseMatrix::new(n, n, data.clone()).unwrap();
            let rhs = DenseMatrix::new(n, 1, b.clone()).unwrap();
            let mut lu = data;
            let mut piv = vec![0usize; n];
            if !lu_factor_inplace(&mut lu, n, &mut piv, 1e-12 * a.max_abs()) {
                continue;
            }
            let mut x = b;
            lu_solve_factored(&lu, &piv, n, &mut x);
            let reference = lu_solve(&a, &rhs).unwrap();
            for (i, &xi) in x.iter().enumerate() {
                assert!(
                    (xi - reference.get(i, 0)).abs() <= 1e-9 * (1.0 + reference.get(i, 0).abs()),
                    "row {i}: {xi} vs {}",
                    reference.get(i, 0)
                );
            }
        }
    }

    #[test]
    fn rank_of_identity_and_duplicated_rows() {
        assert_eq!(rank(&DenseMatrix::identity(4), 1e-9), 4);
        let dup = mat(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        assert_eq!(rank(&dup, 1e-9), 1);
    }

    #[test]
    fn rank_zeroes_small_pivots() {
        let near = mat(&[&[1.0, 0.0], &[0.0, 1e-12]]);
        assert_eq!(rank(&near, 1e-9), 1);
        assert_eq!(rank(&near, 1e-13), 2);
    }

    #[test]
    fn l0_count_uses_a_relative_threshold() {
        assert_eq!(l0_count(&[0.0, 0.0], 1e-8), 0);
        assert_eq!(l0_count(&[1.0, 1e-9, -2.0], 1e-8), 2);
        let scaled: Vec<f64> = [1.0, 1e-9, -2.0].iter().map(|v| v * 1e6).collect();
        assert_eq!(l0_count(&scaled, 1e-8), 2);
    }
}
