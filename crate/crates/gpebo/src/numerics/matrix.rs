//! Dense row-major matrices over `f64`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Off-diagonal threshold (relative to the Frobenius norm) at which the
/// Jacobi iteration is considered converged.
const JACOBI_TOL: f64 = 1e-12;
/// Sweep cap for the Jacobi iteration.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative Frobenius tolerance for accepting a matrix as symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

/// Errors from the dense-matrix operations.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixError {
    /// Operand shapes do not line up.
    DimensionMismatch { what: String },
    /// A symmetric-only operation received a non-symmetric matrix.
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    /// The Jacobi iteration did not converge within the sweep cap.
    NoConvergence { sweeps: usize },
    /// Cholesky hit a non-positive pivot; the matrix is not positive definite.
    NotPositiveDefinite { pivot_index: usize, pivot: f64 },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
            MatrixError::NotSymmetric {
                asymmetry,
                tolerance,
            } => write!(
                f,
                "matrix is not symmetric: ||m - m^T||_F = {asymmetry:e} exceeds {tolerance:e}"
            ),
            MatrixError::NoConvergence { sweeps } => {
                write!(f, "Jacobi iteration did not converge in {sweeps} sweeps")
            }
            MatrixError::NotPositiveDefinite { pivot_index, pivot } => write!(
                f,
                "matrix is not positive definite: pivot {pivot_index} is {pivot:e}"
            ),
        }
    }
}

impl core::error::Error for MatrixError {}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Matrix { rows, cols, data }
    }

    /// Builds a square matrix from nested rows; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        assert!(r > 0);
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length must match columns");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Row-vector product `vᵀ * self`.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "vector length must match rows");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += vi * self[(i, j)];
            }
        }
        out
    }

    /// `self + scale * rhs`, entrywise.
    pub fn add_scaled(&self, scale: f64, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Entrywise scaling.
    pub fn scale(&self, s: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * s).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Symmetric outer product `v vᵀ`; the (i, j) and (j, i) entries are the
    /// same float, so the result is bit-symmetric.
    pub fn outer(v: &[f64]) -> Matrix {
        let n = v.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let p = v[i] * v[j];
                out[(i, j)] = p;
                out[(j, i)] = p;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius norm of `m - mᵀ`; zero iff the matrix is bit-symmetric.
    /// Only meaningful for square matrices.
    pub fn asymmetry(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)];
                acc += d * d;
            }
        }
        math::sqrt(acc)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Frobenius norm `sqrt(Σ entries²)`.
pub fn frobenius_norm(m: &Matrix) -> f64 {
    math::sqrt(m.as_slice().iter().map(|x| x * x).sum())
}

/// Smallest and largest eigenvalue of a symmetric matrix, via cyclic Jacobi.
///
/// The input must be square and symmetric within `1e-9 * (1 + ||m||_F)` in
/// Frobenius norm; the iteration runs full sweeps until the off-diagonal mass
/// drops below `1e-12 * (1 + ||m||_F)`, with a 100-sweep cap.
pub fn sym_eig_bounds(m: &Matrix) -> Result<(f64, f64), MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::DimensionMismatch {
            what: alloc::format!(
                "sym_eig_bounds needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            ),
        });
    }
    let norm = frobenius_norm(m);
    let sym_tol = SYMMETRY_TOL * (1.0 + norm);
    let asym = m.asymmetry();
    if asym > sym_tol {
        return Err(MatrixError::NotSymmetric {
            asymmetry: asym,
            tolerance: sym_tol,
        });
    }

    let n = m.rows();
    if n == 1 {
        return Ok((m[(0, 0)], m[(0, 0)]));
    }

    let mut a = m.clone();
    let off_tol = JACOBI_TOL * (1.0 + norm);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if math::sqrt(off) <= off_tol {
            let mut lo = a[(0, 0)];
            let mut hi = a[(0, 0)];
            for i in 1..n {
                lo = lo.min(a[(i, i)]);
                hi = hi.max(a[(i, i)]);
            }
            return Ok((lo, hi));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                jacobi_rotate(&mut a, p, q);
            }
        }
    }
    Err(MatrixError::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// One two-sided Jacobi rotation zeroing the (p, q) entry.
fn jacobi_rotate(a: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + math::sqrt(1.0 + tau * tau))
    } else {
        -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
    };
    let c = 1.0 / math::sqrt(1.0 + t * t);
    let s = t * c;

    a[(p, p)] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[(q, q)] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    let n = a.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        a[(k, p)] = np;
        a[(p, k)] = np;
        a[(k, q)] = nq;
        a[(q, k)] = nq;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Pivot positivity during the factorization is the constructive
/// positive-definiteness test used by the observer diagnostics.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `m = L Lᵀ`; fails on the first non-positive pivot.
    pub fn factor(m: &Matrix) -> Result<Self, MatrixError> {
        if !m.is_square() {
            return Err(MatrixError::DimensionMismatch {
                what: alloc::format!(
                    "Cholesky needs a square matrix, got {}x{}",
                    m.rows(),
                    m.cols()
                ),
            });
        }
        let n = m.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(MatrixError::NotPositiveDefinite {
                    pivot_index: j,
                    pivot: d,
                });
            }
            let ljj = math::sqrt(d);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut v = m[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    /// Solves `m x = rhs` from the factorization.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(rhs.len(), n, "rhs length must match order");
        // forward: L y = rhs
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Inverse `m⁻¹ = L⁻ᵀ L⁻¹`, assembled as `GᵀG` with `G = L⁻¹` so the
    /// result is bit-symmetric and positive definite by construction.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        // G = L⁻¹ by forward substitution on unit columns; G is lower-triangular.
        let mut g = Matrix::zeros(n, n);
        for j in 0..n {
            g[(j, j)] = 1.0 / self.l[(j, j)];
            for i in j + 1..n {
                let mut acc = 0.0;
                for k in j..i {
                    acc -= self.l[(i, k)] * g[(k, j)];
                }
                g[(i, j)] = acc / self.l[(i, i)];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in j.max(i)..n {
                    acc += g[(k, i)] * g[(k, j)];
                }
                inv[(i, j)] = acc;
                inv[(j, i)] = acc;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn frobenius_zero_matrix() {
        assert_eq!(frobenius_norm(&Matrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn frobenius_identity() {
        approx(
            frobenius_norm(&Matrix::identity(2)),
            core::f64::consts::SQRT_2,
            1e-15,
        );
    }

    #[test]
    fn frobenius_three_four() {
        let m = Matrix::from_rows(&[&[3.0, 4.0], &[0.0, 0.0]]);
        approx(frobenius_norm(&m), 5.0, 1e-15);
    }

    #[test]
    fn eig_identity() {
        let (lo, hi) = sym_eig_bounds(&Matrix::identity(3)).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn eig_diagonal() {
        let m = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 5.0]]);
        let (lo, hi) = sym_eig_bounds(&m).unwrap();
        assert_eq!((lo, hi), (2.0, 5.0));
    }

    #[test]
    fn eig_two_by_two() {
        // [[2,1],[1,2]] has characteristic polynomial (2-λ)² - 1 → λ ∈ {1, 3}
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (lo, hi) = sym_eig_bounds(&m).unwrap();
        approx(lo, 1.0, 1e-12);
        approx(hi, 3.0, 1e-12);
    }

    #[test]
    fn eig_rejects_non_symmetric() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(
            sym_eig_bounds(&m),
            Err(MatrixError::NotSymmetric { .. })
        ));
    }

    /// Product of plane rotations: orthogonal by construction.
    fn rotation_product(n: usize, angles: &[f64]) -> Matrix {
        let mut p = Matrix::identity(n);
        let mut next = angles.iter().cycle();
        for i in 0..n - 1 {
            for j in i + 1..n {
                let mut g = Matrix::identity(n);
                let (s, c) = next.next().unwrap().sin_cos();
                g[(i, i)] = c;
                g[(j, j)] = c;
                g[(i, j)] = -s;
                g[(j, i)] = s;
                p = p.mul(&g);
            }
        }
        p
    }

    fn check_similarity_spectrum(n: usize, angles: &[f64], diag: &[f64]) {
        let p = rotation_product(n, angles);
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = diag[i];
        }
        let a = p.transpose().mul(&d).mul(&p);
        // symmetrize the rounding noise before the strict check
        let mut sym = a.clone();
        for i in 0..n {
            for j in 0..n {
                sym[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
            }
        }
        let (lo, hi) = sym_eig_bounds(&sym).unwrap();
        let want_lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let want_hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        approx(lo, want_lo, 1e-8 * (1.0 + want_hi.abs()));
        approx(hi, want_hi, 1e-8 * (1.0 + want_hi.abs()));
    }

    #[test]
    fn eig_recovers_known_spectrum() {
        for n in 2..=8 {
            let diag: Vec<f64> = (0..n).map(|i| (i as f64) * 1.5 - 2.0).collect();
            check_similarity_spectrum(n, &[0.3, 1.0, 1.7, 2.4], &diag);
        }
    }

    proptest::proptest! {
        /// Orthogonal similarity with arbitrary rotation angles and a known
        /// diagonal: the bounds recover the extreme diagonal entries.
        #[test]
        fn eig_bounds_under_random_similarity(
            n in 2_usize..=8,
            angles in proptest::collection::vec(-3.2..3.2_f64, 4..12),
            diag in proptest::collection::vec(-10.0..10.0_f64, 8),
        ) {
            check_similarity_spectrum(n, &angles, &diag[..n]);
        }
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let m = Matrix::from_rows(&[&[4.0, 2.0, 0.0], &[2.0, 5.0, 1.0], &[0.0, 1.0, 3.0]]);
        let ch = Cholesky::factor(&m).unwrap();
        let x = ch.solve(&[2.0, 1.0, 7.0]);
        let back = m.mul_vec(&x);
        approx(back[0], 2.0, 1e-12);
        approx(back[1], 1.0, 1e-12);
        approx(back[2], 7.0, 1e-12);

        let inv = ch.inverse();
        let prod = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                approx(prod[(i, j)], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
        assert_eq!(inv.asymmetry(), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            Cholesky::factor(&m),
            Err(MatrixError::NotPositiveDefinite { pivot_index: 1, .. })
        ));
    }

    #[test]
    fn outer_is_bit_symmetric() {
        let m = Matrix::outer(&[1.5, -2.0, 0.25]);
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m[(0, 1)], -3.0);
        assert_eq!(m[(2, 2)], 0.0625);
    }
}
