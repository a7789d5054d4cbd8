//! Dense symmetric positive-definite kernels.
//!
//! Dimensions in this crate are small (tens), so everything is a plain
//! row-major `Vec` with unblocked loops.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::{compensated_sum, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("positive-definite repair failed after {doublings} jitter doublings")]
    RepairFailed { doublings: u32 },
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Number of jitter doublings [`repair_to_spd`] attempts before giving up.
pub const MAX_JITTER_DOUBLINGS: u32 = 60;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix { rows: rows.len(), cols, data }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// Returns `self + lambda * I`.
    pub fn add_diagonal(&self, lambda: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += lambda;
        }
        m
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(m + mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut m = self.clone();
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = half * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.row_iter().map(|r| r.iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.rows {
            list.entry(&&self.data[i * self.cols..(i + 1) * self.cols]);
        }
        list.finish()
    }
}

fn symmetry_tolerance<T: Real>(m: &Matrix<T>) -> T {
    // 1e-12 relative for f64
    T::epsilon() * T::lit(4096.0) * (T::one() + m.max_abs())
}

/// Cholesky factorization of a symmetric matrix, returning the lower factor.
///
/// Fails with [`LinalgError::NotPositiveDefinite`] when a pivot is not
/// strictly positive and finite.
pub fn cholesky<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let asym = m.max_asymmetry();
    if asym > symmetry_tolerance(m) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym.to_f64().unwrap_or(f64::NAN) });
    }
    cholesky_unchecked(m)
}

/// Factorizes using only the lower triangle of `m`.
fn cholesky_unchecked<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite {
                pivot: j,
                value: diag.to_f64().unwrap_or(f64::NAN),
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Symmetric positive-definite matrix stored with its Cholesky factor.
#[derive(Clone, PartialEq)]
pub struct SpdMatrix<T> {
    entries: Matrix<T>,
    chol: Matrix<T>,
}

impl<T: Real> SpdMatrix<T> {
    /// Symmetrizes `m` and factorizes it.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        let entries = m.symmetrized();
        let chol = cholesky_unchecked(&entries)?;
        Ok(SpdMatrix { entries, chol })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    /// `s · I`. Panics unless `s > 0`.
    pub fn scaled_identity(dim: usize, s: T) -> Self {
        Self::from_diagonal(&vec![s; dim])
    }

    /// Diagonal matrix. Panics unless every entry is positive.
    pub fn from_diagonal(diag: &[T]) -> Self {
        assert!(diag.iter().all(|&v| v > T::zero()), "diagonal must be positive");
        let entries = Matrix::from_diagonal(diag);
        let chol = Matrix::from_diagonal(&diag.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        SpdMatrix { entries, chol }
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    /// Lower-triangular factor `L` with `L Lᵀ = entries`.
    pub fn chol(&self) -> &Matrix<T> {
        &self.chol
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.entries
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        two * (0..self.dim()).map(|j| self.chol[(j, j)].ln()).sum::<T>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * b[k];
            }
            b[i] = s / self.chol[(i, i)];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.chol[(k, i)] * y[k];
            }
            y[i] = s / self.chol[(i, i)];
        }
    }

    /// `entries⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        Ok(x)
    }

    /// `(x - mu)ᵀ entries⁻¹ (x - mu)` via a forward solve against `L`.
    pub fn mahalanobis_sq(&self, x: &[T], mu: &[T]) -> Result<T> {
        self.check_len(x.len())?;
        self.check_len(mu.len())?;
        let mut diff: Vec<T> = x.iter().zip(mu).map(|(&a, &b)| a - b).collect();
        self.solve_lower_in_place(&mut diff);
        Ok(diff.iter().map(|&v| v * v).sum())
    }

    /// `L z`, used to turn standard normal draws into correlated ones.
    pub fn lower_mul(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..=i).map(|k| self.chol[(i, k)] * z[k]).sum())
            .collect()
    }

    /// `tr(entries⁻¹ other)`, computed column by column through the factor.
    pub fn trace_inv_times(&self, other: &Matrix<T>) -> Result<T> {
        let n = self.dim();
        if other.rows() != n || other.cols() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: other.rows() });
        }
        let mut col = vec![T::zero(); n];
        let mut total = T::zero();
        for j in 0..n {
            for i in 0..n {
                col[i] = other[(i, j)];
            }
            self.solve_lower_in_place(&mut col);
            self.solve_upper_in_place(&mut col);
            total += col[j];
        }
        Ok(total)
    }

    pub fn eigen_spectrum(&self) -> Vec<T> {
        eigen_spectrum(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigen_spectrum().last().copied().unwrap_or_else(T::zero)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }
}

impl<T: fmt::Debug> fmt::Debug for SpdMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpdMatrix").field("entries", &self.entries).finish()
    }
}

pub fn log_det<T: Real>(m: &SpdMatrix<T>) -> T {
    m.log_det()
}

pub fn mahalanobis_sq<T: Real>(x: &[T], mu: &[T], m: &SpdMatrix<T>) -> Result<T> {
    m.mahalanobis_sq(x, mu)
}

/// Eigenvalues of a symmetric matrix, sorted non-increasing.
///
/// Cyclic Jacobi rotations on the symmetrized input. Non-square input
/// yields an empty vector.
pub fn eigen_spectrum<T: Real>(m: &Matrix<T>) -> Vec<T> {
    if !m.is_square() {
        return Vec::new();
    }
    let n = m.rows();
    let mut a = m.symmetrized();
    let frob_sq = compensated_sum(a.as_slice().iter().map(|&v| v * v));
    let tol = T::epsilon() * T::epsilon() * frob_sq;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= tol || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
            }
        }
    }

    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// Result of [`repair_to_spd`]: the factorized matrix and the diagonal
/// shift that made it factorizable.
#[derive(Debug, Clone)]
pub struct Repaired<T> {
    pub matrix: SpdMatrix<T>,
    pub jitter: T,
}

/// Default starting jitter: `1e-9 · trace(m) / d`, or `1e-9` when the trace
/// is not positive.
pub fn default_jitter<T: Real>(m: &Matrix<T>) -> T {
    let rel = T::lit(1e-9);
    let d = T::from_usize_lossy(m.rows().max(1));
    let scale = m.trace() / d;
    if scale > T::zero() && scale.is_finite() {
        rel * scale
    } else {
        rel
    }
}

/// Returns `m + λI` for the smallest `λ ∈ {0, j, 2j, 4j, …}` whose Cholesky
/// factorization succeeds, with `j = jitter0`.
pub fn repair_to_spd<T: Real>(m: &Matrix<T>, jitter0: T) -> Result<Repaired<T>> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    if !m.is_finite() || !(jitter0 > T::zero()) || !jitter0.is_finite() {
        return Err(LinalgError::RepairFailed { doublings: 0 });
    }
    let sym = m.symmetrized();
    if let Ok(matrix) = SpdMatrix::new(sym.clone()) {
        return Ok(Repaired { matrix, jitter: T::zero() });
    }
    let mut lambda = jitter0;
    for _ in 0..=MAX_JITTER_DOUBLINGS {
        if let Ok(matrix) = SpdMatrix::new(sym.add_diagonal(lambda)) {
            return Ok(Repaired { matrix, jitter: lambda });
        }
        lambda *= T::lit(2.0);
        if !lambda.is_finite() {
            break;
        }
    }
    Err(LinalgError::RepairFailed { doublings: MAX_JITTER_DOUBLINGS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix<f64> {
        let a = Matrix::from_row_major(d, d, (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect());
        a.transpose().matmul(&a).unwrap().add_diagonal(1.0)
    }

    fn reconstruct(l: &Matrix<f64>) -> Matrix<f64> {
        l.matmul(&l.transpose()).unwrap()
    }

    fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
        let l = cholesky(&Matrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]])).unwrap();
        assert_eq!(l, Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..12 {
            let m = random_spd(&mut rng, d);
            let l = cholesky(&m).unwrap();
            for j in 0..d {
                assert!(l[(j, j)] > 0.0);
                for i in 0..j {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
            assert!(max_abs_diff(&reconstruct(&l), &m) <= 1e-10 * (1.0 + m.max_abs()));
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_and_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(cholesky(&m), Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })));
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(matches!(cholesky(&m), Err(LinalgError::NotSymmetric { .. })));
        let m = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(cholesky(&m), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn log_det_cases() {
        assert_eq!(SpdMatrix::<f64>::identity(5).log_det(), 0.0);
        let m = SpdMatrix::new(Matrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]])).unwrap();
        assert!((m.log_det() - 36f64.ln()).abs() < 1e-14);
        assert!((m.log_det() - 3.5835).abs() < 1e-4);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 5, 10] {
            let m = SpdMatrix::new(random_spd(&mut rng, d)).unwrap();
            let from_eig: f64 = m.eigen_spectrum().iter().map(|v| v.ln()).sum();
            assert!((m.log_det() - from_eig).abs() < 1e-9, "{} vs {}", m.log_det(), from_eig);
        }
    }

    #[test]
    fn mahalanobis_cases() {
        let id = SpdMatrix::<f64>::identity(2);
        assert_eq!(id.mahalanobis_sq(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mahalanobis_sq(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap(), 25.0);
        let m: SpdMatrix<f64> = SpdMatrix::new(Matrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]])).unwrap();
        let v = m.mahalanobis_sq(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((v - (0.25 + 1.0 / 9.0)).abs() < 1e-15);
        assert!(matches!(
            m.mahalanobis_sq(&[1.0], &[0.0, 0.0]),
            Err(LinalgError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = SpdMatrix::new(random_spd(&mut rng, 4)).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sol = m.solve(&x).unwrap();
        let direct: f64 = x.iter().zip(&sol).map(|(a, b)| a * b).sum();
        assert!((m.mahalanobis_sq(&x, &[0.0; 4]).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn eigen_spectrum_cases() {
        assert_eq!(eigen_spectrum(&Matrix::<f64>::identity(4)), vec![1.0; 4]);
        assert_eq!(eigen_spectrum(&Matrix::from_diagonal(&[9.0, 1.0, 4.0])), vec![9.0, 4.0, 1.0]);
        let e = eigen_spectrum(&Matrix::from_rows(&[[2.0_f64, 1.0], [1.0, 2.0]]));
        assert!((e[0] - 3.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_spectrum_trace_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 1..15 {
            let m = random_spd(&mut rng, d);
            let e = eigen_spectrum(&m);
            assert!(e.windows(2).all(|w| w[0] >= w[1]));
            assert!(e.iter().all(|&v| v > 0.0));
            let tr = m.trace();
            assert!((e.iter().sum::<f64>() - tr).abs() <= 1e-9 * tr.abs());
        }
    }

    #[test]
    fn repair_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(&mut rng, 4);
        let r = repair_to_spd(&m, 1e-6).unwrap();
        assert_eq!(r.jitter, 0.0);
        assert_eq!(r.matrix.entries(), &m.symmetrized());
        // idempotent
        let again = repair_to_spd(r.matrix.entries(), 1e-6).unwrap();
        assert_eq!(again.jitter, 0.0);
        assert_eq!(again.matrix.entries(), r.matrix.entries());

        let r = repair_to_spd(&Matrix::<f64>::zeros(3, 3), 1e-6).unwrap();
        assert_eq!(r.jitter, 1e-6);
        assert_eq!(r.matrix.entries(), &Matrix::identity(3).scaled(1e-6));

        let v = [0.6, 0.8, 0.0];
        let mut outer = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                outer[(i, j)] = v[i] * v[j];
            }
        }
        let r = repair_to_spd(&outer, 1e-8).unwrap();
        assert!(r.jitter > 0.0);
        let min_eig = *eigen_spectrum(r.matrix.entries()).last().unwrap();
        assert!(min_eig >= r.jitter * (1.0 - 1e-6), "{min_eig} < {}", r.jitter);
    }

    #[test]
    fn repair_fails_on_pathological_input() {
        let m = Matrix::from_rows(&[[f64::NAN, 0.0], [0.0, 1.0]]);
        assert!(matches!(repair_to_spd(&m, 1e-6), Err(LinalgError::RepairFailed { .. })));
        let m = Matrix::from_rows(&[[-1e300, 0.0], [0.0, 1.0]]);
        assert!(matches!(repair_to_spd(&m, 1e-300), Err(LinalgError::RepairFailed { .. })));
    }

    #[test]
    fn default_jitter_is_relative() {
        let m = Matrix::from_diagonal(&[2.0_f64, 4.0]);
        assert!((default_jitter(&m) - 3e-9).abs() < 1e-20);
        assert_eq!(default_jitter(&Matrix::<f64>::zeros(2, 2)), 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let m = SpdMatrix::new(Matrix::from_rows(&[[4.0_f32, 1.0], [1.0, 3.0]])).unwrap();
        let e = m.eigen_spectrum();
        assert!((e.iter().sum::<f32>() - 7.0).abs() < 1e-5);
        assert!((m.log_det() - 11f32.ln()).abs() < 1e-5);
    }
}
