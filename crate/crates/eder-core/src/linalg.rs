//! Dense small-matrix routines backing diversity scoring.
//!
//! Segment diversity is the determinant of a Gram matrix of ℓ2-normalized
//! state embeddings. The fast path factors the matrix as `L = C·Cᵀ` and takes
//! the product of squared diagonal entries; a partially-pivoted LU backend
//! serves as an independent cross-check and as the non-Cholesky ablation.
//!
//! Matrices here are tiny (order = segment length, ≤ 64 in practice), so
//! everything is stored dense row-major and computed without blocking.

use std::borrow::Borrow;

use crate::error::{Error, Result};

/// Norm below which a vector is treated as zero and left unnormalized.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Maximum absolute asymmetry tolerated in a kernel matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Magnitude of the most negative Cholesky radicand still attributed to
/// rounding noise. Radicands in `[-PIVOT_CLAMP_TOL, 0)` are clamped to zero;
/// anything below is reported as a non-PSD input.
pub const PIVOT_CLAMP_TOL: f64 = 1e-9;

/// A finite real vector of dimension ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    entries: Vec<f64>,
}

impl Vector {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput(
                "vector must have dimension >= 1".to_string(),
            ));
        }
        if let Some(x) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vector entry {x}")));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Inner product with `other`; dimensions must already agree.
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Scales `v` to unit norm. Vectors with norm below [`ZERO_NORM_EPS`] are
/// returned unchanged, so an all-zero embedding stays zero and its segment
/// scores as minimally diverse instead of dividing by (almost) nothing.
pub fn l2_normalize(v: &Vector) -> Vector {
    let n = v.norm();
    if n < ZERO_NORM_EPS {
        return v.clone();
    }
    Vector {
        entries: v.entries.iter().map(|x| x / n).collect(),
    }
}

/// Symmetric PSD Gram matrix of embedding columns, stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    /// Builds a matrix from row-major entries of length `order²`.
    pub fn from_entries(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("matrix order must be >= 1".to_string()));
        }
        if entries.len() != order * order {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                entries.len()
            )));
        }
        Ok(Self { order, entries })
    }

    pub fn identity(order: usize) -> Self {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = 1.0;
        }
        Self { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.order + col]
    }

    /// First entry pair violating symmetry beyond `tol`, if any.
    fn asymmetry(&self, tol: f64) -> Option<(usize, usize, f64)> {
        for i in 0..self.order {
            for j in (i + 1)..self.order {
                let delta = (self.get(i, j) - self.get(j, i)).abs();
                if delta > tol {
                    return Some((i, j, delta));
                }
            }
        }
        None
    }
}

/// Builds the Gram matrix `L[i][j] = columns[i]·columns[j]` with `jitter`
/// added to each diagonal entry. Each off-diagonal entry is computed once and
/// mirrored, so the output is symmetric exactly.
pub fn gram<B: Borrow<Vector>>(columns: &[B], jitter: f64) -> Result<KernelMatrix> {
    if columns.is_empty() {
        return Err(Error::InvalidInput(
            "gram needs at least one column".to_string(),
        ));
    }
    if jitter.is_nan() || jitter < 0.0 {
        return Err(Error::InvalidInput(format!(
            "jitter must be >= 0, got {jitter}"
        )));
    }
    let b = columns.len();
    let dim = columns[0].borrow().dim();
    for c in columns {
        let got = c.borrow().dim();
        if got != dim {
            return Err(Error::DimensionMismatch { expected: dim, got });
        }
    }
    let mut entries = vec![0.0; b * b];
    for i in 0..b {
        for j in i..b {
            let dot = columns[i].borrow().dot(columns[j].borrow());
            entries[i * b + j] = dot;
            entries[j * b + i] = dot;
        }
        entries[i * b + i] += jitter;
    }
    Ok(KernelMatrix { order: b, entries })
}

/// Lower-triangular Cholesky factor; strict upper entries are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    order: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.order + col]
    }

    pub fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.order).map(|i| self.get(i, i))
    }

    /// `C·Cᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> KernelMatrix {
        let n = self.order;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = 0.0;
                for k in 0..=j {
                    sum += self.get(i, k) * self.get(j, k);
                }
                entries[i * n + j] = sum;
                entries[j * n + i] = sum;
            }
        }
        KernelMatrix { order: n, entries }
    }
}

/// Cholesky factorization `L = C·Cᵀ` with semi-definite handling.
///
/// Uses the textbook column formulas: the diagonal entry is the square root
/// of `L[j][j] - Σ_k C[j][k]²` and each below-diagonal entry divides the
/// partially reduced entry by that pivot. A radicand in
/// `[-PIVOT_CLAMP_TOL, 0)` is treated as a rank deficiency: the pivot is
/// clamped to zero and the rest of the column is zeroed. A radicand below
/// `-PIVOT_CLAMP_TOL` means the input was not PSD to begin with.
pub fn cholesky(matrix: &KernelMatrix) -> Result<LowerTriangular> {
    if let Some((row, col, delta)) = matrix.asymmetry(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric { row, col, delta });
    }
    let n = matrix.order;
    let mut factor = vec![0.0; n * n];
    for j in 0..n {
        let mut radicand = matrix.get(j, j);
        for k in 0..j {
            radicand -= factor[j * n + k] * factor[j * n + k];
        }
        if radicand < -PIVOT_CLAMP_TOL {
            return Err(Error::NotPositiveSemiDefinite { index: j, radicand });
        }
        let pivot = if radicand > 0.0 { radicand.sqrt() } else { 0.0 };
        factor[j * n + j] = pivot;
        if pivot == 0.0 {
            // Rank-deficient column: leave the entries below the pivot zero.
            continue;
        }
        for i in (j + 1)..n {
            let mut sum = matrix.get(i, j);
            for k in 0..j {
                sum -= factor[i * n + k] * factor[j * n + k];
            }
            factor[i * n + j] = sum / pivot;
        }
    }
    Ok(LowerTriangular {
        order: n,
        entries: factor,
    })
}

/// Determinant as the product of squared Cholesky diagonal entries.
/// Always ≥ 0 by construction.
pub fn det_via_cholesky(matrix: &KernelMatrix) -> Result<f64> {
    let factor = cholesky(matrix)?;
    Ok(factor.diag().map(|d| d * d).product())
}

/// Determinant via partially-pivoted LU elimination, sign tracked from row
/// swaps. Independent of the Cholesky path; also the non-Cholesky ablation
/// backend. Works on any square matrix and reports singular inputs as 0.
pub fn det_via_lu(matrix: &KernelMatrix) -> f64 {
    let n = matrix.order;
    let mut work = matrix.entries.clone();
    let mut sign = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = work[col * n + col].abs();
        for row in (col + 1)..n {
            let a = work[row * n + col].abs();
            if a > pivot_abs {
                pivot_abs = a;
                pivot_row = row;
            }
        }
        if pivot_abs == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                work.swap(col * n + k, pivot_row * n + k);
            }
            sign = -sign;
        }
        let pivot = work[col * n + col];
        for row in (col + 1)..n {
            let ratio = work[row * n + col] / pivot;
            work[row * n + col] = 0.0;
            for k in (col + 1)..n {
                work[row * n + k] -= ratio * work[col * n + k];
            }
        }
    }
    let mut det = sign;
    for i in 0..n {
        det *= work[i * n + i];
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[f64]) -> Vector {
        Vector::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn normalize_pythagorean_triple() {
        let out = l2_normalize(&v(&[3.0, 4.0]));
        assert_eq!(out.as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn normalize_zero_vector_is_left_alone() {
        let out = l2_normalize(&v(&[0.0, 0.0]));
        assert_eq!(out.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn normalize_unit_vector_is_identity() {
        let out = l2_normalize(&v(&[1.0, 0.0, 0.0]));
        assert_eq!(out.as_slice(), &[1.0, 0.0, 0.0]);
        assert!((out.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vector_rejects_non_finite_and_empty() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }

    #[test]
    fn gram_orthonormal_columns_is_identity() {
        let m = gram(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 0.0).unwrap();
        assert_eq!(m, KernelMatrix::identity(2));
    }

    #[test]
    fn gram_matches_direct_dot_products() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let m = gram(&[v(&[1.0, 0.0]), v(&[c, c])], 0.0).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((m.get(0, 1) - c).abs() < 1e-12);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!((m.get(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_single_unit_column() {
        let m = gram(&[v(&[0.6, 0.8])], 0.0).unwrap();
        assert_eq!(m.order(), 1);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_rejects_dimension_mismatch() {
        let err = gram(&[v(&[1.0, 0.0]), v(&[1.0, 0.0, 0.0])], 0.0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn gram_jitter_lands_on_diagonal_only() {
        let m = gram(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 1e-10).unwrap();
        assert_eq!(m.get(0, 0), 1.0 + 1e-10);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = KernelMatrix::from_entries(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let c = cholesky(&m).unwrap();
        assert!((c.get(0, 0) - 2.0).abs() < 1e-12);
        assert_eq!(c.get(0, 1), 0.0);
        assert!((c.get(1, 0) - 1.0).abs() < 1e-12);
        assert!((c.get(1, 1) - 2.0f64.sqrt()).abs() < 1e-12);
        // Factor must reconstruct the input.
        let r = c.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.get(i, j) - m.get(i, j)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cholesky_of_identity_is_identity() {
        let c = cholesky(&KernelMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_eq!(c.get(i, j), expected);
            }
        }
    }

    #[test]
    fn cholesky_clamps_singular_rank_one() {
        let m = KernelMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let c = cholesky(&m).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert_eq!(c.get(1, 1), 0.0);
    }

    #[test]
    fn cholesky_rejects_asymmetric_input() {
        let m = KernelMatrix::from_entries(2, vec![1.0, 0.5, 0.2, 1.0]).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_rejects_clearly_non_psd_input() {
        let m = KernelMatrix::from_entries(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveSemiDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn det_via_cholesky_matches_cofactor() {
        let m = KernelMatrix::from_entries(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((det_via_cholesky(&m).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn det_of_identity_is_one() {
        assert_eq!(det_via_cholesky(&KernelMatrix::identity(5)).unwrap(), 1.0);
        assert_eq!(det_via_lu(&KernelMatrix::identity(4)), 1.0);
    }

    #[test]
    fn det_of_correlated_pair() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let m = gram(&[v(&[1.0, 0.0]), v(&[c, c])], 0.0).unwrap();
        // 1 - c² = 0.5 by cofactor expansion.
        assert!((det_via_cholesky(&m).unwrap() - 0.5).abs() < 1e-12);
        assert!((det_via_lu(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lu_det_matches_cofactor_and_handles_singular() {
        let m = KernelMatrix::from_entries(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((det_via_lu(&m) - 8.0).abs() < 1e-12);
        let s = KernelMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(det_via_lu(&s), 0.0);
    }

    #[test]
    fn lu_det_tracks_pivot_sign() {
        // Needs a row swap; det = -2.
        let m = KernelMatrix::from_entries(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        assert!((det_via_lu(&m) + 2.0).abs() < 1e-12);
    }
}
