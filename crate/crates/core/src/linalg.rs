//! Dense kernels: matrix exponentials, skew/unitary parameterizations, a
//! pivoted LU solver, and the symmetric sparse container used by mesh
//! operators.
//!
//! Two exponential routes are kept deliberately separate. `mat_exp_taylor`
//! is the truncated Horner evaluation that layers differentiate through;
//! `mat_exp_reference` is the scaling-and-squaring evaluation used by
//! simulators and as the accuracy reference. Tests cross-check one against
//! the other; neither may be collapsed into the other.

use ndarray::Array2;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{op}: dimension mismatch, {left} vs {right}")]
    DimMismatch { op: &'static str, left: String, right: String },
    #[error("singular matrix: zero pivot at column {col}")]
    Singular { col: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Error if any entry is NaN or infinite.
pub fn check_finite<T: Scalar>(m: &Array2<T>) -> Result<(), LinalgError> {
    for ((r, c), &v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(LinalgError::NonFinite { row: r, col: c });
        }
    }
    Ok(())
}

fn check_square<T: Scalar>(m: &Array2<T>) -> Result<usize, LinalgError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    Ok(rows)
}

pub fn identity<T: Scalar>(n: usize) -> Array2<T> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[(i, i)] = T::one();
    }
    m
}

pub fn frobenius_norm<T: Scalar>(m: &Array2<T>) -> f64 {
    m.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

/// Conjugate transpose (plain transpose over the reals).
pub fn transpose_conj<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    let (rows, cols) = m.dim();
    Array2::from_shape_fn((cols, rows), |(i, j)| m[(j, i)].conj())
}

/// Truncated Taylor exponential, evaluated by the Horner recursion
/// `p_k = I + M p_{k+1} / (k+1)` from `p_{t_max} = I` down to `p_0`.
///
/// This is the exact polynomial the relaxed layers use; callers choose
/// `t_max` and accept the truncation error that comes with it.
pub fn mat_exp_taylor<T: Scalar>(m: &Array2<T>, t_max: usize) -> Result<Array2<T>, LinalgError> {
    let n = check_square(m)?;
    check_finite(m)?;
    let eye = identity::<T>(n);
    let mut p = eye.clone();
    for k in (0..t_max).rev() {
        let scale = T::from_f64(1.0 / (k + 1) as f64);
        p = &eye + &(m.dot(&p).mapv(|v| v * scale));
    }
    Ok(p)
}

/// Matrix exponential by scaling and squaring: scale so the Frobenius norm
/// is at most 1/2, run a 30-term Taylor sum, then square back.
pub fn mat_exp_reference<T: Scalar>(m: &Array2<T>) -> Result<Array2<T>, LinalgError> {
    check_square(m)?;
    check_finite(m)?;
    let norm = frobenius_norm(m);
    let s = if norm <= 0.5 { 0 } else { (norm / 0.5).log2().ceil() as u32 };
    let scale = T::from_f64(0.5_f64.powi(s as i32));
    let scaled = m.mapv(|v| v * scale);
    let mut e = mat_exp_taylor(&scaled, 30)?;
    for _ in 0..s {
        e = e.dot(&e);
    }
    Ok(e)
}

/// Skew-Hermitian part `S - S^H` of a free square parameter.
pub fn skew_from_free<T: Scalar>(s: &Array2<T>) -> Result<Array2<T>, LinalgError> {
    check_square(s)?;
    check_finite(s)?;
    Ok(s - &transpose_conj(s))
}

/// Unitary matrix `exp(S - S^H)`; orthogonal when the scalars are real.
pub fn unitary_from_free<T: Scalar>(s: &Array2<T>) -> Result<Array2<T>, LinalgError> {
    mat_exp_reference(&skew_from_free(s)?)
}

/// LU factorization with partial pivoting, real dense matrices.
///
/// Simulators factor their implicit-step matrix once and reuse the factors
/// across the whole rollout.
pub struct LuFactors {
    lu: Array2<f64>,
    perm: Vec<usize>,
}

pub fn lu_factor(a: &Array2<f64>) -> Result<LuFactors, LinalgError> {
    let n = check_square(a)?;
    check_finite(a)?;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = lu[(col, col)].abs();
        for r in col + 1..n {
            let v = lu[(r, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return Err(LinalgError::Singular { col });
        }
        if pivot_row != col {
            perm.swap(col, pivot_row);
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
        }
        let inv_pivot = 1.0 / lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] * inv_pivot;
            lu[(r, col)] = factor;
            for c in col + 1..n {
                lu[(r, c)] -= factor * lu[(col, c)];
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.lu.nrows()
    }

    /// Solve `A x = b` for one right-hand side.
    #[allow(clippy::needless_range_loop)] // substitution order mirrors the math
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n(), "rhs length must match matrix order");
        let n = self.n();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= self.lu[(r, c)] * x[c];
            }
            x[r] = acc / self.lu[(r, r)];
        }
        x
    }

    /// Solve column-by-column for a matrix right-hand side.
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(b.nrows(), self.n(), "rhs rows must match matrix order");
        let mut out = Array2::zeros(b.dim());
        for c in 0..b.ncols() {
            let col: Vec<f64> = b.column(c).to_vec();
            let x = self.solve_vec(&col);
            for (r, v) in x.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Symmetric sparse matrix stored as a diagonal plus strictly-upper triplets.
///
/// Invariant: every triplet has `i < j`; symmetry is implied, never stored
/// twice.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    diag: Vec<f64>,
    off: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(n: usize, diag: Vec<f64>, off: Vec<(usize, usize, f64)>) -> Self {
        assert_eq!(diag.len(), n, "diagonal length must equal the order");
        for &(i, j, _) in &off {
            assert!(i < j && j < n, "off-diagonal triplets must satisfy i < j < n");
        }
        SparseSym { n, diag, off }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_triplets(&self) -> &[(usize, usize, f64)] {
        &self.off
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must equal the order");
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, w) in &self.off {
            y[i] += w * x[j];
            y[j] += w * x[i];
        }
        y
    }

    /// Apply to each column of a dense matrix.
    pub fn matmat(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "matrix rows must equal the order");
        let mut y = Array2::zeros(x.dim());
        for c in 0..x.ncols() {
            for r in 0..self.n {
                y[(r, c)] = self.diag[r] * x[(r, c)];
            }
            for &(i, j, w) in &self.off {
                y[(i, c)] += w * x[(j, c)];
                y[(j, c)] += w * x[(i, c)];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
        }
        for &(i, j, w) in &self.off {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        m
    }

    /// `x^T A x`, exploiting symmetry.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n, "vector length must equal the order");
        let mut acc = 0.0;
        for (d, v) in self.diag.iter().zip(x) {
            acc += d * v * v;
        }
        for &(i, j, w) in &self.off {
            acc += 2.0 * w * x[i] * x[j];
        }
        acc
    }

    /// Row sums of absolute values, the Gershgorin radius plus |diagonal|.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        for &(i, j, w) in &self.off {
            s[i] += w.abs();
            s[j] += w.abs();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix<T: Scalar>(n: usize, std: f64, rng: &mut ChaCha8Rng) -> Array2<T> {
        Array2::from_shape_fn((n, n), |_| {
            let z = T::standard_normal(rng);
            z * T::from_f64(std)
        })
    }

    #[test]
    fn taylor_exp_matches_planar_rotation() {
        // exp([[0, 1], [-1, 0]]) rotates by one radian.
        let m = array![[0.0, 1.0], [-1.0, 0.0]];
        let e = mat_exp_taylor(&m, 20).unwrap();
        let c = 1.0_f64.cos();
        let s = 1.0_f64.sin();
        let expect = array![[c, s], [-s, c]];
        assert!(frobenius_norm(&(&e - &expect)) < 1e-12);
    }

    #[test]
    fn taylor_exp_zero_terms_is_identity() {
        let m = array![[3.0, 1.0], [2.0, -1.0]];
        let e = mat_exp_taylor(&m, 0).unwrap();
        assert_eq!(e, identity::<f64>(2));
    }

    #[test]
    fn taylor_horner_equals_naive_sum() {
        // Independent route: accumulate M^i / i! term by term.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m: Array2<f64> = random_matrix(5, 0.3, &mut rng);
        let t_max = 8;
        let mut term = identity::<f64>(5);
        let mut naive = identity::<f64>(5);
        for i in 1..=t_max {
            term = m.dot(&term).mapv(|v| v / i as f64);
            naive = &naive + &term;
        }
        let horner = mat_exp_taylor(&m, t_max).unwrap();
        assert!(frobenius_norm(&(&horner - &naive)) < 1e-13);
    }

    #[test]
    fn reference_exp_matches_diagonal_closed_form() {
        let m = array![[1.0, 0.0], [0.0, 2.0]];
        let e = mat_exp_reference(&m).unwrap();
        assert!((e[(0, 0)] - 1.0_f64.exp()).abs() < 1e-13);
        assert!((e[(1, 1)] - 2.0_f64.exp()).abs() < 1e-13);
        assert!(e[(0, 1)].abs() < 1e-14 && e[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn reference_exp_agrees_with_taylor_on_small_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m: Array2<f64> = random_matrix(6, 0.05, &mut rng);
            assert!(frobenius_norm(&m) < 0.5, "test premise: no scaling needed");
            let a = mat_exp_reference(&m).unwrap();
            let b = mat_exp_taylor(&m, 30).unwrap();
            assert!(frobenius_norm(&(&a - &b)) < 1e-14);
        }
    }

    #[test]
    fn reference_exp_semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m: Array2<f64> = random_matrix(6, 1.0, &mut rng);
        let e1 = mat_exp_reference(&m).unwrap();
        let half = m.mapv(|v| v * 0.5);
        let eh = mat_exp_reference(&half).unwrap();
        let e2 = eh.dot(&eh);
        let rel = frobenius_norm(&(&e1 - &e2)) / frobenius_norm(&e1);
        assert!(rel < 1e-12, "semigroup violation: {rel}");
    }

    #[test]
    fn exp_of_complex_diagonal() {
        let i = Complex64::new(0.0, 1.0);
        let m = array![[i, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), -i]];
        let e = mat_exp_reference(&m).unwrap();
        assert!((e[(0, 0)] - Complex64::new(1.0_f64.cos(), 1.0_f64.sin())).norm() < 1e-13);
        assert!((e[(1, 1)] - Complex64::new(1.0_f64.cos(), -1.0_f64.sin())).norm() < 1e-13);
    }

    #[test]
    fn skew_from_free_is_exactly_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Array2<Complex64> = random_matrix(8, 1.0, &mut rng);
        let w = skew_from_free(&s).unwrap();
        let wh = transpose_conj(&w);
        for (a, b) in w.iter().zip(wh.iter()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn unitary_from_free_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s: Array2<Complex64> = random_matrix(16, 0.25, &mut rng);
        let u = unitary_from_free(&s).unwrap();
        let g = transpose_conj(&u).dot(&u);
        let dev = frobenius_norm(&(&g - &identity::<Complex64>(16)));
        assert!(dev < 1e-10, "U^H U deviates from I by {dev}");
    }

    #[test]
    fn orthogonal_from_free_real_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s: Array2<f64> = random_matrix(12, 0.25, &mut rng);
        let u = unitary_from_free(&s).unwrap();
        let g = u.t().dot(&u);
        assert!(frobenius_norm(&(&g - &identity::<f64>(12))) < 1e-10);
    }

    #[test]
    fn non_square_and_non_finite_are_rejected() {
        let m = Array2::<f64>::zeros((2, 3));
        assert!(matches!(mat_exp_taylor(&m, 3), Err(LinalgError::NotSquare { .. })));
        let mut bad = Array2::<f64>::zeros((2, 2));
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(mat_exp_reference(&bad), Err(LinalgError::NonFinite { row: 0, col: 1 })));
    }

    #[test]
    fn lu_solves_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a: Array2<f64> = random_matrix(10, 1.0, &mut rng);
        // Diagonal shift keeps the test matrix comfortably nonsingular.
        let a = &a + &identity::<f64>(10).mapv(|v: f64| v * 8.0);
        let x_true: Vec<f64> = (0..10).map(|i| (i as f64) - 4.5).collect();
        let b = a.dot(&Array2::from_shape_vec((10, 1), x_true.clone()).unwrap());
        let f = lu_factor(&a).unwrap();
        let x = f.solve_vec(&b.column(0).to_vec());
        let err: f64 = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max abs error {err}");
    }

    #[test]
    fn lu_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(lu_factor(&a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn sparse_sym_matches_dense() {
        let s = SparseSym::new(4, vec![2.0, 1.0, 3.0, 0.5], vec![(0, 1, -1.0), (1, 3, 0.7)]);
        let x = vec![1.0, -2.0, 0.5, 4.0];
        let dense = s.to_dense();
        let y_sparse = s.matvec(&x);
        let xv = Array2::from_shape_vec((4, 1), x.clone()).unwrap();
        let y_dense = dense.dot(&xv);
        for i in 0..4 {
            assert!((y_sparse[i] - y_dense[(i, 0)]).abs() < 1e-14);
        }
        let q = s.quadratic_form(&x);
        let q_dense = x
            .iter()
            .enumerate()
            .map(|(i, xi)| xi * y_dense[(i, 0)])
            .sum::<f64>();
        assert!((q - q_dense).abs() < 1e-12);
    }
}
