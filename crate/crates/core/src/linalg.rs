//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix};

/// Relative tolerance used by [`numerical_rank`].
pub const RANK_EPS: f64 = 1e-12;

/// Rank from singular values: counts `σ > max(rows, cols) · eps · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, eps: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let threshold = m.nrows().max(m.ncols()) as f64 * eps * sigma_max;
    sv.iter().filter(|&&s| s > threshold).count()
}

/// `[B, AB, A²B, ..., Aⁿ⁻¹B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// `[C; CA; CA²; ...; CAⁿ⁻¹]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = DMatrix::zeros(n * p, n);
    let mut block = c.clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block *= a;
    }
    out
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.clone().complex_eigenvalues().iter().cloned().collect()
}

/// All eigenvalues strictly in the open left half-plane.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    eigenvalues(a).iter().all(|z| z.re < 0.0)
}

pub fn max_real_part(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `AᵀX + XA + C = 0` through the vectorized (Kronecker) form.
///
/// Returns `None` when the Kronecker operator is singular, i.e. when `A` has
/// two eigenvalues summing to zero.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(AᵀX) = (I ⊗ Aᵀ) vec(X), vec(XA) = (Aᵀ ⊗ I) vec(X), column-major vec.
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-c).as_slice());
    let sol = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

/// Frobenius norm.
pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_of_rank_deficient_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&m, RANK_EPS), 2);
        assert_eq!(numerical_rank(&DMatrix::zeros(2, 2), RANK_EPS), 0);
    }

    #[test]
    fn lyapunov_scalar() {
        // 2a x + c = 0 with a = -1, c = 4 -> x = 2
        let a = DMatrix::from_element(1, 1, -1.0);
        let c = DMatrix::from_element(1, 1, 4.0);
        let x = solve_lyapunov(&a, &c).unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_residual_random() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.3, 0.0, -1.0, 0.5, 0.2, 0.0, -3.0]);
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let x = solve_lyapunov(&a, &c).unwrap();
        let res = a.transpose() * &x + &x * &a + &c;
        assert!(frobenius(&res) < 1e-12);
    }

    #[test]
    fn krylov_matrices_shapes() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::from_element(3, 1, 1.0);
        assert_eq!(controllability_matrix(&a, &b).shape(), (3, 3));
        let c = DMatrix::<f64>::identity(3, 3);
        assert_eq!(observability_matrix(&a, &c).shape(), (9, 3));
    }
}
