//! Dense linear-algebra primitives: Kronecker products, vectorization,
//! commutation and exchange matrices, block Toeplitz assembly, Gaussian
//! conditioning and positive-definiteness checks.
//!
//! All matrices are `nalgebra::DMatrix<f64>`. Every function here is pure.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Default threshold on the smallest eigenvalue for positive definiteness.
pub const PD_TOL: f64 = 1e-10;
/// Maximum absolute asymmetry tolerated before symmetrizing.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Condition number above which a linear system is treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = Matrix::zeros(m * p, n * q);
    for i in 0..m {
        for j in 0..n {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * p, j * q), (p, q)).copy_from(&(b * s));
        }
    }
    out
}

/// Stacks the columns of `a` into a single column vector.
pub fn vec(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    // nalgebra storage is column-major, which is exactly the vec ordering.
    Matrix::from_column_slice(m * n, 1, a.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `rows * cols` column into a matrix.
pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Commutation matrix `K_{m,n}`: the `mn x mn` permutation with
/// `K * vec(A) = vec(A^T)` for every `m x n` matrix `A`.
pub fn commutation_matrix(m: usize, n: usize) -> Matrix {
    let mut k = Matrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            // A[i,j] sits at i + j*m in vec(A) and at j + i*n in vec(A^T).
            k[(j + i * n, i + j * m)] = 1.0;
        }
    }
    k
}

/// `m x m` exchange matrix with ones on the anti-diagonal.
pub fn exchange_matrix(m: usize) -> Matrix {
    Matrix::from_fn(m, m, |i, j| if i + j + 1 == m { 1.0 } else { 0.0 })
}

/// Extracts the submatrix with the given row and column indices.
pub fn submatrix(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Largest absolute entry of `a - a^T`.
pub fn max_asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Returns `(a + a^T) / 2` after checking that `a` is square and symmetric
/// within `tol`.
pub fn symmetrize_checked(a: &Matrix, tol: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asymmetry = max_asymmetry(a);
    if asymmetry > tol {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &Matrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// True iff the smallest eigenvalue of the symmetrized input exceeds `tol`.
///
/// Fails with [`Error::NotSymmetric`] when `a` is asymmetric beyond
/// [`SYMMETRY_TOL`].
pub fn is_positive_definite(a: &Matrix, tol: f64) -> Result<bool> {
    let sym = symmetrize_checked(a, SYMMETRY_TOL)?;
    if sym.iter().any(|x| !x.is_finite()) {
        return Ok(false);
    }
    Ok(min_eigenvalue(&sym) > tol)
}

/// Block Toeplitz matrix from lag blocks `blocks[0..=m]`: block `(r, s)` is
/// `blocks[s - r]` above the diagonal and `blocks[r - s]^T` below it.
pub fn block_toeplitz(blocks: &[Matrix]) -> Matrix {
    assert!(!blocks.is_empty(), "block_toeplitz needs at least one block");
    let d = blocks[0].nrows();
    let n = blocks.len();
    let mut out = Matrix::zeros(n * d, n * d);
    for r in 0..n {
        for s in 0..n {
            let block = if s >= r {
                blocks[s - r].clone()
            } else {
                blocks[r - s].transpose()
            };
            out.view_mut((r * d, s * d), (d, d)).copy_from(&block);
        }
    }
    out
}

/// Solves `a x = b` for symmetric `a`, using a Cholesky factorization and
/// falling back to pivoted LU when `a` is indefinite.
pub fn solve_symmetric(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{}x{} symmetric system", a.nrows(), a.ncols())))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &Matrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the square system `a x = b` by pivoted LU, rejecting systems whose
/// condition number exceeds [`MAX_CONDITION`].
pub fn solve_well_conditioned(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{} with right-hand side {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let cond = condition_number(a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Singular(format!("condition number {cond:.3e}")));
    }
    a.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization failed".into()))
}

/// Row/column selection for Gaussian conditioning: `head` is the block being
/// conditioned, `tail` the conditioning block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSplit {
    head: Vec<usize>,
    tail: Vec<usize>,
}

impl IndexSplit {
    /// Validates that `head` and `tail` are disjoint, duplicate-free and
    /// together cover `0..dim`.
    pub fn new(head: Vec<usize>, tail: Vec<usize>, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &i in head.iter().chain(tail.iter()) {
            if i >= dim {
                return Err(Error::InvalidInput(format!("index {i} out of range for dim {dim}")));
            }
            if seen[i] {
                return Err(Error::InvalidInput(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput(
                "head and tail must cover every index".into(),
            ));
        }
        Ok(Self { head, tail })
    }

    /// Split of a subset of indices that need not cover the whole matrix.
    /// Indices outside `head ∪ tail` are marginalized out.
    pub fn partial(head: Vec<usize>, tail: Vec<usize>) -> Result<Self> {
        let dim = head.iter().chain(tail.iter()).copied().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; dim];
        for &i in head.iter().chain(tail.iter()) {
            if seen[i] {
                return Err(Error::InvalidInput(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
        Ok(Self { head, tail })
    }

    pub fn head(&self) -> &[usize] {
        &self.head
    }

    pub fn tail(&self) -> &[usize] {
        &self.tail
    }
}

/// Conditional distribution of the head block given the tail block of a
/// zero-mean Gaussian with covariance `cov`.
///
/// Returns `(coeff, cond_cov)` with `coeff = S_ht S_tt^{-1}` and
/// `cond_cov = S_hh - coeff S_th`. With an empty tail the coefficient is an
/// empty matrix and the conditional covariance is `S_hh`.
pub fn gaussian_condition(cov: &Matrix, split: &IndexSplit) -> Result<(Matrix, Matrix)> {
    let n = cov.nrows();
    if !cov.is_square() || split.head.iter().chain(split.tail.iter()).any(|&i| i >= n) {
        return Err(Error::DimensionMismatch(format!(
            "split does not fit a {}x{} covariance",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let s_hh = submatrix(cov, &split.head, &split.head);
    if split.tail.is_empty() {
        return Ok((Matrix::zeros(split.head.len(), 0), s_hh));
    }
    let s_tt = submatrix(cov, &split.tail, &split.tail);
    let s_th = submatrix(cov, &split.tail, &split.head);
    let coeff_t = match Cholesky::new(s_tt.clone()) {
        Some(chol) => chol.solve(&s_th),
        None => {
            let lu = s_tt.clone().full_piv_lu();
            if !lu.is_invertible() || condition_number(&s_tt) > MAX_CONDITION {
                return Err(Error::Singular("conditioning block is singular".into()));
            }
            lu.solve(&s_th)
                .ok_or_else(|| Error::Singular("conditioning block is singular".into()))?
        }
    };
    if coeff_t.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("conditioning block is singular".into()));
    }
    let coeff = coeff_t.transpose();
    let cond_cov = &s_hh - &coeff * &s_th;
    Ok((coeff, cond_cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let b = random_matrix(rng, n, n);
        &b * b.transpose() + Matrix::identity(n, n) * 0.1
    }

    /// Cyclic Jacobi eigenvalue iteration, independent of nalgebra's solver.
    fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let mut rot = Matrix::identity(n, n);
                    rot[(p, p)] = c;
                    rot[(q, q)] = c;
                    rot[(p, q)] = s;
                    rot[(q, p)] = -s;
                    m = rot.transpose() * &m * &rot;
                }
            }
        }
        (0..n).map(|i| m[(i, i)]).collect()
    }

    #[test]
    fn kron_identity_and_scalar() {
        let i6 = kron(&Matrix::identity(2, 2), &Matrix::identity(3, 3));
        assert_eq!(i6, Matrix::identity(6, 6));
        let swap = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let out = kron(&swap, &Matrix::from_element(1, 1, 2.0));
        assert_eq!(out, Matrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
    }

    #[test]
    fn kron_matches_elementwise_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 1);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 2));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    assert_eq!(k[(i * 3 + p, j)], a[(i, j)] * b[(p, 0)]);
                }
            }
        }
        assert_eq!(k, a.kronecker(&b));
    }

    #[test]
    fn vec_examples() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        let col = Matrix::from_column_slice(3, 1, &[5.0, 6.0, 7.0]);
        assert_eq!(vec(&col), col);
        assert_eq!(unvec(&vec(&a), 2, 2).unwrap(), a);
    }

    #[test]
    fn vec_of_product_identity() {
        // vec((AB)^T) = (A ⊗ I_n) vec(B^T) for A: m x p, B: p x n.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 2, 3);
        let b = random_matrix(&mut rng, 3, 2);
        let lhs = vec(&(&a * &b).transpose());
        let rhs = kron(&a, &Matrix::identity(2, 2)) * vec(&b.transpose());
        assert!((lhs - rhs).abs().max() < 1e-14);
        // and the column-major form vec(AB) = (I_n ⊗ A) vec(B)
        let lhs = vec(&(&a * &b));
        let rhs = kron(&Matrix::identity(2, 2), &a) * vec(&b);
        assert!((lhs - rhs).abs().max() < 1e-14);
    }

    #[test]
    fn commutation_examples() {
        assert_eq!(commutation_matrix(1, 4), Matrix::identity(4, 4));
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = commutation_matrix(2, 2) * vec(&a);
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let k = commutation_matrix(2, 3) * commutation_matrix(3, 2);
        assert_eq!(k, Matrix::identity(6, 6));
    }

    #[test]
    fn exchange_examples() {
        assert_eq!(exchange_matrix(1), Matrix::identity(1, 1));
        assert_eq!(
            exchange_matrix(2),
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
        let j = exchange_matrix(5);
        assert_eq!(&j * &j, Matrix::identity(5, 5));
    }

    #[test]
    fn gaussian_condition_bivariate() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let split = IndexSplit::new(vec![0], vec![1], 2).unwrap();
        let (coeff, cc) = gaussian_condition(&cov, &split).unwrap();
        assert!((coeff[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((cc[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gaussian_condition_independent_blocks() {
        let cov = Matrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 4.0],
        );
        let split = IndexSplit::new(vec![0, 1], vec![2], 3).unwrap();
        let (coeff, cc) = gaussian_condition(&cov, &split).unwrap();
        assert_eq!(coeff, Matrix::zeros(2, 1));
        assert_eq!(cc, submatrix(&cov, &[0, 1], &[0, 1]));
    }

    #[test]
    fn gaussian_condition_matches_block_inverse() {
        // The conditional covariance is the inverse of the head block of the
        // precision matrix, and the coefficient is -P_hh^{-1} P_ht.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cov = random_spd(&mut rng, 4);
        let split = IndexSplit::new(vec![0, 2], vec![1, 3], 4).unwrap();
        let (coeff, cc) = gaussian_condition(&cov, &split).unwrap();
        let prec = cov.clone().try_inverse().unwrap();
        let p_hh = submatrix(&prec, &[0, 2], &[0, 2]);
        let p_ht = submatrix(&prec, &[0, 2], &[1, 3]);
        let p_hh_inv = p_hh.try_inverse().unwrap();
        assert!((&cc - &p_hh_inv).abs().max() < 1e-12);
        assert!((&coeff + &p_hh_inv * p_ht).abs().max() < 1e-12);
    }

    #[test]
    fn gaussian_condition_singular_tail() {
        let cov = Matrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 1.0, 1.0],
        );
        let split = IndexSplit::new(vec![0], vec![1, 2], 3).unwrap();
        assert!(matches!(
            gaussian_condition(&cov, &split),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn index_split_validation() {
        assert!(IndexSplit::new(vec![0, 0], vec![1], 2).is_err());
        assert!(IndexSplit::new(vec![0], vec![2], 3).is_err());
        assert!(IndexSplit::new(vec![0], vec![3], 3).is_err());
    }

    #[test]
    fn positive_definite_examples() {
        assert!(is_positive_definite(&Matrix::identity(4, 4), PD_TOL).unwrap());
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.01, 1.01, 1.0]);
        assert!(!is_positive_definite(&m, PD_TOL).unwrap());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(matches!(
            is_positive_definite(&asym, PD_TOL),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn block_toeplitz_layout() {
        let b0 = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let b1 = Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.3, 0.4]);
        let t = block_toeplitz(&[b0.clone(), b1.clone()]);
        assert_eq!(t.view((0, 2), (2, 2)), b1);
        assert_eq!(t.view((2, 0), (2, 2)), b1.transpose());
        assert_eq!(t.view((2, 2), (2, 2)), b0);
    }

    proptest! {
        #[test]
        fn commutation_transposes(m in 1usize..=5, n in 1usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, m, n);
            let lhs = commutation_matrix(m, n) * vec(&a);
            prop_assert_eq!(lhs, vec(&a.transpose()));
        }

        #[test]
        fn conditioning_matches_naive_formula(n in 2usize..=12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = random_spd(&mut rng, n);
            let h = rng.gen_range(1..n);
            let head: Vec<usize> = (0..h).collect();
            let tail: Vec<usize> = (h..n).collect();
            let split = IndexSplit::new(head.clone(), tail.clone(), n).unwrap();
            let (coeff, cc) = gaussian_condition(&cov, &split).unwrap();
            let s12 = submatrix(&cov, &head, &tail);
            let s22_inv = submatrix(&cov, &tail, &tail).try_inverse().unwrap();
            let naive = submatrix(&cov, &head, &head) - &s12 * &s22_inv * s12.transpose();
            prop_assert!((&cc - &naive).abs().max() < 1e-10);
            prop_assert!((&coeff - &s12 * &s22_inv).abs().max() < 1e-10);
        }

        #[test]
        fn pd_agrees_with_jacobi(n in 1usize..=6, shift in -1.5f64..1.5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_matrix(&mut rng, n, n);
            let a = (&b + b.transpose()) * 0.5 + Matrix::identity(n, n) * shift;
            let min_eig = jacobi_eigenvalues(&a).into_iter().fold(f64::INFINITY, f64::min);
            prop_assume!((min_eig - PD_TOL).abs() > 1e-8);
            prop_assert_eq!(is_positive_definite(&a, PD_TOL).unwrap(), min_eig > PD_TOL);
        }
    }
}
