use super::{Condition, CrossFixedBlock, CrossSolution, FixedKind, SubprocessCorr};
use crate::error::{Error, Result};
use crate::linalg::{commutation_matrix, kron, solve_well_conditioned, Matrix};

/// Forward and backward one-sided predictors of a sub-process.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    /// `forward[m-1]`: coefficient of `Z_{t-m}` in `E[Z_t | Z_{t-1..t-k}]`.
    pub forward: Vec<Matrix>,
    /// `backward[j-1]`: coefficient of `Z_{t-j}` in `E[Z_{t-k-1} | Z_{t-1..t-k}]`.
    pub backward: Vec<Matrix>,
}

impl PredictorSet {
    pub fn from_subprocess(r: &SubprocessCorr) -> Result<Self> {
        Ok(Self {
            forward: forward_predictors(r)?,
            backward: backward_predictors(r)?,
        })
    }
}

/// Solves `coef · gram = row` for a `d x kd` row of lag blocks.
fn regress_on_window(r: &SubprocessCorr, row: &Matrix) -> Result<Vec<Matrix>> {
    let d = r.dim();
    let k = r.order();
    let Some(gram) = r.gram() else {
        return Ok(Vec::new());
    };
    let coef_t = solve_well_conditioned(&gram, &row.transpose())
        .map_err(|e| Error::Singular(format!("sub-process Gram matrix: {e}")))?;
    let coef = coef_t.transpose();
    Ok((0..k)
        .map(|m| coef.view((0, m * d), (d, d)).into_owned())
        .collect())
}

/// `(Σ_1, …, Σ_k)` times the inverse Gram matrix of `(Z_{t-1}, …, Z_{t-k})`.
pub fn forward_predictors(r: &SubprocessCorr) -> Result<Vec<Matrix>> {
    let d = r.dim();
    let k = r.order();
    let mut row = Matrix::zeros(d, k * d);
    for m in 1..=k {
        row.view_mut((0, (m - 1) * d), (d, d)).copy_from(&r.lag(m as isize));
    }
    regress_on_window(r, &row)
}

/// `(Σ_{-k}, Σ_{1-k}, …, Σ_{-1})` times the same inverse Gram matrix.
pub fn backward_predictors(r: &SubprocessCorr) -> Result<Vec<Matrix>> {
    let d = r.dim();
    let k = r.order();
    let mut row = Matrix::zeros(d, k * d);
    for j in 1..=k {
        // Cov(Z_{t-k-1}, Z_{t-j}) = Σ_{j-k-1}
        row.view_mut((0, (j - 1) * d), (d, d))
            .copy_from(&r.lag(j as isize - k as isize - 1));
    }
    regress_on_window(r, &row)
}

/// Banded `k x (2k+1)` block matrix encoding the forward condition: row `r`
/// holds `Φ_k, …, Φ_1, -I` in block columns `r+1 ..= r+k+1`.
pub fn forward_condition_matrix(forward: &[Matrix], d: usize) -> Matrix {
    let k = forward.len();
    let mut g = Matrix::zeros(k * d, (2 * k + 1) * d);
    for r in 0..k {
        for (m, phi) in forward.iter().enumerate() {
            let col = r + k - m;
            g.view_mut((r * d, col * d), (d, d)).copy_from(phi);
        }
        g.view_mut((r * d, (r + k + 1) * d), (d, d))
            .copy_from(&(-Matrix::identity(d, d)));
    }
    g
}

/// Banded block matrix encoding the backward condition: row `r` holds
/// `-I, Ψ_k, …, Ψ_1` in block columns `r ..= r+k`; the last block column is zero.
pub fn backward_condition_matrix(backward: &[Matrix], d: usize) -> Matrix {
    let k = backward.len();
    let mut h = Matrix::zeros(k * d, (2 * k + 1) * d);
    for r in 0..k {
        h.view_mut((r * d, r * d), (d, d))
            .copy_from(&(-Matrix::identity(d, d)));
        for (j, psi) in backward.iter().enumerate() {
            let col = r + k - j;
            h.view_mut((r * d, col * d), (d, d)).copy_from(psi);
        }
    }
    h
}

/// The condition matrix selected by `label` for sub-process `r`.
pub fn condition_matrix(r: &SubprocessCorr, label: Condition) -> Result<Matrix> {
    Ok(match label {
        Condition::Forward => forward_condition_matrix(&forward_predictors(r)?, r.dim()),
        Condition::Backward => backward_condition_matrix(&backward_predictors(r)?, r.dim()),
    })
}

/// Block column `c` (a `rows x d` slab) of a condition matrix.
fn block_col(m: &Matrix, c: usize, d: usize) -> Matrix {
    m.columns(c * d, d).into_owned()
}

/// Determines every cross block of the pair `(i, j)` from the sub-process
/// structures, the labels and the fixed block.
///
/// With both labels equal the contemporaneous block is fixed and the other
/// `2k` blocks solve a square linear system, written in vec form. With mixed
/// labels the fixed block is the one at lag `-k` or `+k` and every other
/// block is zero.
pub fn solve_cross_pair(
    ri: &SubprocessCorr,
    rj: &SubprocessCorr,
    labels: (Condition, Condition),
    fixed: &CrossFixedBlock,
) -> Result<CrossSolution> {
    let (i, j) = fixed.pair;
    let k = ri.order();
    if rj.order() != k {
        return Err(Error::DimensionMismatch(format!(
            "sub-processes {} and {} have different orders",
            i + 1,
            j + 1
        )));
    }
    let (di, dj) = (ri.dim(), rj.dim());
    if fixed.value.shape() != (di, dj) {
        return Err(Error::DimensionMismatch(format!(
            "fixed block for pair ({}, {}) must be {di}x{dj}",
            i + 1,
            j + 1
        )));
    }
    let expected = FixedKind::for_labels(labels.0, labels.1);
    if fixed.kind != expected {
        return Err(Error::InvalidInput(format!(
            "pair ({}, {}) with labels ({}, {}) needs a {} fixed block, got {}",
            i + 1,
            j + 1,
            labels.0.label(),
            labels.1.label(),
            expected,
            fixed.kind
        )));
    }
    let fixed_col = (fixed.kind.lag(k) + k as isize) as usize;
    let mut blocks = vec![Matrix::zeros(di, dj); 2 * k + 1];
    blocks[fixed_col] = fixed.value.clone();
    if k == 0 || fixed.kind != FixedKind::Contemporaneous {
        return CrossSolution::new((i, j), blocks);
    }

    let mi = condition_matrix(ri, labels.0)?;
    let mj = condition_matrix(rj, labels.1)?;
    let cell = di * dj;
    let n = 2 * k * cell;
    let free: Vec<usize> = (0..=2 * k).filter(|&c| c != fixed_col).collect();
    let mut system = Matrix::zeros(n, n);
    let mut rhs = Matrix::zeros(n, 1);
    let vec_fixed = Matrix::from_column_slice(cell, 1, fixed.value.as_slice());

    // Conditions of sub-process i: Σ_c M_i[:, c] X_{c-k} = 0, vectorized as
    // Σ_c (I_{dj} ⊗ M_i[:, c]) vec(X_{c-k}).
    let eye_j = Matrix::identity(dj, dj);
    let rows_a = k * di * dj;
    for c in 0..=2 * k {
        let coef = kron(&eye_j, &block_col(&mi, c, di));
        if c == fixed_col {
            let mut upper = rhs.rows_mut(0, rows_a);
            upper -= &coef * &vec_fixed;
        } else {
            let u = free.iter().position(|&f| f == c).unwrap();
            system.view_mut((0, u * cell), (rows_a, cell)).copy_from(&coef);
        }
    }
    // Conditions of sub-process j act on the reversed, transposed blocks:
    // Σ_c M_j[:, c] X_{k-c}^T = 0, vectorized with the commutation matrix.
    let eye_i = Matrix::identity(di, di);
    let comm = commutation_matrix(di, dj);
    for c in 0..=2 * k {
        let target = 2 * k - c;
        let coef = kron(&eye_i, &block_col(&mj, c, dj)) * &comm;
        if target == fixed_col {
            let mut lower = rhs.rows_mut(rows_a, n - rows_a);
            lower -= &coef * &vec_fixed;
        } else {
            let u = free.iter().position(|&f| f == target).unwrap();
            system.view_mut((rows_a, u * cell), (n - rows_a, cell)).copy_from(&coef);
        }
    }
    let sol = solve_well_conditioned(&system, &rhs).map_err(|e| Error::DegenerateConfiguration {
        i: i + 1,
        j: j + 1,
        reason: format!("cross-dependence system is singular ({e})"),
    })?;
    for (u, &c) in free.iter().enumerate() {
        blocks[c] = Matrix::from_column_slice(di, dj, &sol.as_slice()[u * cell..(u + 1) * cell]);
    }
    CrossSolution::new((i, j), blocks)
}
