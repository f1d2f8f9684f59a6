//! Gaussian VAR(k) processes: conversion between autocovariance sequences
//! and coefficient form, stationarity, simulation and sample statistics.
//!
//! Lag convention throughout: `Γ_l = Cov(Z_t, Z_{t-l})`, so `Γ_{-l} = Γ_l^T`
//! and the time-major covariance of `(Z_t, Z_{t-1}, …, Z_{t-m})` is the block
//! Toeplitz matrix built from `Γ_0..Γ_m` by [`crate::linalg::block_toeplitz`].

mod sample;
mod simulate;

pub use sample::{sample_acf, sample_autocov, sample_pacf, var_residuals};
pub use simulate::{simulate, standard_normals};

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_toeplitz, kron, symmetrize_checked, Matrix, SYMMETRY_TOL};

/// Spectral radius must stay below `1 - STATIONARITY_TOL`.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Coefficient form `Z_t = Σ_l Φ_l Z_{t-l} + ε_t`, `ε_t ~ N(0, Σ_ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarRepresentation {
    #[serde(with = "crate::serde_matrix::vec_of")]
    pub coefficients: Vec<Matrix>,
    #[serde(with = "crate::serde_matrix")]
    pub innovation_cov: Matrix,
}

impl VarRepresentation {
    pub fn new(coefficients: Vec<Matrix>, innovation_cov: Matrix) -> Result<Self> {
        let d = innovation_cov.nrows();
        if d == 0 || !innovation_cov.is_square() {
            return Err(Error::DimensionMismatch(
                "innovation covariance must be square and non-empty".into(),
            ));
        }
        if coefficients.iter().any(|c| c.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!(
                "every coefficient matrix must be {d}x{d}"
            )));
        }
        let innovation_cov = symmetrize_checked(&innovation_cov, SYMMETRY_TOL)?;
        if Cholesky::new(innovation_cov.clone()).is_none() {
            return Err(Error::NotPositiveDefinite("innovation covariance".into()));
        }
        Ok(Self {
            coefficients,
            innovation_cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.innovation_cov.nrows()
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// `dk x dk` companion matrix of the state `(Z_t, …, Z_{t-k+1})`.
    pub fn companion(&self) -> Matrix {
        let d = self.dim();
        let k = self.order().max(1);
        let mut a = Matrix::zeros(d * k, d * k);
        for (l, phi) in self.coefficients.iter().enumerate() {
            a.view_mut((0, l * d), (d, d)).copy_from(phi);
        }
        for r in 1..k {
            a.view_mut((r * d, (r - 1) * d), (d, d))
                .copy_from(&Matrix::identity(d, d));
        }
        a
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.order() == 0 {
            return 0.0;
        }
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Innovation correlation matrix `D^{-1/2} Σ_ε D^{-1/2}`.
    pub fn innovation_corr(&self) -> Matrix {
        let s = &self.innovation_cov;
        Matrix::from_fn(s.nrows(), s.ncols(), |i, j| {
            s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt()
        })
    }
}

/// True iff the companion spectral radius is below `1 - STATIONARITY_TOL`.
pub fn is_stationary(var: &VarRepresentation) -> bool {
    var.spectral_radius() < 1.0 - STATIONARITY_TOL
}

/// Autocovariance blocks `Γ_0..Γ_m` of a stationary process.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    blocks: Vec<Matrix>,
}

impl AutocovSequence {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidInput("autocovariance sequence is empty".into()));
        };
        let d = first.nrows();
        if blocks.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!(
                "every autocovariance block must be {d}x{d}"
            )));
        }
        let mut blocks = blocks;
        blocks[0] = symmetrize_checked(&blocks[0], SYMMETRY_TOL)?;
        Ok(Self { blocks })
    }

    /// Reads `Γ_0..Γ_k` off the first block row of a time-major covariance
    /// of `k + 1` consecutive `d`-variate observations.
    pub fn from_time_major(r: &Matrix, d: usize) -> Result<Self> {
        if d == 0 || r.nrows() % d != 0 || !r.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not made of {d}x{d} blocks",
                r.nrows(),
                r.ncols()
            )));
        }
        let slices = r.nrows() / d;
        let blocks = (0..slices)
            .map(|l| r.view((0, l * d), (d, d)).into_owned())
            .collect();
        Self::new(blocks)
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn max_lag(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Matrix> {
        self.blocks
    }

    /// `Γ_l` for any `|l| <= max_lag`, using `Γ_{-l} = Γ_l^T`.
    pub fn lag(&self, l: isize) -> Matrix {
        if l >= 0 {
            self.blocks[l as usize].clone()
        } else {
            self.blocks[(-l) as usize].transpose()
        }
    }

    /// Time-major covariance of `slices` consecutive observations.
    pub fn time_major(&self, slices: usize) -> Result<Matrix> {
        if slices == 0 || slices > self.blocks.len() {
            return Err(Error::InvalidInput(format!(
                "window of {slices} slices needs lags up to {}",
                slices.saturating_sub(1)
            )));
        }
        Ok(block_toeplitz(&self.blocks[..slices]))
    }

    /// Rescales every block to the correlation scale of `Γ_0`.
    pub fn to_correlation(&self) -> Self {
        let d = self.dim();
        let sd: Vec<f64> = (0..d).map(|i| self.blocks[0][(i, i)].sqrt()).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|b| Matrix::from_fn(d, d, |i, j| b[(i, j)] / (sd[i] * sd[j])))
            .collect();
        Self { blocks }
    }
}

/// Forward and backward predictors produced by Whittle's recursion.
#[derive(Debug, Clone)]
pub struct WhittleRecursion {
    /// `forward[j-1]`: coefficient of `Z_{t-j}` when predicting `Z_t`.
    pub forward: Vec<Matrix>,
    /// `backward[j-1]`: coefficient of `Z_{t-k-1+j}` when predicting `Z_{t-k-1}`
    /// from the `k` later observations.
    pub backward: Vec<Matrix>,
    pub forward_cov: Matrix,
    pub backward_cov: Matrix,
}

fn require_pd(m: &Matrix, what: impl FnOnce() -> String) -> Result<()> {
    let sym = (m + m.transpose()) * 0.5;
    match Cholesky::new(sym) {
        Some(_) => Ok(()),
        None => Err(Error::NotPositiveDefinite(what())),
    }
}

/// Multivariate Durbin–Levinson (Whittle) recursion up to order `k`.
pub fn whittle(acov: &AutocovSequence, k: usize) -> Result<WhittleRecursion> {
    if acov.max_lag() < k {
        return Err(Error::InvalidInput(format!(
            "order {k} needs autocovariances up to lag {k}, have {}",
            acov.max_lag()
        )));
    }
    let gamma0 = acov.lag(0);
    require_pd(&gamma0, || "lag-0 autocovariance".into())?;
    let mut fwd: Vec<Matrix> = Vec::with_capacity(k);
    let mut bwd: Vec<Matrix> = Vec::with_capacity(k);
    let mut v = gamma0.clone();
    let mut v_bwd = gamma0;
    for n in 0..k {
        // Δ_n = Γ(n+1) − Σ_j Φ_{n,j} Γ(n+1−j)
        let mut delta = acov.lag(n as isize + 1);
        for (j, phi) in fwd.iter().enumerate() {
            delta -= phi * acov.lag((n - j) as isize);
        }
        let v_bwd_chol = Cholesky::new((&v_bwd + v_bwd.transpose()) * 0.5)
            .ok_or_else(|| Error::NotPositiveDefinite(format!("backward error covariance at stage {n}")))?;
        let v_chol = Cholesky::new((&v + v.transpose()) * 0.5)
            .ok_or_else(|| Error::NotPositiveDefinite(format!("forward error covariance at stage {n}")))?;
        let phi_new = v_bwd_chol.solve(&delta.transpose()).transpose();
        let psi_new = v_chol.solve(&delta).transpose();
        let mut next_fwd = Vec::with_capacity(n + 1);
        let mut next_bwd = Vec::with_capacity(n + 1);
        for j in 0..n {
            next_fwd.push(&fwd[j] - &phi_new * &bwd[n - 1 - j]);
            next_bwd.push(&bwd[j] - &psi_new * &fwd[n - 1 - j]);
        }
        v = &v - &phi_new * delta.transpose();
        v_bwd = &v_bwd - &psi_new * &delta;
        next_fwd.push(phi_new);
        next_bwd.push(psi_new);
        fwd = next_fwd;
        bwd = next_bwd;
        require_pd(&v, || format!("forward error covariance at stage {}", n + 1))?;
        require_pd(&v_bwd, || format!("backward error covariance at stage {}", n + 1))?;
    }
    Ok(WhittleRecursion {
        forward: fwd,
        backward: bwd,
        forward_cov: (&v + v.transpose()) * 0.5,
        backward_cov: (&v_bwd + v_bwd.transpose()) * 0.5,
    })
}

/// VAR(k) representation whose first `k + 1` autocovariances match `acov`.
pub fn durbin_levinson(acov: &AutocovSequence, k: usize) -> Result<VarRepresentation> {
    let rec = whittle(acov, k)?;
    VarRepresentation::new(rec.forward, rec.forward_cov)
}

/// Autocovariances `Γ_0..Γ_m` implied by a stationary VAR.
pub fn implied_autocov(var: &VarRepresentation, m: usize) -> Result<AutocovSequence> {
    let d = var.dim();
    let k = var.order();
    let radius = var.spectral_radius();
    if radius >= 1.0 - STATIONARITY_TOL {
        return Err(Error::NonStationary {
            spectral_radius: radius,
        });
    }
    let mut blocks: Vec<Matrix> = Vec::with_capacity(m + 1);
    if k == 0 {
        blocks.push(var.innovation_cov.clone());
        blocks.extend((0..m).map(|_| Matrix::zeros(d, d)));
        return AutocovSequence::new(blocks);
    }
    // Stationary state covariance P solves P = A P A^T + Q, i.e.
    // (I - A ⊗ A) vec(P) = vec(Q).
    let a = var.companion();
    let n = d * k;
    let mut q = Matrix::zeros(n, n);
    q.view_mut((0, 0), (d, d)).copy_from(&var.innovation_cov);
    let system = Matrix::identity(n * n, n * n) - kron(&a, &a);
    let rhs = Matrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov system".into()))?;
    let p = Matrix::from_column_slice(n, n, sol.as_slice());
    for l in 0..k.min(m + 1) {
        blocks.push(p.view((0, l * d), (d, d)).into_owned());
    }
    blocks[0] = (&blocks[0] + blocks[0].transpose()) * 0.5;
    let lag = |blocks: &Vec<Matrix>, l: isize| -> Matrix {
        if l >= 0 {
            blocks[l as usize].clone()
        } else {
            blocks[(-l) as usize].transpose()
        }
    };
    while blocks.len() < m + 1 {
        let l = blocks.len() as isize;
        let mut next = Matrix::zeros(d, d);
        for (j, phi) in var.coefficients.iter().enumerate() {
            next += phi * lag(&blocks, l - 1 - j as isize);
        }
        blocks.push(next);
    }
    AutocovSequence::new(blocks)
}
