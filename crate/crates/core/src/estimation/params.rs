//! Unconstrained parameter vectors for the optimizer.
//!
//! Univariate sub-processes are parametrized by `atanh` of their partial
//! autocorrelations, which keeps every point stationary. Multivariate
//! sub-processes and cross blocks use raw entries; infeasible points are
//! rejected by the objective.

use crate::closure::{CrossFixedBlock, SubprocessCorr};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const PACF_LIMIT: f64 = 0.999;

/// Partial autocorrelations `π_1..π_k` of an autocorrelation sequence
/// `1, ρ_1, …, ρ_k` (Levinson recursion).
pub fn acf_to_pacf(acf: &[f64]) -> Result<Vec<f64>> {
    let k = acf.len().saturating_sub(1);
    let mut pacf = Vec::with_capacity(k);
    let mut phi: Vec<f64> = Vec::new();
    let mut err = 1.0;
    for n in 1..=k {
        let num = acf[n] - phi.iter().enumerate().map(|(j, p)| p * acf[n - 1 - j]).sum::<f64>();
        if err <= 0.0 {
            return Err(Error::NotPositiveDefinite("autocorrelation sequence".into()));
        }
        let p = num / err;
        let next: Vec<f64> = (0..n - 1).map(|j| phi[j] - p * phi[n - 2 - j]).chain([p]).collect();
        phi = next;
        err *= 1.0 - p * p;
        pacf.push(p);
    }
    Ok(pacf)
}

/// Inverse of [`acf_to_pacf`]; returns `1, ρ_1, …, ρ_k`.
pub fn pacf_to_acf(pacf: &[f64]) -> Vec<f64> {
    let mut acf = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    for (idx, &p) in pacf.iter().enumerate() {
        let n = idx + 1;
        let next: Vec<f64> = (0..n - 1).map(|j| phi[j] - p * phi[n - 2 - j]).chain([p]).collect();
        phi = next;
        let rho = phi.iter().enumerate().map(|(j, c)| c * acf[n - 1 - j]).sum::<f64>();
        acf.push(rho);
    }
    acf
}

/// Number of free parameters of a `d`-dimensional order-`k` sub-process.
pub fn subprocess_len(d: usize, k: usize) -> usize {
    d * (d - 1) / 2 + k * d * d
}

pub fn encode_subprocess(s: &SubprocessCorr) -> Vec<f64> {
    let d = s.dim();
    if d == 1 {
        let acf: Vec<f64> = s.blocks().iter().map(|b| b[(0, 0)]).collect();
        return acf_to_pacf(&acf)
            .expect("validated sub-process")
            .into_iter()
            .map(|p| p.clamp(-PACF_LIMIT, PACF_LIMIT).atanh())
            .collect();
    }
    let mut out = Vec::with_capacity(subprocess_len(d, s.order()));
    let b0 = &s.blocks()[0];
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(b0[(i, j)]);
        }
    }
    for b in &s.blocks()[1..] {
        out.extend(b.iter().copied());
    }
    out
}

pub fn decode_subprocess(d: usize, k: usize, theta: &[f64]) -> Result<SubprocessCorr> {
    if theta.len() != subprocess_len(d, k) {
        return Err(Error::DimensionMismatch(format!(
            "sub-process of dimension {d} and order {k} needs {} parameters, got {}",
            subprocess_len(d, k),
            theta.len()
        )));
    }
    if d == 1 {
        let pacf: Vec<f64> = theta.iter().map(|t| t.tanh()).collect();
        return SubprocessCorr::univariate(&pacf_to_acf(&pacf));
    }
    let mut b0 = Matrix::identity(d, d);
    let mut pos = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            b0[(i, j)] = theta[pos];
            b0[(j, i)] = theta[pos];
            pos += 1;
        }
    }
    let mut blocks = vec![b0];
    for _ in 0..k {
        blocks.push(Matrix::from_column_slice(d, d, &theta[pos..pos + d * d]));
        pos += d * d;
    }
    SubprocessCorr::new(blocks)
}

pub fn encode_fixed(fixed: &[CrossFixedBlock]) -> Vec<f64> {
    fixed.iter().flat_map(|f| f.value.iter().copied()).collect()
}

/// Replaces the values of `template` blocks with consecutive entries of `theta`.
pub fn decode_fixed(template: &[CrossFixedBlock], theta: &[f64]) -> Result<Vec<CrossFixedBlock>> {
    let total: usize = template.iter().map(|f| f.value.len()).sum();
    if theta.len() != total {
        return Err(Error::DimensionMismatch(format!(
            "cross blocks need {total} parameters, got {}",
            theta.len()
        )));
    }
    let mut pos = 0;
    template
        .iter()
        .map(|f| {
            let (r, c) = f.value.shape();
            let value = Matrix::from_column_slice(r, c, &theta[pos..pos + r * c]);
            pos += r * c;
            CrossFixedBlock::new(f.pair, f.kind, value)
        })
        .collect()
}
