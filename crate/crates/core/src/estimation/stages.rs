use crate::closure::{CrossFixedBlock, FixedKind, MarginClosureSpec, SubprocessCorr};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::margins::{fit_margin, MarginFamily, MarginFit};
use crate::optim::{nelder_mead, Minimum, NelderMeadOptions};
use crate::var::sample_autocov;

use super::likelihood::{copula_loglik, Latent};
use super::params::{decode_fixed, decode_subprocess, encode_fixed, encode_subprocess};
use super::ModelConfig;

/// Optimizer settings shared by the copula stages.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub optimizer: NelderMeadOptions,
    /// Minimum evaluation budget per free parameter.
    pub evals_per_param: usize,
    /// Run the joint refinement after the three-stage fit.
    pub joint_refinement: bool,
    /// Extra starting values for the cross blocks.
    pub initial_fixed: Vec<CrossFixedBlock>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: NelderMeadOptions {
                max_evals: 20_000,
                ftol: 1e-12,
                xtol: 1e-9,
                step: 0.1,
                restarts: 3,
            },
            evals_per_param: 4000,
            joint_refinement: false,
            initial_fixed: Vec::new(),
        }
    }
}

impl FitOptions {
    fn for_params(&self, n: usize) -> NelderMeadOptions {
        let mut o = self.optimizer.clone();
        o.max_evals = o.max_evals.max(self.evals_per_param * n);
        o
    }
}

/// Maximizes `objective` (a log-likelihood) from each feasible start and
/// keeps the best converged run.
fn maximize<F: Fn(&[f64]) -> f64>(
    objective: F,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
    context: &str,
) -> Result<Minimum> {
    let neg = |x: &[f64]| -objective(x);
    let mut best: Option<Minimum> = None;
    for x0 in starts {
        if let Some(m) = nelder_mead(&neg, x0, opts) {
            if best.as_ref().map_or(true, |b| m.value < b.value) {
                best = Some(m);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible(format!("{context}: every starting point is infeasible")))?;
    if !best.converged {
        return Err(Error::NonConvergence {
            context: context.to_string(),
            best_point: best.point,
            best_value: -best.value,
        });
    }
    Ok(best)
}

/// Stage 1: independent maximum-likelihood fits of each margin.
pub fn fit_stage1(data: &Matrix, families: &[MarginFamily]) -> Result<Vec<MarginFit>> {
    if families.len() != data.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} margin families for {} variables",
            families.len(),
            data.nrows()
        )));
    }
    families
        .iter()
        .enumerate()
        .map(|(i, &fam)| {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            fit_margin(&row, fam)
        })
        .collect()
}

/// A fitted sub-process correlation structure.
#[derive(Debug, Clone)]
pub struct SubprocessFit {
    pub corr: SubprocessCorr,
    pub copula_loglik: f64,
}

fn moment_subprocess(z: &Matrix, k: usize) -> Option<SubprocessCorr> {
    let acov = sample_autocov(z, k).ok()?.to_correlation();
    SubprocessCorr::new(acov.into_blocks()).ok()
}

fn shrink(s: &SubprocessCorr, w: f64) -> Option<SubprocessCorr> {
    let d = s.dim();
    let blocks = s
        .blocks()
        .iter()
        .enumerate()
        .map(|(l, b)| if l == 0 { b * w + Matrix::identity(d, d) * (1.0 - w) } else { b * w })
        .collect();
    SubprocessCorr::new(blocks).ok()
}

/// Stage 2: the correlation structure of one sub-process from its latent
/// rows `z` (`d_i x T`).
pub fn fit_stage2(z: &Matrix, k: usize, opts: &FitOptions) -> Result<SubprocessFit> {
    let d = z.nrows();
    let white = SubprocessCorr::new(
        std::iter::once(Matrix::identity(d, d))
            .chain((0..k).map(|_| Matrix::zeros(d, d)))
            .collect(),
    )?;
    let mut starts = vec![encode_subprocess(&white)];
    if let Some(m) = moment_subprocess(z, k) {
        if let Some(s) = shrink(&m, 0.9) {
            starts.push(encode_subprocess(&s));
        }
        starts.push(encode_subprocess(&m));
    }
    let objective = |theta: &[f64]| match decode_subprocess(d, k, theta) {
        Ok(s) => copula_loglik(z, &s.correlation_matrix(), k).unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    };
    let n = starts[0].len();
    let best = maximize(objective, &starts, &opts.for_params(n), "sub-process correlation fit")?;
    Ok(SubprocessFit {
        corr: decode_subprocess(d, k, &best.point)?,
        copula_loglik: -best.value,
    })
}

fn spec_with(
    config: &ModelConfig,
    subs: Vec<SubprocessCorr>,
    fixed: Vec<CrossFixedBlock>,
) -> Result<MarginClosureSpec> {
    MarginClosureSpec::new(config.partition.clone(), config.labels.clone(), subs, fixed)
}

/// Zero-valued fixed blocks of the right kind and shape for every pair.
pub fn zero_fixed_blocks(config: &ModelConfig) -> Result<Vec<CrossFixedBlock>> {
    let n = config.partition.len();
    let dims = config.partition.set_dims();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let kind = FixedKind::for_labels(config.labels.get(i), config.labels.get(j));
            out.push(CrossFixedBlock::new((i, j), kind, Matrix::zeros(dims[i], dims[j]))?);
        }
    }
    Ok(out)
}

/// Sample cross-correlations at each pair's fixed lag.
fn moment_fixed(config: &ModelConfig, z: &Matrix, template: &[CrossFixedBlock]) -> Option<Vec<CrossFixedBlock>> {
    let k = config.order;
    let acf = sample_autocov(z, k).ok()?.to_correlation();
    template
        .iter()
        .map(|f| {
            let gamma = acf.lag(f.kind.lag(k));
            let (si, sj) = (config.partition.set(f.pair.0), config.partition.set(f.pair.1));
            let value = Matrix::from_fn(si.len(), sj.len(), |r, c| gamma[(si[r], sj[c])]);
            CrossFixedBlock::new(f.pair, f.kind, value).ok()
        })
        .collect()
}

/// A fitted copula: sub-processes, fixed cross blocks and the resulting
/// time-major correlation matrix.
#[derive(Debug, Clone)]
pub struct CopulaFit {
    pub spec: MarginClosureSpec,
    pub r_time_major: Matrix,
    pub copula_loglik: f64,
}

/// Stage 3: the free cross blocks with the sub-processes held fixed. Every
/// evaluation rebuilds the model so the closure constraints hold exactly.
pub fn fit_stage3(config: &ModelConfig, z: &Matrix, subs: &[SubprocessCorr], opts: &FitOptions) -> Result<CopulaFit> {
    let k = config.order;
    let template = zero_fixed_blocks(config)?;
    let objective = |theta: &[f64]| {
        let Ok(fixed) = decode_fixed(&template, theta) else {
            return f64::NEG_INFINITY;
        };
        spec_with(config, subs.to_vec(), fixed)
            .and_then(|s| s.correlation())
            .and_then(|r| copula_loglik(z, &r, k))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut starts = vec![encode_fixed(&template)];
    if let Some(m) = moment_fixed(config, z, &template) {
        let theta = encode_fixed(&m);
        starts.push(theta.iter().map(|x| 0.5 * x).collect());
        starts.push(theta);
    }
    let n = starts[0].len();
    if !opts.initial_fixed.is_empty() {
        let mut given = template.clone();
        for f in &opts.initial_fixed {
            if let Some(slot) = given.iter_mut().find(|g| g.pair == f.pair && g.kind == f.kind) {
                if slot.value.shape() == f.value.shape() {
                    slot.value = f.value.clone();
                }
            }
        }
        starts.insert(0, encode_fixed(&given));
    }
    let best = maximize(objective, &starts, &opts.for_params(n), "cross-block fit")?;
    let spec = spec_with(config, subs.to_vec(), decode_fixed(&template, &best.point)?)?;
    let r = spec.correlation()?;
    Ok(CopulaFit {
        spec,
        r_time_major: r,
        copula_loglik: -best.value,
    })
}

/// Optional stage 4: joint refinement of every copula parameter from a
/// previous fit. The result is never worse than the warm start.
pub fn fit_stage4(config: &ModelConfig, z: &Matrix, warm: &CopulaFit, opts: &FitOptions) -> Result<CopulaFit> {
    let k = config.order;
    let dims = config.partition.set_dims();
    let sub_lens: Vec<usize> = warm.spec.subprocesses.iter().map(|s| encode_subprocess(s).len()).collect();
    let template = warm.spec.fixed.clone();
    let decode = |theta: &[f64]| -> Result<MarginClosureSpec> {
        let mut pos = 0;
        let mut subs = Vec::with_capacity(dims.len());
        for (&d, &len) in dims.iter().zip(&sub_lens) {
            subs.push(decode_subprocess(d, k, &theta[pos..pos + len])?);
            pos += len;
        }
        spec_with(config, subs, decode_fixed(&template, &theta[pos..])?)
    };
    let objective = |theta: &[f64]| {
        decode(theta)
            .and_then(|s| s.correlation())
            .and_then(|r| copula_loglik(z, &r, k))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut x0: Vec<f64> = warm.spec.subprocesses.iter().flat_map(encode_subprocess).collect();
    x0.extend(encode_fixed(&warm.spec.fixed));
    let best = maximize(objective, &[x0.clone()], &opts.for_params(x0.len()), "joint refinement")?;
    if -best.value < warm.copula_loglik {
        return Ok(warm.clone());
    }
    let spec = decode(&best.point)?;
    let r = spec.correlation()?;
    Ok(CopulaFit {
        spec,
        r_time_major: r,
        copula_loglik: -best.value,
    })
}

/// Stages 2 and 3 (and optionally 4) on precomputed latent data.
pub fn fit_copula(config: &ModelConfig, latent: &Latent, opts: &FitOptions) -> Result<CopulaFit> {
    let k = config.order;
    let subs = config
        .partition
        .sets()
        .iter()
        .map(|set| fit_stage2(&latent.restrict(set), k, opts).map(|f| f.corr))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_stage3(config, &latent.z, &subs, opts)?;
    if opts.joint_refinement {
        fit_stage4(config, &latent.z, &fit, opts)
    } else {
        Ok(fit)
    }
}
