//! Multi-stage maximum-likelihood estimation of Gaussian-copula VAR(k)
//! models with margin-closure constraints.
//!
//! Stage 1 fits each margin, stage 2 fits each sub-process on the latent
//! scale, stage 3 fits the free cross blocks and an optional stage 4
//! refines every copula parameter jointly.

mod diagnostics;
mod likelihood;
mod params;
mod stages;

pub use diagnostics::{portmanteau, Portmanteau};
pub use likelihood::{copula_loglik, loglik_full, loglik_sub, Latent, Loglik};
pub use params::{acf_to_pacf, pacf_to_acf};
pub use stages::{
    fit_copula, fit_stage1, fit_stage2, fit_stage3, fit_stage4, zero_fixed_blocks, CopulaFit, FitOptions,
    SubprocessFit,
};

use crate::closure::{Condition, ConditionLabels, MarginClosedModel, Partition};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::margins::{from_latent, MarginFamily, MarginSpec};
use crate::var::{simulate, var_residuals, VarRepresentation};

/// Structural choices of a model: partition, condition labels, order and
/// margin families.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub partition: Partition,
    pub labels: ConditionLabels,
    pub order: usize,
    pub families: Vec<MarginFamily>,
}

impl ModelConfig {
    pub fn new(
        partition: Partition,
        labels: ConditionLabels,
        order: usize,
        families: Vec<MarginFamily>,
    ) -> Result<Self> {
        if labels.len() != partition.len() {
            return Err(Error::InvalidInput(format!(
                "{} condition labels for {} sets",
                labels.len(),
                partition.len()
            )));
        }
        if families.len() != partition.dim() {
            return Err(Error::InvalidInput(format!(
                "{} margin families for {} variables",
                families.len(),
                partition.dim()
            )));
        }
        Ok(Self {
            partition,
            labels,
            order,
            families,
        })
    }

    /// The unrestricted model: every variable in one sub-process.
    pub fn unrestricted(order: usize, families: Vec<MarginFamily>) -> Result<Self> {
        let d = families.len();
        Self::new(
            Partition::new(vec![(0..d).collect()], d)?,
            ConditionLabels::new(vec![Condition::Forward]),
            order,
            families,
        )
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }
}

/// Free parameters of the model. With `restricted` the copula counts are
/// those of the margin-closed structure, otherwise of an unrestricted
/// VAR(k) correlation structure on all `d` variables.
pub fn count_params(config: &ModelConfig, restricted: bool) -> usize {
    let margins: usize = config.families.iter().map(|f| f.param_count()).sum();
    let k = config.order;
    if !restricted {
        let d = config.dim();
        return margins + d * (d - 1) / 2 + k * d * d;
    }
    let dims = config.partition.set_dims();
    let within: usize = dims.iter().map(|&di| di * (di - 1) / 2 + k * di * di).sum();
    let cross: usize = (0..dims.len())
        .flat_map(|i| ((i + 1)..dims.len()).map(move |j| (i, j)))
        .map(|(i, j)| dims[i] * dims[j])
        .sum();
    margins + within + cross
}

/// A fitted model with its margins, copula and fit statistics.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub config: ModelConfig,
    pub margins: Vec<MarginSpec>,
    pub model: MarginClosedModel,
    pub loglik: f64,
    pub copula_loglik: f64,
    pub param_count: usize,
    pub aic: f64,
    /// Probabilities clamped by the latent transform.
    pub clamped: usize,
}

impl FittedModel {
    /// Assembles fit statistics for given margins and copula on `data`.
    pub fn evaluate(config: ModelConfig, margins: Vec<MarginSpec>, model: MarginClosedModel, data: &Matrix) -> Result<Self> {
        let latent = Latent::new(data, &margins)?;
        let copula = copula_loglik(&latent.z, &model.r_time_major, config.order)?;
        let loglik = latent.margin_loglik + copula;
        let param_count = count_params(&config, true);
        Ok(Self {
            aic: 2.0 * param_count as f64 - 2.0 * loglik,
            config,
            margins,
            model,
            loglik,
            copula_loglik: copula,
            param_count,
            clamped: latent.clamped,
        })
    }

    /// VAR residuals of the latent series.
    pub fn latent_residuals(&self, data: &Matrix) -> Result<Matrix> {
        let latent = Latent::new(data, &self.margins)?;
        var_residuals(&latent.z, &self.model.var)
    }
}

/// Fits the model to `d x T` data: margins first, then the copula.
pub fn fit_model(data: &Matrix, config: &ModelConfig, opts: &FitOptions) -> Result<FittedModel> {
    if data.nrows() != config.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} variables, model has {}",
            data.nrows(),
            config.dim()
        )));
    }
    if config.order == 0 {
        return Err(Error::InvalidInput("VAR order must be at least 1".into()));
    }
    let min_len = (config.order + 1) * config.dim() + 1;
    if data.ncols() <= min_len.max(20) {
        return Err(Error::InvalidInput(format!(
            "{} observations are too few for order {} with {} variables",
            data.ncols(),
            config.order,
            config.dim()
        )));
    }
    let margins: Vec<MarginSpec> = fit_stage1(data, &config.families)?.into_iter().map(|f| f.spec).collect();
    let latent = Latent::new(data, &margins)?;
    let copula = fit_copula(config, &latent, opts)?;
    let model = copula.spec.build()?;
    FittedModel::evaluate(config.clone(), margins, model, data)
}

/// Simulates `len` observations: a latent path of the VAR form mapped
/// through the margin quantile functions.
pub fn simulate_observed(var: &VarRepresentation, margins: &[MarginSpec], len: usize, seed: u64) -> Result<Matrix> {
    if margins.len() != var.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} margins for {} variables",
            margins.len(),
            var.dim()
        )));
    }
    let z = simulate(var, len, seed)?;
    let mut x = z.clone();
    for (i, m) in margins.iter().enumerate() {
        for t in 0..len {
            x[(i, t)] = from_latent(z[(i, t)], m)?;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests;
