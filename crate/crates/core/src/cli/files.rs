//! On-disk TOML formats for run configurations and models.
//!
//! Variable and set indices are 1-based in files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closure::{
    ConditionLabels, CrossFixedBlock, FixedKind, MarginClosedModel, MarginClosureSpec, Partition, SubprocessCorr,
};
use crate::error::{Error, Result};
use crate::estimation::{FitOptions, FittedModel, ModelConfig};
use crate::linalg::Matrix;
use crate::margins::{MarginFamily, MarginSpec};
use crate::var::VarRepresentation;

pub const CONFIG_FORMAT: &str = "mcvar-config/1";
pub const MODEL_FORMAT: &str = "mcvar-model/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubprocessEntry {
    /// `Σ_{ii,0}, …, Σ_{ii,k}`.
    #[serde(with = "crate::serde_matrix::vec_of")]
    pub blocks: Vec<Matrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedEntry {
    /// 1-based set indices `i < j`.
    pub pair: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kind: Option<FixedKind>,
    #[serde(with = "crate::serde_matrix")]
    pub value: Matrix,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerEntry {
    pub max_evals: Option<usize>,
    pub ftol: Option<f64>,
    pub xtol: Option<f64>,
    pub step: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEntry {
    /// Columns to select, in model variable order. All columns when absent.
    pub columns: Option<Vec<String>>,
    /// Data rows after the header to ignore (e.g. a row of transform codes).
    #[serde(default)]
    pub skip_rows: usize,
    /// Log-difference order per selected column (0, 1 or 2).
    pub log_diff: Option<Vec<u8>>,
    /// Multiply transformed values by 100.
    #[serde(default)]
    pub percent: bool,
    /// Column holding row labels used by `start` and `end`.
    pub date_column: Option<String>,
    /// First and last row labels of the transformed sample (inclusive).
    pub start: Option<String>,
    pub end: Option<String>,
}

/// A run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub format: String,
    pub order: usize,
    pub partition: Vec<Vec<usize>>,
    pub labels: Vec<u8>,
    /// Margin family per variable (`gaussian` or `skew_t`).
    #[serde(default)]
    pub margins: Vec<String>,
    /// Sub-process structures, required by `construct`.
    #[serde(default, rename = "subprocess")]
    pub subprocesses: Vec<SubprocessEntry>,
    /// Fixed cross blocks: the values used by `construct`, starting values for `fit`.
    #[serde(default)]
    pub fixed: Vec<FixedEntry>,
    /// Margins of a constructed model (standard normal when absent).
    #[serde(default)]
    pub margin_params: Vec<MarginSpec>,
    #[serde(default)]
    pub names: Vec<String>,
    pub seed: Option<u64>,
    pub optimizer: Option<OptimizerEntry>,
    pub data: Option<DataEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub loglik: f64,
    pub copula_loglik: f64,
    pub aic: f64,
    pub param_count: usize,
    pub observations: usize,
    pub clamped: usize,
}

/// A model: the VAR form of the latent process, optionally with the
/// closure structure it was built from, margins and fit statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub order: usize,
    pub partition: Vec<Vec<usize>>,
    #[serde(default)]
    pub labels: Vec<u8>,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub margins: Vec<MarginSpec>,
    #[serde(default, rename = "subprocess")]
    pub subprocesses: Vec<SubprocessEntry>,
    #[serde(default)]
    pub fixed: Vec<FixedEntry>,
    pub var: VarRepresentation,
    pub fit: Option<FitSummary>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| toml_error(&text, e))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == format => {}
        Some(f) => return Err(Error::Format(format!("{}: expected format '{format}', found '{f}'", path.display()))),
        None => return Err(Error::Format(format!("{}: missing 'format = \"{format}\"'", path.display()))),
    }
    toml::from_str(&text).map_err(|e| toml_error(&text, e))
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let (line, column) = e
        .span()
        .map(|s| {
            let before = &text[..s.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, column)
        })
        .unwrap_or((0, 0));
    Error::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn partition_from_file(sets: &[Vec<usize>]) -> Result<Partition> {
    let dim = sets.iter().map(Vec::len).sum();
    let zero_based = sets
        .iter()
        .map(|s| {
            s.iter()
                .map(|&i| {
                    i.checked_sub(1)
                        .ok_or_else(|| Error::InvalidInput("variable indices are 1-based".into()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Partition::new(zero_based, dim)
}

fn partition_to_file(p: &Partition) -> Vec<Vec<usize>> {
    p.sets().iter().map(|s| s.iter().map(|i| i + 1).collect()).collect()
}

fn fixed_from_file(entries: &[FixedEntry], labels: &ConditionLabels) -> Result<Vec<CrossFixedBlock>> {
    entries
        .iter()
        .map(|e| {
            let [i, j] = e.pair;
            if i == 0 || j == 0 || i > labels.len() || j > labels.len() {
                return Err(Error::InvalidInput(format!("fixed pair ({i}, {j}) is out of range")));
            }
            let kind = FixedKind::for_labels(labels.get(i - 1), labels.get(j - 1));
            if let Some(k) = e.kind {
                if k != kind {
                    return Err(Error::InvalidInput(format!(
                        "pair ({i}, {j}) has labels requiring a {kind:?} block, file says {k:?}"
                    )));
                }
            }
            CrossFixedBlock::new((i - 1, j - 1), kind, e.value.clone())
        })
        .collect()
}

fn fixed_to_file(fixed: &[CrossFixedBlock]) -> Vec<FixedEntry> {
    fixed
        .iter()
        .map(|f| FixedEntry {
            pair: [f.pair.0 + 1, f.pair.1 + 1],
            kind: Some(f.kind),
            value: f.value.clone(),
        })
        .collect()
}

fn subprocesses_from_file(entries: &[SubprocessEntry]) -> Result<Vec<SubprocessCorr>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            SubprocessCorr::new(e.blocks.clone()).map_err(|err| match err {
                Error::NotPositiveDefinite(_) => {
                    Error::NotPositiveDefinite(format!("correlation matrix of sub-process {}", i + 1))
                }
                other => other,
            })
        })
        .collect()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path, CONFIG_FORMAT)
    }

    pub fn partition(&self) -> Result<Partition> {
        partition_from_file(&self.partition)
    }

    pub fn labels(&self) -> Result<ConditionLabels> {
        ConditionLabels::from_digits(&self.labels)
    }

    pub fn families(&self, dim: usize) -> Result<Vec<MarginFamily>> {
        if self.margins.is_empty() {
            return Ok(vec![MarginFamily::Gaussian; dim]);
        }
        self.margins.iter().map(|m| m.parse()).collect()
    }

    /// The model structure, with `order` overriding the file's order.
    pub fn model_config(&self, order: Option<usize>) -> Result<ModelConfig> {
        let partition = self.partition()?;
        let families = self.families(partition.dim())?;
        ModelConfig::new(partition, self.labels()?, order.unwrap_or(self.order), families)
    }

    pub fn closure_spec(&self) -> Result<MarginClosureSpec> {
        if self.subprocesses.is_empty() {
            return Err(Error::InvalidInput("construct needs [[subprocess]] entries".into()));
        }
        let labels = self.labels()?;
        let subs = subprocesses_from_file(&self.subprocesses)?;
        if let Some(s) = subs.iter().find(|s| s.order() != self.order) {
            return Err(Error::InvalidInput(format!(
                "sub-process of order {} in a model of order {}",
                s.order(),
                self.order
            )));
        }
        MarginClosureSpec::new(self.partition()?, labels.clone(), subs, fixed_from_file(&self.fixed, &labels)?)
    }

    pub fn fit_options(&self, joint_refinement: bool) -> Result<FitOptions> {
        let mut opts = FitOptions {
            joint_refinement,
            ..FitOptions::default()
        };
        if let Some(o) = &self.optimizer {
            let nm = &mut opts.optimizer;
            nm.max_evals = o.max_evals.unwrap_or(nm.max_evals);
            nm.ftol = o.ftol.unwrap_or(nm.ftol);
            nm.xtol = o.xtol.unwrap_or(nm.xtol);
            nm.step = o.step.unwrap_or(nm.step);
            nm.restarts = o.restarts.unwrap_or(nm.restarts);
        }
        if !self.fixed.is_empty() {
            opts.initial_fixed = fixed_from_file(&self.fixed, &self.labels()?)?;
        }
        Ok(opts)
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_toml(path, MODEL_FORMAT)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }

    fn validate(&self) -> Result<()> {
        let partition = self.partition()?;
        let d = partition.dim();
        VarRepresentation::new(self.var.coefficients.clone(), self.var.innovation_cov.clone())?;
        if self.var.dim() != d || self.var.order() != self.order {
            return Err(Error::DimensionMismatch(format!(
                "VAR form must have dimension {d} and order {}",
                self.order
            )));
        }
        if !self.margins.is_empty() && self.margins.len() != d {
            return Err(Error::DimensionMismatch(format!("{} margins for {d} variables", self.margins.len())));
        }
        for m in &self.margins {
            m.validate()?;
        }
        if !self.names.is_empty() && self.names.len() != d {
            return Err(Error::DimensionMismatch(format!("{} names for {d} variables", self.names.len())));
        }
        Ok(())
    }

    pub fn partition(&self) -> Result<Partition> {
        partition_from_file(&self.partition)
    }

    pub fn margins(&self) -> Vec<MarginSpec> {
        if self.margins.is_empty() {
            vec![MarginSpec::Gaussian { location: 0.0, scale: 1.0 }; self.var.dim()]
        } else {
            self.margins.clone()
        }
    }

    pub fn names(&self) -> Vec<String> {
        if self.names.is_empty() {
            (1..=self.var.dim()).map(|i| format!("x{i}")).collect()
        } else {
            self.names.clone()
        }
    }

    pub fn from_model(model: &MarginClosedModel, margins: Vec<MarginSpec>, names: Vec<String>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            order: model.spec.order(),
            partition: partition_to_file(&model.spec.partition),
            labels: model.spec.labels.digits(),
            names,
            margins,
            subprocesses: model
                .spec
                .subprocesses
                .iter()
                .map(|s| SubprocessEntry { blocks: s.blocks().to_vec() })
                .collect(),
            fixed: fixed_to_file(&model.spec.fixed),
            var: model.var.clone(),
            fit: None,
        }
    }

    pub fn from_fit(fit: &FittedModel, names: Vec<String>, observations: usize) -> Self {
        let mut out = Self::from_model(&fit.model, fit.margins.clone(), names);
        out.fit = Some(FitSummary {
            loglik: fit.loglik,
            copula_loglik: fit.copula_loglik,
            aic: fit.aic,
            param_count: fit.param_count,
            observations,
            clamped: fit.clamped,
        });
        out
    }
}
