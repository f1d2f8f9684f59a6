//! The `mcvar` command-line application.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical infeasibility,
//! 3 tolerance failure in `tables`.

pub mod data;
pub mod files;
pub mod report;
pub mod tables;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::closure::{verify_closure, ClosureReport};
use crate::error::{Error, Result};
use crate::estimation::{fit_model, portmanteau, simulate_observed, FittedModel, ModelConfig};
use crate::linalg::Matrix;
use crate::var::{implied_autocov, VarRepresentation};

use data::{load_dataset, write_csv, Dataset};
use files::{ConfigFile, ModelFile};
use report::{fmt_matrix, TextTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mcvar", version, about = "Margin-closed VAR(k) and Gaussian-copula time series models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model file from a configuration with sub-process structures and fixed blocks.
    Construct(ConstructArgs),
    /// Check the closure conditions of a model file.
    Verify(VerifyArgs),
    /// Simulate observations from a model file.
    Simulate(SimulateArgs),
    /// Fit a model to data.
    Fit(FitArgs),
    /// Compare models on the same data by AIC.
    Compare(CompareArgs),
    /// Print reference tables and check them against published values.
    Tables(TablesArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Model file to write (printed to stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// JSON report to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV file to write (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Override the configured order.
    #[arg(long)]
    pub k: Option<usize>,
    /// Refine every copula parameter jointly after the staged fit.
    #[arg(long)]
    pub stage4: bool,
    /// Model file to write; a JSON summary is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest lag of the residual portmanteau test.
    #[arg(long, default_value_t = 10)]
    pub lags: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// One or more configurations.
    #[arg(long, required = true)]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Orders to fit (the configured order when absent).
    #[arg(long)]
    pub k: Vec<usize>,
    /// Also fit the unrestricted model with the first configuration's margins.
    #[arg(long)]
    pub unrestricted: bool,
    #[arg(long)]
    pub stage4: bool,
    /// JSON table to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// t1, t2t3, example1, example3, pdregion or all.
    #[arg(default_value = "all")]
    pub name: String,
    /// JSON results to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical_infeasibility() {
        EXIT_INFEASIBLE
    } else {
        EXIT_INVALID
    }
}

pub fn run<W: Write>(command: &Command, out: &mut W) -> Result<i32> {
    match command {
        Command::Construct(a) => construct(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Tables(a) => tables_cmd(a, out),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn var_summary(var: &VarRepresentation) -> String {
    let mut t = TextTable::new(&["term", "matrix"]);
    for (l, phi) in var.coefficients.iter().enumerate() {
        t.push(&[format!("Phi{}", l + 1), fmt_matrix(phi)]);
    }
    t.push(&["Sigma_eps".to_string(), fmt_matrix(&var.innovation_cov)]);
    t.render()
}

fn construct<W: Write>(a: &ConstructArgs, out: &mut W) -> Result<i32> {
    let cfg = ConfigFile::load(&a.config)?;
    let spec = cfg.closure_spec()?;
    let model = spec.build()?;
    let d = spec.dim();
    if !cfg.margin_params.is_empty() && cfg.margin_params.len() != d {
        return Err(Error::InvalidInput(format!("{} margins for {d} variables", cfg.margin_params.len())));
    }
    for m in &cfg.margin_params {
        m.validate()?;
    }
    let file = ModelFile::from_model(&model, cfg.margin_params.clone(), cfg.names.clone());
    writeln!(out, "VAR({}) representation of the constructed model", spec.order())?;
    write!(out, "{}", var_summary(&model.var))?;
    match &a.out {
        Some(p) => {
            file.save(p)?;
            writeln!(out, "model written to {}", p.display())?;
        }
        None => {
            let text = toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(out, "\n{text}")?;
        }
    }
    Ok(EXIT_OK)
}

/// Time-major correlation matrix of `k + 1` slices implied by a VAR form.
pub fn implied_correlation(var: &VarRepresentation) -> Result<Matrix> {
    let k = var.order();
    implied_autocov(var, k)?.to_correlation().time_major(k + 1)
}

pub fn verify_model(file: &ModelFile, tol: f64) -> Result<ClosureReport> {
    let r = implied_correlation(&file.var)?;
    verify_closure(&r, &file.partition()?, file.order, tol)
}

fn set_label(set: &[usize]) -> String {
    format!("{{{}}}", set.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","))
}

fn verify<W: Write>(a: &VerifyArgs, out: &mut W) -> Result<i32> {
    let file = ModelFile::load(&a.model)?;
    let report = verify_model(&file, a.tol)?;
    let mut t = TextTable::new(&["set", "forward resid", "backward resid", "markov resid", "condition", "result"]);
    for s in &report.subsets {
        t.push(&[
            set_label(&s.set),
            format!("{:.3e}", s.forward_residual),
            format!("{:.3e}", s.backward_residual),
            format!("{:.3e}", s.markov_residual),
            s.satisfied_condition().map_or("-".to_string(), |c| c.label().to_string()),
            if s.passes { "closed" } else { "fails" }.to_string(),
        ]);
    }
    write!(out, "{}", t.render())?;
    for s in report.subsets.iter().filter(|s| !s.passes) {
        writeln!(out, "closure fails for S={}", set_label(&s.set))?;
    }
    if report.all_pass() {
        writeln!(out, "closure holds for every sub-process (tol {:.0e})", a.tol)?;
    }
    if let Some(p) = &a.out {
        let subsets: Vec<_> = report
            .subsets
            .iter()
            .map(|s| {
                json!({
                    "set": s.set.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "forward_residual": s.forward_residual,
                    "backward_residual": s.backward_residual,
                    "markov_residual": s.markov_residual,
                    "passes": s.passes,
                })
            })
            .collect();
        write_json(p, &json!({"tol": a.tol, "all_pass": report.all_pass(), "subsets": subsets}))?;
    }
    Ok(EXIT_OK)
}

fn simulate<W: Write>(a: &SimulateArgs, out: &mut W) -> Result<i32> {
    let file = ModelFile::load(&a.model)?;
    if a.length == 0 {
        return Err(Error::InvalidInput("length must be positive".into()));
    }
    let x = simulate_observed(&file.var, &file.margins(), a.length, a.seed)?;
    match &a.out {
        Some(p) => {
            write_csv(std::fs::File::create(p)?, &file.names(), &x)?;
            writeln!(out, "{} observations of {} variables written to {}", a.length, x.nrows(), p.display())?;
        }
        None => write_csv(&mut *out, &file.names(), &x)?,
    }
    Ok(EXIT_OK)
}

fn load_data(cfg: &ConfigFile, path: &Path) -> Result<Dataset> {
    let d = load_dataset(path, cfg.data.as_ref())?;
    let dim: usize = cfg.partition.iter().map(Vec::len).sum();
    if d.values.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, configuration has {dim} variables",
            d.values.nrows()
        )));
    }
    Ok(d)
}

fn portmanteau_lags(requested: usize, k: usize) -> usize {
    if requested > k {
        requested
    } else {
        k + 5
    }
}

pub fn fit_summary(fit: &FittedModel, names: &[String]) -> String {
    let mut s = String::new();
    let mut t = TextTable::new(&["variable", "family", "location", "scale", "a", "b"]);
    for (name, m) in names.iter().zip(&fit.margins) {
        let (a, b) = match *m {
            crate::margins::MarginSpec::SkewT { a, b, .. } => (format!("{a:.3}"), format!("{b:.3}")),
            _ => ("-".into(), "-".into()),
        };
        t.push(&[
            name.clone(),
            m.family().to_string(),
            format!("{:.3}", m.location()),
            format!("{:.3}", m.scale()),
            a,
            b,
        ]);
    }
    s.push_str(&t.render());
    let mut t = TextTable::new(&["sub-process", "lag", "correlation"]);
    for (set, sub) in fit.config.partition.sets().iter().zip(&fit.model.spec.subprocesses) {
        for (l, b) in sub.blocks().iter().enumerate() {
            t.push(&[set_label(set), l.to_string(), fmt_matrix(b)]);
        }
    }
    s.push('\n');
    s.push_str(&t.render());
    if !fit.model.spec.fixed.is_empty() {
        let mut t = TextTable::new(&["pair", "kind", "value"]);
        for f in &fit.model.spec.fixed {
            t.push(&[format!("({}, {})", f.pair.0 + 1, f.pair.1 + 1), f.kind.to_string(), fmt_matrix(&f.value)]);
        }
        s.push('\n');
        s.push_str(&t.render());
    }
    s.push('\n');
    s.push_str(&var_summary(&fit.model.var));
    s.push_str(&format!(
        "\nloglik {:.4}  params {}  AIC {:.4}  clamped {}\n",
        fit.loglik, fit.param_count, fit.aic, fit.clamped
    ));
    s
}

fn fit<W: Write>(a: &FitArgs, out: &mut W) -> Result<i32> {
    let cfg = ConfigFile::load(&a.config)?;
    let config = cfg.model_config(a.k)?;
    let data = load_data(&cfg, &a.data)?;
    let opts = cfg.fit_options(a.stage4)?;
    let fitted = fit_model(&data.values, &config, &opts)?;
    write!(out, "{}", fit_summary(&fitted, &data.names))?;
    let lags = portmanteau_lags(a.lags, config.order);
    let pm = portmanteau(&fitted.latent_residuals(&data.values)?, lags, config.order)?;
    writeln!(
        out,
        "portmanteau lag {}: Q = {:.3}, df = {}, p = {:.4}",
        pm.max_lag, pm.statistic, pm.df, pm.p_value
    )?;
    if let Some(p) = &a.out {
        let file = ModelFile::from_fit(&fitted, data.names.clone(), data.values.ncols());
        file.save(p)?;
        let json_path = p.with_extension("json");
        write_json(
            &json_path,
            &json!({
                "model": serde_json::to_value(&file).map_err(|e| Error::Format(e.to_string()))?,
                "portmanteau": {"max_lag": pm.max_lag, "statistic": pm.statistic, "df": pm.df, "p_value": pm.p_value},
            }),
        )?;
        writeln!(out, "model written to {} and {}", p.display(), json_path.display())?;
    }
    Ok(EXIT_OK)
}

/// One row of a model comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CompareRow {
    pub model: String,
    pub order: usize,
    pub restricted: bool,
    pub param_count: usize,
    pub loglik: f64,
    pub aic: f64,
}

/// Fits every configuration (and optionally the unrestricted model) at each
/// order on one data set.
pub fn compare_models(
    configs: &[(String, ConfigFile)],
    data_path: &Path,
    orders: &[usize],
    unrestricted: bool,
    stage4: bool,
) -> Result<Vec<CompareRow>> {
    let Some((_, first)) = configs.first() else {
        return Err(Error::InvalidInput("compare needs at least one configuration".into()));
    };
    let data = load_data(first, data_path)?;
    for (name, c) in configs {
        let dim: usize = c.partition.iter().map(Vec::len).sum();
        if dim != data.values.nrows() {
            return Err(Error::DimensionMismatch(format!("{name}: {dim} variables, data has {}", data.values.nrows())));
        }
    }
    let orders: Vec<Option<usize>> = if orders.is_empty() { vec![None] } else { orders.iter().map(|&k| Some(k)).collect() };
    let mut rows = Vec::new();
    for &k in &orders {
        for (name, c) in configs {
            let config = c.model_config(k)?;
            let f = fit_model(&data.values, &config, &c.fit_options(stage4)?)?;
            rows.push(CompareRow {
                model: name.clone(),
                order: config.order,
                restricted: true,
                param_count: f.param_count,
                loglik: f.loglik,
                aic: f.aic,
            });
        }
        if unrestricted {
            let base = first.model_config(k)?;
            let config = ModelConfig::unrestricted(base.order, base.families.clone())?;
            let f = fit_model(&data.values, &config, &first.fit_options(stage4)?)?;
            rows.push(CompareRow {
                model: "unrestricted".into(),
                order: config.order,
                restricted: false,
                param_count: f.param_count,
                loglik: f.loglik,
                aic: f.aic,
            });
        }
    }
    Ok(rows)
}

fn compare<W: Write>(a: &CompareArgs, out: &mut W) -> Result<i32> {
    let configs = a
        .config
        .iter()
        .map(|p| {
            let name = p.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
            ConfigFile::load(p).map(|c| (name, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_models(&configs, &a.data, &a.k, a.unrestricted, a.stage4)?;
    let mut t = TextTable::new(&["model", "k", "params", "loglik", "AIC"]);
    for r in &rows {
        t.push(&[
            r.model.clone(),
            r.order.to_string(),
            r.param_count.to_string(),
            format!("{:.3}", r.loglik),
            format!("{:.3}", r.aic),
        ]);
    }
    write!(out, "{}", t.render())?;
    if let Some(best) = rows.iter().min_by(|x, y| x.aic.total_cmp(&y.aic)) {
        writeln!(out, "lowest AIC: {} (k = {})", best.model, best.order)?;
    }
    if let Some(p) = &a.out {
        write_json(p, &json!({ "rows": rows }))?;
    }
    Ok(EXIT_OK)
}

fn tables_cmd<W: Write>(a: &TablesArgs, out: &mut W) -> Result<i32> {
    let names: Vec<&str> = if a.name == "all" { tables::TABLE_NAMES.to_vec() } else { vec![a.name.as_str()] };
    let mut all_passed = true;
    let mut results = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let r = tables::run_table(name)?;
        if i > 0 {
            writeln!(out)?;
        }
        write!(out, "{}", r.text)?;
        all_passed &= r.passed;
        results.push(r.json);
    }
    if let Some(p) = &a.out {
        write_json(p, &json!({ "tables": results, "passed": all_passed }))?;
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_TOLERANCE })
}

