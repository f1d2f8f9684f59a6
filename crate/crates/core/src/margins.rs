//! Univariate margins and the probability integral transform to the latent
//! standard-normal scale.
//!
//! The skew-t family is the Jones–Faddy two-tailweight distribution. In
//! standard form its density is
//!
//! ```text
//! f(t; a, b) = C⁻¹ (1 + t/√(a+b+t²))^(a+1/2) (1 − t/√(a+b+t²))^(b+1/2),
//! C = 2^(a+b−1) B(a, b) √(a+b),
//! ```
//!
//! with left tail `|t|^(−2a−1)` and right tail `t^(−2b−1)`. When `a = b = ν/2`
//! it is Student's t with `ν` degrees of freedom, and it tends to a Gaussian
//! as `a, b → ∞`. With `x = (1 + t/√(a+b+t²))/2` the CDF is the regularized
//! incomplete beta function `I_x(a, b)`.
//! Location and scale enter as `f((y − μ)/σ)/σ`.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Probabilities are clamped to `[PIT_EPS, 1 − PIT_EPS]` before inversion.
pub const PIT_EPS: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Tailweight range searched when fitting the skew-t family.
const TAIL_MIN: f64 = 0.05;
const TAIL_MAX: f64 = 1e3;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn std_normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn std_normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`, using the upper tail above 1/2 for accuracy.
pub fn std_normal_quantile(p: f64) -> f64 {
    let n = standard_normal();
    if p <= 0.5 {
        n.inverse_cdf(p)
    } else {
        -n.inverse_cdf(1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginFamily {
    Gaussian,
    SkewT,
}

impl std::fmt::Display for MarginFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MarginFamily::Gaussian => "gaussian",
            MarginFamily::SkewT => "skew_t",
        })
    }
}

impl MarginFamily {
    pub fn param_count(self) -> usize {
        match self {
            MarginFamily::Gaussian => 2,
            MarginFamily::SkewT => 4,
        }
    }
}

impl std::str::FromStr for MarginFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(MarginFamily::Gaussian),
            "skew_t" | "skewt" => Ok(MarginFamily::SkewT),
            other => Err(Error::InvalidInput(format!("unknown margin family '{other}'"))),
        }
    }
}

/// A univariate marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarginSpec {
    Gaussian {
        location: f64,
        scale: f64,
    },
    SkewT {
        location: f64,
        scale: f64,
        /// Left tailweight.
        a: f64,
        /// Right tailweight.
        b: f64,
    },
}

/// Standard-form skew-t helpers.
mod jf {
    use super::*;

    /// `(1 + t/s, 1 − t/s)` with `s = √(a+b+t²)`, each computed without
    /// cancellation.
    pub fn arms(t: f64, a: f64, b: f64) -> (f64, f64) {
        let ab = a + b;
        let s = (ab + t * t).sqrt();
        if t >= 0.0 {
            (1.0 + t / s, ab / (s * (s + t)))
        } else {
            (ab / (s * (s - t)), 1.0 - t / s)
        }
    }

    pub fn ln_norm(a: f64, b: f64) -> f64 {
        (a + b - 1.0) * std::f64::consts::LN_2 + ln_beta(a, b) + 0.5 * (a + b).ln()
    }

    pub fn ln_pdf(t: f64, a: f64, b: f64, ln_c: f64) -> f64 {
        let (p, m) = arms(t, a, b);
        (a + 0.5) * p.ln() + (b + 0.5) * m.ln() - ln_c
    }

    pub fn cdf(t: f64, a: f64, b: f64) -> f64 {
        let (p, m) = arms(t, a, b);
        if t <= 0.0 {
            beta_reg(a, b, 0.5 * p)
        } else {
            1.0 - beta_reg(b, a, 0.5 * m)
        }
    }

    pub fn sf(t: f64, a: f64, b: f64) -> f64 {
        let (p, m) = arms(t, a, b);
        if t >= 0.0 {
            beta_reg(b, a, 0.5 * m)
        } else {
            1.0 - beta_reg(a, b, 0.5 * p)
        }
    }

    /// Inverse of `x ↦ t`, `t = √(a+b) (2x − 1) / (2√(x(1 − x)))`.
    pub fn t_from_x(x: f64, a: f64, b: f64) -> f64 {
        (a + b).sqrt() * (2.0 * x - 1.0) / (2.0 * (x * (1.0 - x)).sqrt())
    }
}

/// Finds `t` with `g(t) = 0` for increasing `g` by Newton steps safeguarded by
/// bisection on an expanding bracket.
fn monotone_root(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, start: f64) -> f64 {
    let mut lo = start.min(-1.0);
    let mut hi = start.max(1.0);
    let mut width = 1.0;
    while g(lo) > 0.0 {
        width *= 2.0;
        lo = start - width;
    }
    width = 1.0;
    while g(hi) < 0.0 {
        width *= 2.0;
        hi = start + width;
    }
    let mut t = start.clamp(lo, hi);
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = dg(t);
        let newton = t - gt / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + t.abs()) {
            return next;
        }
        t = next;
    }
    t
}

impl MarginSpec {
    pub fn gaussian(location: f64, scale: f64) -> Result<Self> {
        let m = MarginSpec::Gaussian { location, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn skew_t(location: f64, scale: f64, a: f64, b: f64) -> Result<Self> {
        let m = MarginSpec::SkewT { location, scale, a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginSpec::Gaussian { location, scale } => location.is_finite() && scale.is_finite() && scale > 0.0,
            MarginSpec::SkewT { location, scale, a, b } => {
                location.is_finite()
                    && scale.is_finite()
                    && scale > 0.0
                    && a.is_finite()
                    && a > 0.0
                    && b.is_finite()
                    && b > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid margin parameters {self:?}")))
        }
    }

    pub fn family(&self) -> MarginFamily {
        match self {
            MarginSpec::Gaussian { .. } => MarginFamily::Gaussian,
            MarginSpec::SkewT { .. } => MarginFamily::SkewT,
        }
    }

    pub fn param_count(&self) -> usize {
        self.family().param_count()
    }

    pub fn location(&self) -> f64 {
        match *self {
            MarginSpec::Gaussian { location, .. } | MarginSpec::SkewT { location, .. } => location,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            MarginSpec::Gaussian { scale, .. } | MarginSpec::SkewT { scale, .. } => scale,
        }
    }

    fn standardize(&self, x: f64) -> f64 {
        (x - self.location()) / self.scale()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let t = self.standardize(x);
        match *self {
            MarginSpec::Gaussian { scale, .. } => std_normal_ln_pdf(t) - scale.ln(),
            MarginSpec::SkewT { scale, a, b, .. } => jf::ln_pdf(t, a, b, jf::ln_norm(a, b)) - scale.ln(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = self.standardize(x);
        match *self {
            MarginSpec::Gaussian { .. } => std_normal_cdf(t),
            MarginSpec::SkewT { a, b, .. } => jf::cdf(t, a, b),
        }
    }

    /// Upper tail `1 − F(x)`, accurate when it is small.
    pub fn sf(&self, x: f64) -> f64 {
        let t = self.standardize(x);
        match *self {
            MarginSpec::Gaussian { .. } => std_normal_cdf(-t),
            MarginSpec::SkewT { a, b, .. } => jf::sf(t, a, b),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidInput(format!("quantile level {u} is outside (0, 1)")));
        }
        let (loc, scale) = (self.location(), self.scale());
        let t = match *self {
            MarginSpec::Gaussian { .. } => std_normal_quantile(u),
            MarginSpec::SkewT { a, b, .. } => {
                let ln_c = jf::ln_norm(a, b);
                let start = jf::t_from_x(inv_beta_reg(a, b, u).clamp(1e-300, 1.0 - 1e-16), a, b);
                let start = if start.is_finite() { start } else { 0.0 };
                let dens = |t: f64| jf::ln_pdf(t, a, b, ln_c).exp();
                if u <= 0.5 {
                    monotone_root(|t| jf::cdf(t, a, b) - u, dens, start)
                } else {
                    let q = 1.0 - u;
                    monotone_root(|t| q - jf::sf(t, a, b), dens, start)
                }
            }
        };
        Ok(loc + scale * t)
    }

    /// Draw from the margin.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarginSpec::Gaussian { location, scale } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                location + scale * z
            }
            MarginSpec::SkewT { location, scale, a, b } => {
                let x = Beta::new(a, b).expect("validated tailweights").sample(rng);
                location + scale * jf::t_from_x(x, a, b)
            }
        }
    }

    /// Parameters in an unconstrained coordinate system used for fitting.
    fn to_free(self) -> Vec<f64> {
        match self {
            MarginSpec::Gaussian { location, scale } => vec![location, scale.ln()],
            MarginSpec::SkewT { location, scale, a, b } => vec![location, scale.ln(), a.ln(), b.ln()],
        }
    }

    fn from_free(family: MarginFamily, p: &[f64]) -> Option<Self> {
        let m = match family {
            MarginFamily::Gaussian => MarginSpec::Gaussian {
                location: p[0],
                scale: p[1].exp(),
            },
            MarginFamily::SkewT => {
                let (a, b) = (p[2].exp(), p[3].exp());
                if !(TAIL_MIN..=TAIL_MAX).contains(&a) || !(TAIL_MIN..=TAIL_MAX).contains(&b) {
                    return None;
                }
                MarginSpec::SkewT {
                    location: p[0],
                    scale: p[1].exp(),
                    a,
                    b,
                }
            }
        };
        m.validate().ok().map(|_| m)
    }

    pub fn loglik(&self, x: &[f64]) -> f64 {
        match *self {
            MarginSpec::Gaussian { .. } => x.iter().map(|&v| self.ln_pdf(v)).sum(),
            MarginSpec::SkewT { scale, a, b, .. } => {
                let ln_c = jf::ln_norm(a, b) + scale.ln();
                x.iter()
                    .map(|&v| jf::ln_pdf(self.standardize(v), a, b, 0.0) - ln_c)
                    .sum()
            }
        }
    }
}

/// Latent values `Φ⁻¹(F(x))` and how many probabilities were clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeries {
    pub values: Vec<f64>,
    pub clamped: usize,
}

/// Latent value of one observation; the flag reports clamping.
pub fn latent_value(x: f64, m: &MarginSpec) -> (f64, bool) {
    if let MarginSpec::Gaussian { location, scale } = *m {
        return ((x - location) / scale, false);
    }
    let lower = m.cdf(x);
    if lower <= 0.5 {
        let p = lower.max(PIT_EPS);
        (std_normal_quantile(p), lower < PIT_EPS)
    } else {
        let upper = m.sf(x);
        let q = upper.max(PIT_EPS);
        (-std_normal_quantile(q), upper < PIT_EPS)
    }
}

/// Probability integral transform of a series to the N(0, 1) scale.
pub fn pit_to_normal(x: &[f64], m: &MarginSpec) -> Result<LatentSeries> {
    m.validate()?;
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at position {}", pos + 1)));
    }
    let mut clamped = 0;
    let values = x
        .iter()
        .map(|&v| {
            let (z, c) = latent_value(v, m);
            clamped += usize::from(c);
            z
        })
        .collect();
    Ok(LatentSeries { values, clamped })
}

/// Inverse of [`pit_to_normal`] for one value: `F⁻¹(Φ(z))`.
pub fn from_latent(z: f64, m: &MarginSpec) -> Result<f64> {
    if let MarginSpec::Gaussian { location, scale } = *m {
        return Ok(location + scale * z);
    }
    let p = std_normal_cdf(z).clamp(PIT_EPS, 1.0 - PIT_EPS);
    m.quantile(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginFit {
    pub spec: MarginSpec,
    pub loglik: f64,
    pub aic: f64,
}

fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let skew = x.iter().map(|v| ((v - mean) / sd).powi(3)).sum::<f64>() / n;
    (mean, sd, skew)
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Maximum-likelihood fit of one family; AIC = 2p − 2·loglik.
pub fn fit_margin(x: &[f64], family: MarginFamily) -> Result<MarginFit> {
    if x.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "margin fitting needs at least 20 observations, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let (mean, sd, skew) = moments(x);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSeries("constant series cannot be fitted".into()));
    }
    let p = family.param_count() as f64;
    let spec = match family {
        MarginFamily::Gaussian => MarginSpec::gaussian(mean, sd)?,
        MarginFamily::SkewT => fit_skew_t(x, mean, sd, skew)?,
    };
    let loglik = spec.loglik(x);
    Ok(MarginFit {
        spec,
        loglik,
        aic: 2.0 * p - 2.0 * loglik,
    })
}

fn fit_skew_t(x: &[f64], mean: f64, sd: f64, skew: f64) -> Result<MarginSpec> {
    let objective = |p: &[f64]| match MarginSpec::from_free(MarginFamily::SkewT, p) {
        Some(m) => -m.loglik(x),
        None => f64::INFINITY,
    };
    // Moment-based starts: heavy symmetric, moderate with tail asymmetry
    // matching the sample skewness, and near-Gaussian.
    let tilt = skew.clamp(-2.0, 2.0) * 0.3;
    let med = median(x);
    let starts = [
        (med, 2.0_f64, 0.0_f64),
        (mean, 4.0, tilt),
        (mean, 20.0, 0.0),
    ];
    let opts = NelderMeadOptions {
        max_evals: 8000,
        ftol: 1e-10,
        xtol: 1e-7,
        step: 0.2,
        restarts: 2,
    };
    let mut best: Option<crate::optim::Minimum> = None;
    for &(loc, tail, tilt) in &starts {
        let nu = 2.0 * tail;
        let scale = sd * ((nu - 2.0) / nu).sqrt();
        // Positive skewness means a heavier right tail, i.e. smaller b.
        let a = tail * (1.0 + tilt);
        let b = tail * (1.0 - tilt).max(0.2);
        let x0 = MarginSpec::SkewT { location: loc, scale, a, b }.to_free();
        if let Some(m) = nelder_mead(objective, &x0, &opts) {
            if best.as_ref().map_or(true, |b| m.value < b.value) {
                best = Some(m);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no finite likelihood at any skew-t start".into()))?;
    if !best.converged {
        return Err(Error::NonConvergence {
            context: "skew-t margin fit".into(),
            best_point: best.point,
            best_value: best.value,
        });
    }
    Ok(MarginSpec::from_free(MarginFamily::SkewT, &best.point).expect("optimum is feasible"))
}
