use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::{solve_symmetric, Matrix};

/// Multivariate portmanteau test of residual whiteness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Portmanteau {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub max_lag: usize,
}

/// Multivariate Ljung–Box statistic
/// `Q = T² Σ_{h=1}^{m} tr(C_h' C_0⁻¹ C_h C_0⁻¹) / (T − h)` on `d x T`
/// residuals, referred to χ² with `d²(m − k)` degrees of freedom where
/// `k = fitted_lags`.
pub fn portmanteau(residuals: &Matrix, max_lag: usize, fitted_lags: usize) -> Result<Portmanteau> {
    let (d, len) = residuals.shape();
    if max_lag <= fitted_lags {
        return Err(Error::InvalidInput(format!(
            "portmanteau lag {max_lag} must exceed the VAR order {fitted_lags}"
        )));
    }
    if d == 0 || len <= max_lag + 1 {
        return Err(Error::InvalidInput(format!(
            "portmanteau at lag {max_lag} needs more than {} residuals",
            max_lag + 1
        )));
    }
    let mean = residuals.column_mean();
    let mut e = residuals.clone();
    for mut col in e.column_iter_mut() {
        col -= &mean;
    }
    let n = len as f64;
    let cov = |h: usize| (e.columns(h, len - h) * e.columns(0, len - h).transpose()) / n;
    let c0 = cov(0);
    let mut q = 0.0;
    for h in 1..=max_lag {
        let ch = cov(h);
        let a = solve_symmetric(&c0, &ch)?;
        let b = solve_symmetric(&c0, &ch.transpose())?;
        q += (a * b).trace() / (n - h as f64);
    }
    let statistic = n * n * q;
    let df = d * d * (max_lag - fitted_lags);
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Portmanteau {
        statistic,
        df,
        p_value: chi.sf(statistic),
        max_lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::standard_normals;

    #[test]
    fn rejects_lag_not_above_order() {
        let e = standard_normals(2, 100, 1);
        assert!(portmanteau(&e, 2, 2).is_err());
    }

    #[test]
    fn univariate_matches_ljung_box() {
        let e = standard_normals(1, 200, 3);
        let x: Vec<f64> = e.iter().copied().collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let c = |h: usize| (h..x.len()).map(|t| (x[t] - mean) * (x[t - h] - mean)).sum::<f64>() / n;
        let lb = n * (n + 2.0) * (1..=5).map(|h| (c(h) / c(0)).powi(2) / (n - h as f64)).sum::<f64>();
        let p = portmanteau(&e, 5, 0).unwrap();
        // Hosking's T² form and Ljung–Box's T(T + 2) form agree up to T²/(T(T+2)).
        assert!((p.statistic / lb - n / (n + 2.0)).abs() < 1e-12);
        assert_eq!(p.df, 5);
    }
}
