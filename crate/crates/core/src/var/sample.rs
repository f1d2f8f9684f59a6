use super::{AutocovSequence, VarRepresentation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Relative residual variance below which a series counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;

/// Rejects constant series and exact linear ramps, whose sample
/// autocorrelations carry no stochastic information.
fn check_nondegenerate(row: &[f64], index: usize) -> Result<()> {
    let n = row.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let mean = row.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, &y) in row.iter().enumerate() {
        let dt = t as f64 - t_mean;
        let dy = y - mean;
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let scale = mean * mean + syy / n;
    if syy / n <= DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSeries(format!("series {index} is constant")));
    }
    let resid = syy - sxy * sxy / sxx;
    if resid <= DEGENERACY_TOL * syy {
        return Err(Error::DegenerateSeries(format!(
            "series {index} is a deterministic linear trend"
        )));
    }
    Ok(())
}

/// Biased (divide by `T`) sample autocovariances of the demeaned `d x T`
/// series up to `max_lag`.
pub fn sample_autocov(series: &Matrix, max_lag: usize) -> Result<AutocovSequence> {
    let (d, len) = series.shape();
    if d == 0 || len <= (max_lag + 1) * d {
        return Err(Error::InvalidInput(format!(
            "need more than {} observations for {d} series at lag {max_lag}, have {len}",
            (max_lag + 1) * d
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    for i in 0..d {
        let row: Vec<f64> = series.row(i).iter().copied().collect();
        check_nondegenerate(&row, i)?;
    }
    let mean = series.column_mean();
    let mut centered = series.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let blocks = (0..=max_lag)
        .map(|l| {
            let lead = centered.columns(l, len - l);
            let lagged = centered.columns(0, len - l);
            (lead * lagged.transpose()) / len as f64
        })
        .collect();
    AutocovSequence::new(blocks)
}

/// Sample autocorrelations `ρ̂(0..=max_lag)` of a univariate series.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let acov = sample_autocov(&Matrix::from_row_slice(1, x.len(), x), max_lag)?;
    let c0 = acov.lag(0)[(0, 0)];
    Ok(acov.blocks().iter().map(|b| b[(0, 0)] / c0).collect())
}

/// Sample partial autocorrelations at lags `1..=max_lag` (index 0 is lag 1),
/// from the univariate Durbin–Levinson recursion on sample autocorrelations.
pub fn sample_pacf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let rho = sample_acf(x, max_lag)?;
    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for n in 1..=max_lag {
        let num = rho[n] - phi.iter().enumerate().map(|(j, p)| p * rho[n - 1 - j]).sum::<f64>();
        let a = num / v;
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - a * prev[prev.len() - 1 - j];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        pacf.push(a);
    }
    Ok(pacf)
}

/// One-step residuals `ε_t = Z_t − Σ_l Φ_l Z_{t−l}` for `t = k..T`, as a
/// `d x (T − k)` matrix.
pub fn var_residuals(series: &Matrix, var: &VarRepresentation) -> Result<Matrix> {
    let (d, len) = series.shape();
    let k = var.order();
    if d != var.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series has {d} rows, model has dimension {}",
            var.dim()
        )));
    }
    if len <= k {
        return Err(Error::InvalidInput(format!(
            "series of length {len} is too short for order {k}"
        )));
    }
    let mut out = Matrix::zeros(d, len - k);
    for t in k..len {
        let mut e = series.column(t).into_owned();
        for (l, phi) in var.coefficients.iter().enumerate() {
            e -= phi * series.column(t - 1 - l);
        }
        out.column_mut(t - k).copy_from(&e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::simulate;

    #[test]
    fn white_noise_lag_one() {
        let var = VarRepresentation::new(vec![], Matrix::identity(1, 1)).unwrap();
        let n = 4000;
        let z = simulate(&var, n, 3).unwrap();
        let acf = sample_acf(z.as_slice(), 1).unwrap();
        assert!(acf[1].abs() < 2.0 / (n as f64).sqrt());
    }

    #[test]
    fn ar1_pacf() {
        let var = VarRepresentation::new(vec![Matrix::from_element(1, 1, 0.9)], Matrix::identity(1, 1))
            .unwrap();
        let n = 5000;
        let z = simulate(&var, n, 5).unwrap();
        let pacf = sample_pacf(z.as_slice(), 2).unwrap();
        assert!((pacf[0] - 0.9).abs() < 0.03);
        assert!(pacf[1].abs() < 2.0 / (n as f64).sqrt());
    }

    #[test]
    fn rejects_constant_and_ramp() {
        let constant = Matrix::from_element(1, 50, 3.0);
        assert!(matches!(sample_autocov(&constant, 1), Err(Error::DegenerateSeries(_))));
        let ramp = Matrix::from_fn(1, 50, |_, t| 2.0 + 0.5 * t as f64);
        assert!(matches!(sample_autocov(&ramp, 1), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn pacf_matches_exact_recursion_on_known_acf() {
        // AR(1) with φ = 0.5 has pacf (0.5, 0, 0, …) exactly in population;
        // the sample version on a long path must be close.
        let var = VarRepresentation::new(vec![Matrix::from_element(1, 1, 0.5)], Matrix::identity(1, 1))
            .unwrap();
        let z = simulate(&var, 20_000, 9).unwrap();
        let pacf = sample_pacf(z.as_slice(), 4).unwrap();
        assert!((pacf[0] - 0.5).abs() < 0.03);
        assert!(pacf[1..].iter().all(|p| p.abs() < 0.03));
    }

    #[test]
    fn residuals_recover_innovations() {
        let var = VarRepresentation::new(
            vec![Matrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.4])],
            Matrix::identity(2, 2),
        )
        .unwrap();
        let z = simulate(&var, 10, 2).unwrap();
        let e = var_residuals(&z, &var).unwrap();
        let expected = z.column(5) - &var.coefficients[0] * z.column(4);
        assert!((e.column(4) - expected).abs().max() < 1e-15);
    }
}
