use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_condition, IndexSplit, Matrix};
use crate::margins::{latent_value, MarginSpec};

/// Observed data mapped to the latent N(0, 1) scale under fixed margins.
#[derive(Debug, Clone)]
pub struct Latent {
    /// `d x T` latent values.
    pub z: Matrix,
    /// `Σ_t Σ_i log f_i(x_{i,t})`.
    pub margin_loglik: f64,
    /// Number of probabilities clamped by the transform.
    pub clamped: usize,
}

impl Latent {
    pub fn new(data: &Matrix, margins: &[MarginSpec]) -> Result<Self> {
        let (d, len) = data.shape();
        if margins.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} margins for {d} variables",
                margins.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("data contains non-finite values".into()));
        }
        let mut z = Matrix::zeros(d, len);
        let mut margin_loglik = 0.0;
        let mut clamped = 0;
        for (i, m) in margins.iter().enumerate() {
            m.validate()?;
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            margin_loglik += m.loglik(&row);
            for (t, &x) in row.iter().enumerate() {
                let (v, c) = latent_value(x, m);
                z[(i, t)] = v;
                clamped += usize::from(c);
            }
        }
        if !margin_loglik.is_finite() {
            return Err(Error::InvalidInput("margin log-density is not finite".into()));
        }
        Ok(Self {
            z,
            margin_loglik,
            clamped,
        })
    }

    /// Latent rows of the variables in `set`.
    pub fn restrict(&self, set: &[usize]) -> Matrix {
        Matrix::from_fn(set.len(), self.z.ncols(), |r, t| self.z[(set[r], t)])
    }
}

/// Conditional Gaussian densities of `Z_t` given `w = 0..=k` previous slices.
struct CopulaKernel {
    d: usize,
    coeffs: Vec<Matrix>,
    chols: Vec<Cholesky<f64, nalgebra::Dyn>>,
    half_logdets: Vec<f64>,
}

impl CopulaKernel {
    fn new(r: &Matrix, d: usize, k: usize) -> Result<Self> {
        if r.shape() != ((k + 1) * d, (k + 1) * d) {
            return Err(Error::DimensionMismatch(format!(
                "correlation matrix must be {0}x{0} for d = {d}, k = {k}",
                (k + 1) * d
            )));
        }
        let mut coeffs = Vec::with_capacity(k + 1);
        let mut chols = Vec::with_capacity(k + 1);
        let mut half_logdets = Vec::with_capacity(k + 1);
        for w in 0..=k {
            let split = IndexSplit::partial((0..d).collect(), (d..(w + 1) * d).collect())?;
            let (coeff, cond) = gaussian_condition(r, &split)?;
            let cond = (&cond + cond.transpose()) * 0.5;
            let chol = Cholesky::new(cond).ok_or_else(|| {
                Error::NotPositiveDefinite(format!("conditional covariance given {w} lags"))
            })?;
            let half_logdet = chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            coeffs.push(coeff);
            chols.push(chol);
            half_logdets.push(half_logdet);
        }
        Ok(Self {
            d,
            coeffs,
            chols,
            half_logdets,
        })
    }

    /// `Σ_t [log φ_R(z_t | z_{t-1..t-w_t}) − Σ_i log φ(z_{i,t})]`.
    fn loglik(&self, z: &Matrix) -> f64 {
        let d = self.d;
        let k = self.coeffs.len() - 1;
        let len = z.ncols();
        let mut total = 0.0;
        let mut past = Matrix::zeros(k * d, 1);
        for t in 0..len {
            let w = t.min(k);
            let zt = z.column(t);
            let mut e = zt.into_owned();
            if w > 0 {
                for s in 0..w {
                    past.view_mut((s * d, 0), (d, 1)).copy_from(&z.column(t - 1 - s));
                }
                e -= &self.coeffs[w] * past.rows(0, w * d);
            }
            let y = self.chols[w]
                .l_dirty()
                .solve_lower_triangular(&e)
                .expect("Cholesky factor is invertible");
            total += -0.5 * y.norm_squared() - self.half_logdets[w] + 0.5 * zt.norm_squared();
        }
        total
    }
}

/// Gaussian-copula log-density of latent data under a time-major correlation
/// matrix of `k + 1` slices, including the growing-window terms `t <= k`.
pub fn copula_loglik(z: &Matrix, r: &Matrix, k: usize) -> Result<f64> {
    let kernel = CopulaKernel::new(r, z.nrows(), k)?;
    Ok(kernel.loglik(z))
}

/// Full log-likelihood and the number of clamped probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loglik {
    pub value: f64,
    pub clamped: usize,
}

/// Log-likelihood of `d x T` data with the given margins and time-major
/// latent correlation matrix.
pub fn loglik_full(data: &Matrix, margins: &[MarginSpec], r: &Matrix, k: usize) -> Result<Loglik> {
    let latent = Latent::new(data, margins)?;
    let copula = copula_loglik(&latent.z, r, k)?;
    Ok(Loglik {
        value: latent.margin_loglik + copula,
        clamped: latent.clamped,
    })
}

/// Log-likelihood of the sub-process `set` using only its own margins and
/// its `(k + 1) d_i` correlation matrix.
pub fn loglik_sub(
    data: &Matrix,
    margins: &[MarginSpec],
    set: &[usize],
    r_sub: &Matrix,
    k: usize,
) -> Result<Loglik> {
    if set.iter().any(|&i| i >= data.nrows() || i >= margins.len()) {
        return Err(Error::DimensionMismatch("sub-process index out of range".into()));
    }
    let rows = Matrix::from_fn(set.len(), data.ncols(), |r, t| data[(set[r], t)]);
    let sub_margins: Vec<MarginSpec> = set.iter().map(|&i| margins[i]).collect();
    loglik_full(&rows, &sub_margins, r_sub, k)
}
