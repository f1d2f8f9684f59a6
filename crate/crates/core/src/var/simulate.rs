use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{implied_autocov, VarRepresentation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `rows x cols` matrix of independent N(0, 1) draws.
///
/// The generator is ChaCha20 seeded through `seed_from_u64`; normals come from
/// `rand_distr::StandardNormal` (ziggurat). Draws fill the matrix column by
/// column, so column `t` is the `t`-th vector draw.
pub fn standard_normals(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(rows, cols);
    for t in 0..cols {
        for i in 0..rows {
            m[(i, t)] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

/// Simulates `len` observations (columns of the returned `d x len` matrix).
///
/// The first `k` observations are drawn jointly from the stationary
/// distribution; later ones follow the recursion with Gaussian innovations.
pub fn simulate(var: &VarRepresentation, len: usize, seed: u64) -> Result<Matrix> {
    let d = var.dim();
    let k = var.order();
    let acov = implied_autocov(var, k.max(1))?;
    let noise = standard_normals(d, len, seed);
    let mut z = Matrix::zeros(d, len);
    let head = k.min(len);
    if head > 0 {
        // Time-major covariance of (Z_head, …, Z_1).
        let cov = acov.time_major(head)?;
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::NotPositiveDefinite("stationary initial covariance".into()))?;
        let mut draws = Matrix::zeros(head * d, 1);
        for t in 0..head {
            draws.view_mut((t * d, 0), (d, 1)).copy_from(&noise.column(t));
        }
        let joint = chol.l() * draws;
        for slot in 0..head {
            let t = head - 1 - slot;
            z.column_mut(t).copy_from(&joint.rows(slot * d, d));
        }
    }
    let innov = Cholesky::new(var.innovation_cov.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("innovation covariance".into()))?
        .l();
    for t in head..len {
        let mut next = &innov * noise.column(t);
        for (l, phi) in var.coefficients.iter().enumerate() {
            next += phi * z.column(t - 1 - l);
        }
        z.column_mut(t).copy_from(&next);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::sample_autocov;

    #[test]
    fn deterministic_under_seed() {
        let var = VarRepresentation::new(
            vec![Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3])],
            Matrix::identity(2, 2),
        )
        .unwrap();
        let a = simulate(&var, 200, 7).unwrap();
        let b = simulate(&var, 200, 7).unwrap();
        let c = simulate(&var, 200, 8).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn white_noise_sample_covariance() {
        let var = VarRepresentation::new(vec![Matrix::zeros(2, 2)], Matrix::identity(2, 2)).unwrap();
        let z = simulate(&var, 100_000, 1).unwrap();
        let c = sample_autocov(&z, 0).unwrap();
        assert!((c.lag(0) - Matrix::identity(2, 2)).abs().max() < 0.02);
    }

    #[test]
    fn sample_autocov_converges_to_implied() {
        let var = VarRepresentation::new(
            vec![
                Matrix::from_row_slice(2, 2, &[0.4, 0.2, -0.1, 0.3]),
                Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.05, -0.2]),
            ],
            Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
        )
        .unwrap();
        let horizon = 80isize;
        let truth = implied_autocov(&var, horizon as usize + 3).unwrap();
        let n = 100_000;
        let gamma = |i: usize, j: usize, h: isize| truth.lag(h)[(i, j)];
        for seed in [11, 12] {
            let z = simulate(&var, n, seed).unwrap();
            let est = sample_autocov(&z, 3).unwrap();
            for l in 0..=3isize {
                for i in 0..2 {
                    for j in 0..2 {
                        let var_est: f64 = (-horizon..=horizon)
                            .map(|h| gamma(i, i, h) * gamma(j, j, h) + gamma(i, j, h + l) * gamma(j, i, h - l))
                            .sum::<f64>()
                            / n as f64;
                        let err = (est.lag(l)[(i, j)] - gamma(i, j, l)).abs();
                        assert!(err < 3.0 * var_est.sqrt() + 1e-4, "lag {l} ({i},{j}) err {err}");
                    }
                }
            }
        }
    }
}
