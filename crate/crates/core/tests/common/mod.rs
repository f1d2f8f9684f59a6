#![allow(dead_code)]

use mcvar::closure::{
    Condition, ConditionLabels, CrossFixedBlock, CrossSolution, FixedKind, MarginClosureSpec, Partition,
    SubprocessCorr,
};
use mcvar::var::{implied_autocov, is_stationary, VarRepresentation};
use mcvar::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-half_width..half_width))
}

pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let a = uniform_matrix(rng, d, d, 1.0);
    &a * a.transpose() + Matrix::identity(d, d) * 0.5
}

/// A stationary VAR(k) with random coefficients and innovation covariance.
pub fn random_var(rng: &mut ChaCha8Rng, d: usize, k: usize) -> VarRepresentation {
    loop {
        let scale = 0.9 / (k as f64 * d as f64).sqrt();
        let coefs = (0..k).map(|_| uniform_matrix(rng, d, d, scale)).collect();
        let var = VarRepresentation::new(coefs, random_spd(rng, d)).unwrap();
        if is_stationary(&var) && var.spectral_radius() < 0.95 {
            return var;
        }
    }
}

/// Random positive-definite correlation structure of a `d`-dimensional
/// order-`k` sub-process.
pub fn random_subprocess(rng: &mut ChaCha8Rng, d: usize, k: usize) -> SubprocessCorr {
    if d == 1 {
        let pacf: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.8..0.8)).collect();
        return SubprocessCorr::univariate(&mcvar::estimation::pacf_to_acf(&pacf)).unwrap();
    }
    let var = random_var(rng, d, k);
    let acf = implied_autocov(&var, k).unwrap().to_correlation();
    SubprocessCorr::new(acf.into_blocks()).unwrap()
}

pub fn random_condition(rng: &mut ChaCha8Rng) -> Condition {
    if rng.gen_bool(0.5) {
        Condition::Forward
    } else {
        Condition::Backward
    }
}

/// Random margin-closed specification with sets of size at most 2. Fixed
/// values are small so most instances are feasible.
pub fn random_spec(rng: &mut ChaCha8Rng, n_sets: usize, k: usize) -> MarginClosureSpec {
    let dims: Vec<usize> = (0..n_sets).map(|_| rng.gen_range(1..=2)).collect();
    let mut sets = Vec::new();
    let mut next = 0;
    for &d in &dims {
        sets.push((next..next + d).collect());
        next += d;
    }
    let partition = Partition::new(sets, next).unwrap();
    let labels = ConditionLabels::new((0..n_sets).map(|_| random_condition(rng)).collect());
    let subs = dims.iter().map(|&d| random_subprocess(rng, d, k)).collect();
    let mut fixed = Vec::new();
    for i in 0..n_sets {
        for j in (i + 1)..n_sets {
            let kind = FixedKind::for_labels(labels.get(i), labels.get(j));
            let value = uniform_matrix(rng, dims[i], dims[j], 0.25);
            fixed.push(CrossFixedBlock::new((i, j), kind, value).unwrap());
        }
    }
    MarginClosureSpec::new(partition, labels, subs, fixed).unwrap()
}

/// Forward and backward predictors by direct regression on the
/// `(k d) x (k d)` Gram matrix, independent of the library's recursion.
pub fn naive_predictors(s: &SubprocessCorr) -> (Vec<Matrix>, Vec<Matrix>) {
    let d = s.dim();
    let k = s.order();
    let lag = |l: isize| if l >= 0 { s.blocks()[l as usize].clone() } else { s.blocks()[(-l) as usize].transpose() };
    let gram = Matrix::from_fn(k * d, k * d, |r, c| lag(c as isize / d as isize - r as isize / d as isize)[(r % d, c % d)]);
    let inv = gram.try_inverse().unwrap();
    let fwd_rhs = Matrix::from_fn(d, k * d, |r, c| lag(c as isize / d as isize + 1)[(r, c % d)]);
    let bwd_rhs = Matrix::from_fn(d, k * d, |r, c| lag(c as isize / d as isize + 1 - k as isize - 1)[(r, c % d)]);
    let split = |m: Matrix| (0..k).map(|j| m.columns(j * d, d).into_owned()).collect::<Vec<_>>();
    (split(fwd_rhs * &inv), split(bwd_rhs * &inv))
}

/// Residuals of one set's condition against the other's cross blocks.
/// `x(l)` is `Cov(Z_own,t, Z_other,t-l)`.
pub fn condition_residual(s: &SubprocessCorr, cond: Condition, x: &dyn Fn(isize) -> Matrix) -> f64 {
    let k = s.order() as isize;
    let (phi, psi) = naive_predictors(s);
    let mut worst = 0.0_f64;
    for l in 1..=k {
        let r = match cond {
            Condition::Forward => {
                let mut r = x(l);
                for (m, p) in phi.iter().enumerate() {
                    r -= p * x(l - (m as isize + 1));
                }
                r
            }
            Condition::Backward => {
                let mut r = x(-l);
                for (j, p) in psi.iter().enumerate() {
                    r -= p * x(k + 1 - (j as isize + 1) - l);
                }
                r
            }
        };
        worst = worst.max(r.abs().max());
    }
    worst
}

/// Largest residual of both sets' selected conditions for a solved pair.
pub fn pair_residual(si: &SubprocessCorr, sj: &SubprocessCorr, labels: (Condition, Condition), sol: &CrossSolution) -> f64 {
    let xi = |l: isize| sol.lag(l).clone();
    let xj = |l: isize| sol.lag(-l).transpose();
    condition_residual(si, labels.0, &xi).max(condition_residual(sj, labels.1, &xj))
}

/// Dense elementwise solve of the stacked cross-block conditions, without
/// vec/Kronecker/commutation identities. Returns blocks for lags `-k..=k`,
/// or `None` when the dense system is singular.
pub fn naive_cross_solve(
    si: &SubprocessCorr,
    sj: &SubprocessCorr,
    labels: (Condition, Condition),
    fixed: &CrossFixedBlock,
) -> Option<Vec<Matrix>> {
    let (di, dj, k) = (si.dim(), sj.dim(), si.order() as isize);
    let nlag = (2 * k + 1) as usize;
    let n = nlag * di * dj;
    let idx = |l: isize, a: usize, b: usize| (l + k) as usize * di * dj + a * dj + b;
    let mut a_mat = Matrix::zeros(n, n);
    let mut rhs = Matrix::zeros(n, 1);
    let mut row = 0;
    let (phi_i, psi_i) = naive_predictors(si);
    let (phi_j, psi_j) = naive_predictors(sj);
    // set i: X_l entries directly.
    for l in 1..=k {
        for a in 0..di {
            for b in 0..dj {
                match labels.0 {
                    Condition::Forward => {
                        a_mat[(row, idx(l, a, b))] += 1.0;
                        for (m, p) in phi_i.iter().enumerate() {
                            for q in 0..di {
                                a_mat[(row, idx(l - m as isize - 1, q, b))] -= p[(a, q)];
                            }
                        }
                    }
                    Condition::Backward => {
                        a_mat[(row, idx(-l, a, b))] += 1.0;
                        for (jj, p) in psi_i.iter().enumerate() {
                            for q in 0..di {
                                a_mat[(row, idx(k - jj as isize - l, q, b))] -= p[(a, q)];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
    // set j: Y_l = X_{-l}^T, so Y_l[a, b] = X_{-l}[b, a].
    for l in 1..=k {
        for a in 0..dj {
            for b in 0..di {
                match labels.1 {
                    Condition::Forward => {
                        a_mat[(row, idx(-l, b, a))] += 1.0;
                        for (m, p) in phi_j.iter().enumerate() {
                            for q in 0..dj {
                                a_mat[(row, idx(-(l - m as isize - 1), b, q))] -= p[(a, q)];
                            }
                        }
                    }
                    Condition::Backward => {
                        a_mat[(row, idx(l, b, a))] += 1.0;
                        for (jj, p) in psi_j.iter().enumerate() {
                            for q in 0..dj {
                                a_mat[(row, idx(-(k - jj as isize - l), b, q))] -= p[(a, q)];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
    let fixed_lag = fixed.kind.lag(k as usize);
    for a in 0..di {
        for b in 0..dj {
            a_mat[(row, idx(fixed_lag, a, b))] = 1.0;
            rhs[(row, 0)] = fixed.value[(a, b)];
            row += 1;
        }
    }
    assert_eq!(row, n);
    let lu = a_mat.lu();
    let u = lu.solve(&rhs)?;
    Some(
        (-k..=k)
            .map(|l| Matrix::from_fn(di, dj, |a, b| u[(idx(l, a, b), 0)]))
            .collect(),
    )
}
