use super::{Condition, ConditionLabels, Partition};
use crate::error::{Error, Result};
use crate::linalg::{block_toeplitz, gaussian_condition, is_positive_definite, IndexSplit, Matrix, PD_TOL};
use crate::var::{durbin_levinson, AutocovSequence, VarRepresentation};

/// Closure diagnostics for one sub-process `S`.
///
/// All residuals are conditional (partial) correlations given the `k`
/// intermediate slices of `S`, maximized in absolute value over entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetReport {
    /// 0-based variable indices of `S`.
    pub set: Vec<usize>,
    /// `Z_{S,t}` against the other variables at lags `1..=k`.
    pub forward_residual: f64,
    /// `Z_{S,t-k-1}` against the other variables at lags `1..=k`.
    pub backward_residual: f64,
    /// `Z_{S,t}` against `Z_{S,t-k-1}`; zero iff `S` has Markov order `<= k`
    /// at this lag.
    pub markov_residual: f64,
    pub forward_holds: bool,
    pub backward_holds: bool,
    /// One of the two conditions holds and the Markov residual vanishes.
    pub passes: bool,
}

impl SubsetReport {
    pub fn satisfied_condition(&self) -> Option<Condition> {
        if self.forward_holds {
            Some(Condition::Forward)
        } else if self.backward_holds {
            Some(Condition::Backward)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub tol: f64,
    pub subsets: Vec<SubsetReport>,
}

impl ClosureReport {
    pub fn all_pass(&self) -> bool {
        self.subsets.iter().all(|s| s.passes)
    }
}

fn max_partial_corr(cc: &Matrix, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
    let mut worst: f64 = 0.0;
    for a in rows {
        for b in cols.clone() {
            let denom = (cc[(a, a)] * cc[(b, b)]).sqrt();
            let v = if denom > 0.0 { cc[(a, b)] / denom } else { cc[(a, b)] };
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Checks the sufficient closure conditions for every set of `partition`
/// on a time-major correlation matrix of `k + 1` slices.
///
/// The matrix is extended to `k + 2` slices with the autocovariance
/// recursion of its VAR(k) representation.
pub fn verify_closure(r: &Matrix, partition: &Partition, k: usize, tol: f64) -> Result<ClosureReport> {
    let d = partition.dim();
    if r.shape() != ((k + 1) * d, (k + 1) * d) {
        return Err(Error::DimensionMismatch(format!(
            "expected a {0}x{0} time-major matrix for d = {d}, k = {k}",
            (k + 1) * d
        )));
    }
    if !is_positive_definite(r, PD_TOL)? {
        return Err(Error::NotPositiveDefinite("time-major correlation matrix".into()));
    }
    let acov = AutocovSequence::from_time_major(r, d)?;
    let var = durbin_levinson(&acov, k)?;
    let mut blocks: Vec<Matrix> = acov.blocks().to_vec();
    let mut next = Matrix::zeros(d, d);
    for (m, phi) in var.coefficients.iter().enumerate() {
        next += phi * acov.lag(k as isize - m as isize);
    }
    blocks.push(next);
    let extended = block_toeplitz(&blocks);
    let at = |slice: usize, vars: &[usize]| -> Vec<usize> { vars.iter().map(|&v| slice * d + v).collect() };

    let mut subsets = Vec::with_capacity(partition.len());
    for (i, set) in partition.sets().iter().enumerate() {
        let others = partition.complement(i);
        let a = at(0, set);
        let b = at(k + 1, set);
        let v: Vec<usize> = (1..=k).flat_map(|s| at(s, set)).collect();
        let w: Vec<usize> = (1..=k).flat_map(|s| at(s, &others)).collect();
        let (na, nb, nw) = (a.len(), b.len(), w.len());
        let head: Vec<usize> = a.into_iter().chain(b).chain(w).collect();
        let (_, cc) = gaussian_condition(&extended, &IndexSplit::partial(head, v)?)?;
        let forward_residual = max_partial_corr(&cc, 0..na, na + nb..na + nb + nw);
        let backward_residual = max_partial_corr(&cc, na..na + nb, na + nb..na + nb + nw);
        let markov_residual = max_partial_corr(&cc, 0..na, na..na + nb);
        let forward_holds = forward_residual < tol;
        let backward_holds = backward_residual < tol;
        subsets.push(SubsetReport {
            set: set.clone(),
            forward_residual,
            backward_residual,
            markov_residual,
            forward_holds,
            backward_holds,
            passes: (forward_holds || backward_holds) && markov_residual < tol,
        });
    }
    Ok(ClosureReport { tol, subsets })
}

/// True iff for every set with the forward label, its rows of every
/// coefficient matrix vanish (within `tol`) outside its own columns.
pub fn coefficient_block_zeros(
    labels: &ConditionLabels,
    var: &VarRepresentation,
    partition: &Partition,
    tol: f64,
) -> bool {
    partition.sets().iter().enumerate().all(|(i, set)| {
        if labels.get(i) != Condition::Forward {
            return true;
        }
        let others = partition.complement(i);
        var.coefficients.iter().all(|phi| {
            set.iter()
                .all(|&r| others.iter().all(|&c| phi[(r, c)].abs() <= tol))
        })
    })
}
