use super::{
    solve_cross_pair, ConditionLabels, CrossFixedBlock, CrossSolution, FixedKind, Partition,
    SubprocessCorr,
};
use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, submatrix, Matrix, PD_TOL};
use crate::var::{durbin_levinson, AutocovSequence, VarRepresentation};

/// Position of (set `i`, slice `r`, member `a`) in the partitioned ordering,
/// where each set lists all its slices `t, t-1, …, t-k` before the next set.
fn partitioned_index(partition: &Partition, k: usize, i: usize, r: usize, a: usize) -> usize {
    partition.offset(i) * (k + 1) + r * partition.set(i).len() + a
}

/// Full `(k+1)d` correlation matrix in partitioned ordering.
///
/// Diagonal blocks are the sub-process block Toeplitz matrices; the `(r, s)`
/// slice block between sets `i` and `j` is `Σ_{ij,s-r}`.
pub fn assemble_full_r(
    partition: &Partition,
    subs: &[SubprocessCorr],
    crosses: &[CrossSolution],
) -> Result<Matrix> {
    let n = partition.len();
    if subs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} sub-process structures for {n} sets",
            subs.len()
        )));
    }
    let k = subs[0].order();
    for (i, s) in subs.iter().enumerate() {
        if s.order() != k {
            return Err(Error::DimensionMismatch(format!(
                "sub-process {} has order {}, expected {k}",
                i + 1,
                s.order()
            )));
        }
        if s.dim() != partition.set(i).len() {
            return Err(Error::DimensionMismatch(format!(
                "sub-process {} has dimension {}, its set has {} variables",
                i + 1,
                s.dim(),
                partition.set(i).len()
            )));
        }
    }
    let size = (k + 1) * partition.dim();
    let mut r = Matrix::zeros(size, size);
    for (i, s) in subs.iter().enumerate() {
        let base = partitioned_index(partition, k, i, 0, 0);
        let block = s.correlation_matrix();
        r.view_mut((base, base), block.shape()).copy_from(&block);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let cross = crosses.iter().find(|c| c.pair == (i, j)).ok_or_else(|| {
                Error::InvalidInput(format!("no cross solution for pair ({}, {})", i + 1, j + 1))
            })?;
            let (di, dj) = (subs[i].dim(), subs[j].dim());
            if cross.order() != k || cross.lag(0).shape() != (di, dj) {
                return Err(Error::DimensionMismatch(format!(
                    "cross solution for pair ({}, {}) does not match the sub-processes",
                    i + 1,
                    j + 1
                )));
            }
            for rr in 0..=k {
                for ss in 0..=k {
                    let block = cross.lag(ss as isize - rr as isize);
                    let row = partitioned_index(partition, k, i, rr, 0);
                    let col = partitioned_index(partition, k, j, ss, 0);
                    r.view_mut((row, col), (di, dj)).copy_from(block);
                    r.view_mut((col, row), (dj, di)).copy_from(&block.transpose());
                }
            }
        }
    }
    Ok(r)
}

/// Symmetric permutation from partitioned ordering to time-major ordering
/// `(Z_t, Z_{t-1}, …, Z_{t-k})` with natural variable order in each slice.
pub fn reorder_time_major(r_partitioned: &Matrix, partition: &Partition, k: usize) -> Result<Matrix> {
    let d = partition.dim();
    let size = (k + 1) * d;
    if r_partitioned.shape() != (size, size) {
        return Err(Error::DimensionMismatch(format!(
            "expected a {size}x{size} matrix, got {}x{}",
            r_partitioned.nrows(),
            r_partitioned.ncols()
        )));
    }
    // target[p] = time-major position of partitioned position p
    let mut target = vec![0; size];
    for (i, set) in partition.sets().iter().enumerate() {
        for r in 0..=k {
            for (a, &v) in set.iter().enumerate() {
                target[partitioned_index(partition, k, i, r, a)] = r * d + v;
            }
        }
    }
    let mut out = Matrix::zeros(size, size);
    for p in 0..size {
        for q in 0..size {
            out[(target[p], target[q])] = r_partitioned[(p, q)];
        }
    }
    Ok(out)
}

/// Hyperparameters of a margin-closed model.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginClosureSpec {
    pub partition: Partition,
    pub labels: ConditionLabels,
    pub subprocesses: Vec<SubprocessCorr>,
    /// One entry per pair `i < j`.
    pub fixed: Vec<CrossFixedBlock>,
}

impl MarginClosureSpec {
    pub fn new(
        partition: Partition,
        labels: ConditionLabels,
        subprocesses: Vec<SubprocessCorr>,
        fixed: Vec<CrossFixedBlock>,
    ) -> Result<Self> {
        let spec = Self {
            partition,
            labels,
            subprocesses,
            fixed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn order(&self) -> usize {
        self.subprocesses[0].order()
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn validate(&self) -> Result<()> {
        let n = self.partition.len();
        if self.labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} condition labels for {n} sets",
                self.labels.len()
            )));
        }
        if self.subprocesses.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} sub-process structures for {n} sets",
                self.subprocesses.len()
            )));
        }
        let k = self.subprocesses[0].order();
        for (i, s) in self.subprocesses.iter().enumerate() {
            if s.dim() != self.partition.set(i).len() || s.order() != k {
                return Err(Error::DimensionMismatch(format!(
                    "sub-process {} must be order {k} with dimension {}",
                    i + 1,
                    self.partition.set(i).len()
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let count = self.fixed.iter().filter(|f| f.pair == (i, j)).count();
                if count != 1 {
                    return Err(Error::InvalidInput(format!(
                        "pair ({}, {}) needs exactly one fixed block, found {count}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if let Some(f) = self.fixed.iter().find(|f| f.pair.1 >= n) {
            return Err(Error::InvalidInput(format!(
                "fixed block for pair ({}, {}) refers to a missing set",
                f.pair.0 + 1,
                f.pair.1 + 1
            )));
        }
        for f in &self.fixed {
            let expected = FixedKind::for_labels(self.labels.get(f.pair.0), self.labels.get(f.pair.1));
            if f.kind != expected {
                return Err(Error::InvalidInput(format!(
                    "pair ({}, {}) needs a {expected} fixed block, got {}",
                    f.pair.0 + 1,
                    f.pair.1 + 1,
                    f.kind
                )));
            }
        }
        Ok(())
    }

    pub fn fixed_for(&self, i: usize, j: usize) -> &CrossFixedBlock {
        self.fixed
            .iter()
            .find(|f| f.pair == (i, j))
            .expect("validated spec has every pair")
    }

    /// Solves every pair's cross blocks.
    pub fn solve_crosses(&self) -> Result<Vec<CrossSolution>> {
        let n = self.partition.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(solve_cross_pair(
                    &self.subprocesses[i],
                    &self.subprocesses[j],
                    (self.labels.get(i), self.labels.get(j)),
                    self.fixed_for(i, j),
                )?);
            }
        }
        Ok(out)
    }

    /// Solves, assembles and converts to VAR form; fails when the assembled
    /// correlation matrix is not positive definite.
    pub fn build(&self) -> Result<MarginClosedModel> {
        let (crosses, r_partitioned, r_time_major) = self.assemble()?;
        let k = self.order();
        let var = durbin_levinson(&AutocovSequence::from_time_major(&r_time_major, self.dim())?, k)?;
        Ok(MarginClosedModel {
            spec: self.clone(),
            crosses,
            r_partitioned,
            r_time_major,
            var,
        })
    }

    /// Time-major correlation matrix of `(Z_t, …, Z_{t-k})`, checked for
    /// positive definiteness.
    pub fn correlation(&self) -> Result<Matrix> {
        Ok(self.assemble()?.2)
    }

    fn assemble(&self) -> Result<(Vec<CrossSolution>, Matrix, Matrix)> {
        let crosses = self.solve_crosses()?;
        let r_partitioned = assemble_full_r(&self.partition, &self.subprocesses, &crosses)?;
        if !is_positive_definite(&r_partitioned, PD_TOL)? {
            return Err(self.diagnose_infeasible(&r_partitioned));
        }
        let r_time_major = reorder_time_major(&r_partitioned, &self.partition, self.order())?;
        Ok((crosses, r_partitioned, r_time_major))
    }

    fn diagnose_infeasible(&self, r: &Matrix) -> Error {
        let k = self.order();
        let n = self.partition.len();
        let members = |i: usize| -> Vec<usize> {
            let base = partitioned_index(&self.partition, k, i, 0, 0);
            (base..base + (k + 1) * self.partition.set(i).len()).collect()
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let idx: Vec<usize> = members(i).into_iter().chain(members(j)).collect();
                let sub = submatrix(r, &idx, &idx);
                if !is_positive_definite(&sub, PD_TOL).unwrap_or(false) {
                    let f = self.fixed_for(i, j);
                    return Error::NotPositiveDefinite(format!(
                        "correlation matrix of pair ({}, {}) with fixed {} block {:?}",
                        i + 1,
                        j + 1,
                        f.kind,
                        f.value.as_slice()
                    ));
                }
            }
        }
        Error::NotPositiveDefinite(
            "full correlation matrix (every pair is feasible on its own)".into(),
        )
    }
}

/// A constructed margin-closed model.
#[derive(Debug, Clone)]
pub struct MarginClosedModel {
    pub spec: MarginClosureSpec,
    pub crosses: Vec<CrossSolution>,
    pub r_partitioned: Matrix,
    pub r_time_major: Matrix,
    pub var: VarRepresentation,
}

impl MarginClosedModel {
    pub fn autocov(&self) -> AutocovSequence {
        AutocovSequence::from_time_major(&self.r_time_major, self.spec.dim())
            .expect("time-major matrix is block structured")
    }
}
