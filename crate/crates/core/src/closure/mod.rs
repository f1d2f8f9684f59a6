//! Construction and verification of margin-closed VAR(k) correlation
//! structures.
//!
//! A model is specified by a partition of the variables into sub-processes,
//! the block Toeplitz correlation structure of each sub-process, one
//! condition label per sub-process, and one fixed cross-dependence block per
//! pair of sub-processes. All remaining cross-lag blocks are then determined
//! by linear conditions and the full correlation matrix can be assembled.
//!
//! Lag convention: `Σ_{ij,l} = corr(Z_{S_i,t}, Z_{S_j,t-l})`, so
//! `Σ_{ji,l} = Σ_{ij,-l}^T`.

mod assemble;
mod solve;
mod verify;

pub use assemble::{assemble_full_r, reorder_time_major, MarginClosedModel, MarginClosureSpec};
pub use solve::{
    backward_condition_matrix, backward_predictors, condition_matrix, forward_condition_matrix,
    forward_predictors, solve_cross_pair, PredictorSet,
};
pub use verify::{coefficient_block_zeros, verify_closure, ClosureReport, SubsetReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_toeplitz, is_positive_definite, max_asymmetry, Matrix, PD_TOL, SYMMETRY_TOL};

/// Ordered disjoint index sets covering `0..dim` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    sets: Vec<Vec<usize>>,
    dim: usize,
}

impl Partition {
    pub fn new(sets: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidInput("partition has no sets".into()));
        }
        let mut seen = vec![false; dim];
        for (n, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidInput(format!("set {} of the partition is empty", n + 1)));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "indices in set {} must be strictly increasing",
                    n + 1
                )));
            }
            for &i in set {
                if i >= dim {
                    return Err(Error::InvalidInput(format!(
                        "variable {} is out of range for dimension {dim}",
                        i + 1
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidInput(format!(
                        "variable {} appears in more than one set",
                        i + 1
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "variable {} is not covered by the partition",
                missing + 1
            )));
        }
        Ok(Self { sets, dim })
    }

    /// `{0}, {1}, …, {dim-1}`.
    pub fn singletons(dim: usize) -> Self {
        Self {
            sets: (0..dim).map(|i| vec![i]).collect(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn set_dims(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// Variables outside set `i`, in increasing order.
    pub fn complement(&self, i: usize) -> Vec<usize> {
        (0..self.dim).filter(|v| !self.sets[i].contains(v)).collect()
    }

    /// Position of set `i`'s first variable in the partitioned ordering of
    /// one time slice.
    pub fn offset(&self, i: usize) -> usize {
        self.sets[..i].iter().map(Vec::len).sum()
    }
}

/// Which sufficient condition a sub-process satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// The present is independent of the other sub-processes' past given its
    /// own past.
    Forward,
    /// The value `k + 1` steps back is independent of the other
    /// sub-processes' recent past given the intermediate own values.
    Backward,
}

impl Condition {
    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1 => Ok(Condition::Forward),
            2 => Ok(Condition::Backward),
            other => Err(Error::InvalidInput(format!(
                "condition label must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Condition::Forward => 1,
            Condition::Backward => 2,
        }
    }
}

/// One condition per sub-process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionLabels(Vec<Condition>);

impl ConditionLabels {
    pub fn new(labels: Vec<Condition>) -> Self {
        Self(labels)
    }

    pub fn from_digits(labels: &[u8]) -> Result<Self> {
        labels
            .iter()
            .map(|&c| Condition::from_label(c))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn digits(&self) -> Vec<u8> {
        self.0.iter().map(|c| c.label()).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Condition {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[Condition] {
        &self.0
    }
}

/// Which cross block of a pair is the free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedKind {
    /// `Σ_{ij,0}`
    Contemporaneous,
    /// `Σ_{ij,-k}`
    LagMinusK,
    /// `Σ_{ij,k}`
    LagPlusK,
}

impl std::fmt::Display for FixedKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FixedKind::Contemporaneous => "contemporaneous",
            FixedKind::LagMinusK => "lag_minus_k",
            FixedKind::LagPlusK => "lag_plus_k",
        })
    }
}

impl FixedKind {
    pub fn for_labels(ci: Condition, cj: Condition) -> Self {
        match (ci, cj) {
            (Condition::Forward, Condition::Backward) => FixedKind::LagMinusK,
            (Condition::Backward, Condition::Forward) => FixedKind::LagPlusK,
            _ => FixedKind::Contemporaneous,
        }
    }

    /// Lag of the fixed block for order `k`.
    pub fn lag(self, k: usize) -> isize {
        match self {
            FixedKind::Contemporaneous => 0,
            FixedKind::LagMinusK => -(k as isize),
            FixedKind::LagPlusK => k as isize,
        }
    }
}

/// The fixed cross-dependence block of the pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFixedBlock {
    pub pair: (usize, usize),
    pub kind: FixedKind,
    pub value: Matrix,
}

impl CrossFixedBlock {
    pub fn new(pair: (usize, usize), kind: FixedKind, value: Matrix) -> Result<Self> {
        if pair.0 >= pair.1 {
            return Err(Error::InvalidInput(format!(
                "cross block pair ({}, {}) must have i < j",
                pair.0 + 1,
                pair.1 + 1
            )));
        }
        if value.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("cross block entries must be finite".into()));
        }
        Ok(Self { pair, kind, value })
    }
}

/// All cross blocks `Σ_{ij,-k}..Σ_{ij,k}` of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSolution {
    pub pair: (usize, usize),
    blocks: Vec<Matrix>,
}

impl CrossSolution {
    pub fn new(pair: (usize, usize), blocks: Vec<Matrix>) -> Result<Self> {
        if blocks.len() % 2 != 1 {
            return Err(Error::DimensionMismatch(
                "cross solution needs 2k + 1 blocks".into(),
            ));
        }
        let shape = blocks[0].shape();
        if blocks.iter().any(|b| b.shape() != shape) {
            return Err(Error::DimensionMismatch("cross blocks differ in shape".into()));
        }
        Ok(Self { pair, blocks })
    }

    pub fn order(&self) -> usize {
        (self.blocks.len() - 1) / 2
    }

    /// `Σ_{ij,l}` for `|l| <= k`.
    pub fn lag(&self, l: isize) -> &Matrix {
        &self.blocks[(l + self.order() as isize) as usize]
    }

    /// Blocks ordered from lag `-k` to lag `k`.
    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }
}

/// Correlation structure `Σ_{ii,0}..Σ_{ii,k}` of one sub-process.
#[derive(Debug, Clone, PartialEq)]
pub struct SubprocessCorr {
    blocks: Vec<Matrix>,
}

impl SubprocessCorr {
    /// Validates unit diagonal and symmetry of the lag-0 block and positive
    /// definiteness of the `(k + 1)`-slice block Toeplitz matrix.
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidInput("sub-process needs at least the lag-0 block".into()));
        };
        let d = first.nrows();
        if d == 0 || blocks.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!(
                "every sub-process block must be {d}x{d}"
            )));
        }
        if blocks.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("sub-process blocks must be finite".into()));
        }
        let asym = max_asymmetry(first);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        if (0..d).any(|i| (first[(i, i)] - 1.0).abs() > SYMMETRY_TOL) {
            return Err(Error::InvalidInput(
                "lag-0 block must have a unit diagonal".into(),
            ));
        }
        let mut blocks = blocks;
        blocks[0] = (&blocks[0] + blocks[0].transpose()) * 0.5;
        let out = Self { blocks };
        if !is_positive_definite(&out.correlation_matrix(), PD_TOL)? {
            return Err(Error::NotPositiveDefinite(
                "sub-process correlation matrix".into(),
            ));
        }
        Ok(out)
    }

    /// Univariate sub-process from autocorrelations `1, ρ_1, …, ρ_k`.
    pub fn univariate(acf: &[f64]) -> Result<Self> {
        Self::new(acf.iter().map(|&r| Matrix::from_element(1, 1, r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn order(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    /// `Σ_{ii,l}` for `|l| <= k`, with `Σ_{ii,-l} = Σ_{ii,l}^T`.
    pub fn lag(&self, l: isize) -> Matrix {
        if l >= 0 {
            self.blocks[l as usize].clone()
        } else {
            self.blocks[(-l) as usize].transpose()
        }
    }

    /// The `(k + 1) d_i` square block Toeplitz correlation matrix.
    pub fn correlation_matrix(&self) -> Matrix {
        block_toeplitz(&self.blocks)
    }

    /// Correlation of the `k` conditioning slices `(Z_{t-1}, …, Z_{t-k})`.
    pub fn gram(&self) -> Option<Matrix> {
        (self.order() > 0).then(|| block_toeplitz(&self.blocks[..self.order()]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(Partition::new(vec![vec![1, 0], vec![2]], 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::new(vec![vec![0], vec![]], 1).is_err());
        let p = Partition::new(vec![vec![0, 2], vec![1]], 3).unwrap();
        assert_eq!(p.complement(0), vec![1]);
        assert_eq!(p.offset(1), 2);
    }

    #[test]
    fn fixed_kind_per_labels() {
        use Condition::*;
        assert_eq!(FixedKind::for_labels(Forward, Forward), FixedKind::Contemporaneous);
        assert_eq!(FixedKind::for_labels(Backward, Backward), FixedKind::Contemporaneous);
        assert_eq!(FixedKind::for_labels(Forward, Backward), FixedKind::LagMinusK);
        assert_eq!(FixedKind::for_labels(Backward, Forward), FixedKind::LagPlusK);
    }

    #[test]
    fn labels_parse() {
        assert!(ConditionLabels::from_digits(&[1, 2, 2]).is_ok());
        assert!(ConditionLabels::from_digits(&[1, 3]).is_err());
    }

    #[test]
    fn subprocess_validation() {
        assert!(SubprocessCorr::univariate(&[1.0, -0.8, 0.6]).is_ok());
        assert!(SubprocessCorr::univariate(&[0.9, 0.5]).is_err());
        assert!(matches!(
            SubprocessCorr::univariate(&[1.0, 0.99, 0.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        let s = SubprocessCorr::univariate(&[1.0, 0.6, 0.5]).unwrap();
        assert_eq!(s.order(), 2);
        assert_eq!(s.gram().unwrap(), Matrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]));
    }
}
