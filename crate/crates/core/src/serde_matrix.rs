//! Serde adapters writing matrices as nested row arrays.

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::Matrix;

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err("matrix must have at least one row and one column".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!(
            "row {} has {} entries, expected {ncols}",
            bad + 1,
            rows[bad].len()
        ));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows).map_err(D::Error::custom)
}

pub mod vec_of {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| from_rows(rows).map_err(D::Error::custom))
            .collect()
    }
}
