//! JSON forms of matrices.
//!
//! Complex matrices are nested row arrays of `[re, im]` pairs; real matrices
//! are nested row arrays of numbers.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, RMat};

pub type ComplexRows = Vec<Vec<[f64; 2]>>;
pub type RealRows = Vec<Vec<f64>>;

pub fn cmat_to_rows(m: &CMat) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn cmat_from_rows(rows: &ComplexRows) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidSpec("ragged complex matrix".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn rmat_to_rows(m: &RMat) -> RealRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rmat_from_rows(rows: &RealRows) -> Result<RMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidSpec("ragged real matrix".into()));
    }
    Ok(RMat::from_fn(n, m, |i, j| rows[i][j]))
}

/// `#[serde(with = "serial::cmat")]`
pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        cmat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = ComplexRows::deserialize(d)?;
        cmat_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "serial::cmat_vec")]`
pub mod cmat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(cmat_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<CMat>, D::Error> {
        let all = Vec::<ComplexRows>::deserialize(d)?;
        all.iter()
            .map(|r| cmat_from_rows(r).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "serial::rmat")]`
pub mod rmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &RMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        rmat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RMat, D::Error> {
        let rows = RealRows::deserialize(d)?;
        rmat_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
