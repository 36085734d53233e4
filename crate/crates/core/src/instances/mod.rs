//! Concrete problem families: quadratic saddles, smoothed-L1 regression,
//! MSPBE policy evaluation and correlated Gaussian data.

pub mod gaussian;
pub mod mspbe;
pub mod quadratic;
pub mod regression;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A serialized instance, tagged by family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum InstanceDocument {
    Quadratic(quadratic::QuadraticDocument),
    SmoothedL1(regression::RegressionDocument),
    Mspbe(mspbe::MspbeDocument),
}

pub(crate) fn rows_of<T: Scalar>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|&v| to_f64(v)).collect()).collect()
}

pub(crate) fn from_rows<T: Scalar>(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Document(format!("matrix {name} has rows of different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| lit(rows[i][j])))
}

pub(crate) fn vec_of<T: Scalar>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|&x| to_f64(x)).collect()
}

pub(crate) fn vec_from<T: Scalar>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| lit(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(from_rows::<f64>(&[vec![1.0, 2.0], vec![3.0]], "A").is_err());
        let m = from_rows::<f64>(&[vec![1.0, 2.0], vec![3.0, 4.0]], "A").unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(rows_of(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn tagged_document() {
        let doc = InstanceDocument::Mspbe(mspbe::MspbeDocument {
            features: vec![[vec![1.0], vec![0.0]]],
            rewards: vec![1.0],
            gamma: 0.9,
            normalize: false,
        });
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"family\":\"mspbe\""));
        assert_eq!(serde_json::from_str::<InstanceDocument>(&json).unwrap(), doc);
    }
}
