//! Density metrics that indicate when ℓ1 sampling beats ℓ2 sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frob_norm_sq, l1_norm};
use crate::matrix::Matrix;

fn nonzero(a: &Matrix) -> Result<()> {
    if a.nnz() == 0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(())
}

/// `nd = ‖A‖₁² / ‖A‖_F²`, at most `‖A‖₀`.
pub fn numeric_density(a: &Matrix) -> Result<f64> {
    nonzero(a)?;
    let l1 = l1_norm(a);
    Ok(l1 * l1 / frob_norm_sq(a))
}

/// `rs₀ = max_i nnz(A_i) / (nnz(A) / m)`.
pub fn row_density_skew(a: &Matrix) -> Result<f64> {
    nonzero(a)?;
    let max = (0..a.rows())
        .map(|i| a.row(i).iter().filter(|v| **v != 0.0).count())
        .max()
        .unwrap_or(0);
    Ok(max as f64 / (a.nnz() as f64 / a.rows() as f64))
}

/// `rs₁ = max_i ‖A_i‖₁ / (‖A‖₁ / m)`.
pub fn numeric_row_density_skew(a: &Matrix) -> Result<f64> {
    nonzero(a)?;
    let max = (0..a.rows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(max / (l1_norm(a) / a.rows() as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetrics {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub nd: f64,
    pub rs0: f64,
    pub rs1: f64,
}

impl MatrixMetrics {
    pub fn compute(a: &Matrix) -> Result<Self> {
        Ok(Self {
            rows: a.rows(),
            cols: a.cols(),
            nnz: a.nnz(),
            nd: numeric_density(a)?,
            rs0: row_density_skew(a)?,
            rs1: numeric_row_density_skew(a)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [2.0, 0.0]]).unwrap();
        assert_eq!(numeric_row_density_skew(&a).unwrap(), 1.0);
        assert!((row_density_skew(&a).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((numeric_density(&a).unwrap() - 16.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_one_and_identical_rows() {
        let a = Matrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(numeric_density(&a).unwrap(), 4.0);
        let b = Matrix::from_rows(&[[1.0, -2.0, 0.0], [1.0, -2.0, 0.0]]).unwrap();
        assert_eq!(row_density_skew(&b).unwrap(), 1.0);
        assert_eq!(numeric_row_density_skew(&b).unwrap(), 1.0);
        assert!(matches!(numeric_density(&Matrix::zeros(2, 2)), Err(Error::ZeroMatrix)));
        assert!(matches!(MatrixMetrics::compute(&Matrix::zeros(1, 3)), Err(Error::ZeroMatrix)));
    }

    proptest! {
        #[test]
        fn metric_identities(
            (m, n, data) in (1usize..7, 1usize..7).prop_flat_map(|(m, n)| {
                (Just(m), Just(n), proptest::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], m * n))
            })
        ) {
            let a = Matrix::from_vec(m, n, data).unwrap();
            prop_assume!(a.nnz() > 0);
            let met = MatrixMetrics::compute(&a).unwrap();
            prop_assert!(met.nd <= a.nnz() as f64 * (1.0 + 1e-12));
            prop_assert!(met.rs0 >= 1.0 - 1e-12);
            prop_assert!(met.rs1 >= 1.0 - 1e-12);
        }
    }
}
