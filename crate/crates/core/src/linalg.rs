//! Small dense factorizations used by the samplers and the conditioning code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance (against the trace) for accepting a covariance matrix
/// as positive semidefinite.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Lower Cholesky factor of a symmetric positive semidefinite matrix.
///
/// Pivots in `[-tol, tol]` are treated as exact zeros (the column is
/// dropped), with `tol = PSD_REL_TOL * trace`. Anything more negative is
/// reported as `CovarianceNotPsd`.
pub fn cholesky_psd(a: &DMatrix<f64>) -> Result<LowerTriangular> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let tol = PSD_REL_TOL * a.trace().abs().max(f64::MIN_POSITIVE);
    // row-major working copy so the inner products run over contiguous memory
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let row_j = &mut l[j * n..(j + 1) * n];
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= row_j[k] * row_j[k];
        }
        if diag < -tol {
            return Err(Error::CovarianceNotPsd { pivot: diag, row: j, tolerance: tol });
        }
        if diag <= tol {
            continue;
        }
        let ljj = diag.sqrt();
        row_j[j] = ljj;
        let row_j: Vec<f64> = row_j[..j + 1].to_vec();
        for i in (j + 1)..n {
            let row_i = &mut l[i * n..i * n + j + 1];
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= row_i[k] * row_j[k];
            }
            row_i[j] = s / ljj;
        }
    }
    Ok(LowerTriangular { n, rows: l })
}

/// Dense lower-triangular factor stored row-major.
#[derive(Clone, Debug)]
pub struct LowerTriangular {
    n: usize,
    rows: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L z`.
    pub fn mul(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.rows[i * self.n..i * self.n + i + 1];
                row.iter().zip(z).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.rows)
    }
}
