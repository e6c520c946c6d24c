use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when none is given.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Extreme eigenvalues of a symmetric matrix and the PSD verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub pass: bool,
}

/// Checks `min_eig >= -tol * max(1, max_eig)` with a dense symmetric eigensolver.
pub fn check_psd(g: &DMatrix<f64>, tol: f64) -> Result<PsdReport> {
    if !g.is_square() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, not square",
            g.nrows(),
            g.ncols()
        )));
    }
    if g.is_empty() {
        return Err(Error::InvalidInput("matrix is empty".into()));
    }
    let scale = g.amax().max(1.0);
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (g[(i, j)] - g[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let min_eig = eig.min();
    let max_eig = eig.max();
    Ok(PsdReport {
        min_eig,
        max_eig,
        pass: min_eig >= -tol * max_eig.max(1.0),
    })
}
