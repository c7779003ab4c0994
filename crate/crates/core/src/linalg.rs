//! Small dense kernels shared by the EIG engine and the low-rank module.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// Unlike the library factorization this reports the 1-based index of the
/// failing leading minor, which the EIG engine surfaces in its errors.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "cholesky_lower: matrix must be square");
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let dsqrt = diag.sqrt();
        l[(j, j)] = dsqrt;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dsqrt;
        }
    }
    Ok(l)
}

/// Replace `m` by its symmetric part `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Max absolute deviation from symmetry, `max |m_ij - m_ji|`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric square root `m^{1/2}` via eigendecomposition; negative
/// eigenvalues (round-off on PSD inputs) are clamped to zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let sqrt_vals: DVector<f64> =
        eig.eigenvalues.map(|v| if v > 0.0 { v.sqrt() } else { 0.0 });
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= sqrt_vals[j];
    }
    scaled * eig.eigenvectors.transpose()
}

/// Check that all entries are finite, otherwise report the given context.
pub fn ensure_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reports_failing_minor() {
        // Indefinite in the trailing 2x2 block: minor 2 is fine, minor 3 fails.
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match cholesky_lower(&m) {
            Err(Error::NotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_matches_reconstruction() {
        let g = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let m = &g * g.transpose() + DMatrix::identity(5, 5);
        let l = cholesky_lower(&m).unwrap();
        let res = (&l * l.transpose() - &m).amax();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn sqrt_squares_back() {
        let g = DMatrix::from_fn(4, 4, |i, j| ((i + 2 * j) % 5) as f64 - 1.0);
        let m = &g * g.transpose();
        let s = symmetric_sqrt(&m);
        assert!((&s * &s - &m).amax() < 1e-10 * m.amax());
        assert!(symmetry_defect(&s) < 1e-12);
    }
}
