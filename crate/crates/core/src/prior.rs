//! Gaussian prior with matrix-free covariance actions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Action interface for a prior covariance `Γ`.
///
/// `factor_apply` must be a self-adjoint square root: applying it twice
/// reproduces `apply` up to round-off.
pub trait CovarianceOperator: Send + Sync {
    fn dim(&self) -> usize;
    /// `Γ v`.
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `Γ^{1/2} v` with a self-adjoint square root.
    fn factor_apply(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `Γ^{-1} v`, when available (needed for posterior statistics only).
    fn precision_apply(&self, v: &DVector<f64>) -> Option<DVector<f64>>;
}

/// Gaussian prior `N(mean, Γ)` over the parameter vector.
#[derive(Clone)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    cov: Arc<dyn CovarianceOperator>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, cov: Arc<dyn CovarianceOperator>) -> Self {
        assert_eq!(
            mean.len(),
            cov.dim(),
            "prior mean length {} does not match covariance dim {}",
            mean.len(),
            cov.dim()
        );
        GaussianPrior { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.cov.apply(v)
    }

    pub fn cov_factor_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.cov.factor_apply(v)
    }

    pub fn precision_apply(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.cov.precision_apply(v)
    }
}

/// Dense SPD covariance; the square root is the symmetric eigendecomposition
/// root, the precision comes from a Cholesky solve.
pub struct DenseCovariance {
    cov: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DenseCovariance {
    pub fn new(mut cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::DimensionMismatch(
                "covariance must be square".into(),
            ));
        }
        linalg::ensure_finite(&cov, "dense covariance")?;
        linalg::symmetrize(&mut cov);
        let chol = nalgebra::Cholesky::new(cov.clone()).ok_or(Error::ModelConfig(
            "dense covariance is not positive definite".into(),
        ))?;
        let sqrt = linalg::symmetric_sqrt(&cov);
        Ok(DenseCovariance { cov, sqrt, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

impl CovarianceOperator for DenseCovariance {
    fn dim(&self) -> usize {
        self.cov.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.cov * v
    }

    fn factor_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.sqrt * v
    }

    fn precision_apply(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.chol.solve(v))
    }
}
