//! Goal-oriented Bayesian optimal experimental design for linear Gaussian
//! inverse problems.
//!
//! Given a linear forward map `F` with additive Gaussian sensor noise, a
//! Gaussian prior on the parameter, and a linear parameter-to-QoI map `P`,
//! this crate selects sensor subsets maximizing the expected information
//! gain (EIG) for the predicted QoI. The expensive, design-independent Gram
//! operators
//!
//! ```text
//! H = F Γ F*,    Hᵨ = F Γ P* Σ⁻¹ P Γ F*,    ΔH = H − Hᵨ
//! ```
//!
//! are assembled once, exactly or as randomized low-rank factors; afterwards
//! the EIG of any design costs only `r × r` dense work
//! (`1/2 logdet(I + Lᵀ W Hᵨ Wᵀ L)` with `Γ_η⁻¹ = L Lᵀ`), so the swapping
//! greedy optimizer runs free of model solves. An a-posteriori bound
//! certifies the EIG error introduced by spectral truncation.
//!
//! Modules:
//! * [`operator`] / [`prior`] — matrix-free operator and covariance actions
//!   with solve accounting.
//! * [`model`] — the model bundle, designs, and offline assembly.
//! * [`eig`] — exact, online and low-rank EIG evaluation.
//! * [`lowrank`] — randomized eigendecomposition, truncation, error bound.
//! * [`optimize`] — swapping greedy and the baselines.

pub mod eig;
pub mod error;
pub mod linalg;
pub mod lowrank;
pub mod model;
pub mod operator;
pub mod optimize;
pub mod prior;

pub use eig::{
    eig_goal_approx, eig_goal_direct, eig_goal_online, eig_parameter, inv_cholesky_factor,
    logdet_psd, CholeskyWhitener, EigEvaluator,
};
pub use error::{Error, Result};
pub use lowrank::{
    dense_eig_reference, eig_error_bound, randomized_eig, truncate_by_tolerance, RandEigConfig,
    RandEigOutcome, SpectralFactor, Tolerances,
};
pub use model::{
    assemble_offline, compute_sigma_pr, gamma_eta, posterior_mean, posterior_pointwise_variance,
    AssemblyMode, AssemblyReport, Design, GoalSetup, Limits, LinearModel, LowRankPlan, NoiseModel,
    OfflineData, OfflineFactors, OfflineMatrices,
};
pub use operator::{adjoint_dot_test, DenseOperator, LinearOperator, OperatorHandle};
pub use optimize::{
    exhaustive_search, leverage_init, random_design_sample, standard_greedy, swap_step,
    swapping_greedy, OptimizerTrace, SwapOutcome, SwappingConfig,
};
pub use prior::{CovarianceOperator, DenseCovariance, GaussianPrior};
