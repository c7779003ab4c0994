//! Linear Gaussian inverse-problem model and design-independent assembly.
//!
//! The model bundles the candidate-sensor forward map `F` (range dimension
//! `d`), a diagonal noise model and a Gaussian prior. The goal setup carries
//! the parameter-to-QoI map `P` together with the QoI prior covariance
//! `Σ = P Γ P*`. Assembly produces the data-space Gram operators
//!
//! ```text
//! H   = F Γ F*,        Hᵨ = F Γ P* Σ⁻¹ P Γ F*,        ΔH = H − Hᵨ,
//! ```
//!
//! either densely (desk scale) or as truncated spectral factors. Designs are
//! index sets; the Boolean selection matrix is never materialized — every
//! `W M Wᵀ` product is a sub-matrix extraction keyed by the sorted indices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lowrank::{
    randomized_eig, truncate_by_tolerance, RandEigConfig, SpectralFactor, Tolerances,
};
use crate::operator::OperatorHandle;
use crate::prior::GaussianPrior;

/// Configurable dense-path thresholds.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Largest `d` for which `H`, `Hᵨ`, `ΔH` may be assembled densely.
    pub dense_assembly: usize,
    /// Largest parameter dimension for dense posterior solves.
    pub posterior_solve: usize,
    /// Largest subset count `C(d, r)` the exhaustive search will enumerate.
    pub exhaustive_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dense_assembly: 512,
            posterior_solve: 4096,
            exhaustive_cap: 2_000_000,
        }
    }
}

/// Uncorrelated observation noise for the `d` candidate sensors.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    variances: DVector<f64>,
    sigma_min_sq: f64,
}

impl NoiseModel {
    pub fn new(variances: DVector<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidInput("noise model needs at least one sensor".into()));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "noise variances must be positive and finite".into(),
            ));
        }
        let sigma_min_sq = variances.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(NoiseModel {
            variances,
            sigma_min_sq,
        })
    }

    /// Same variance `sigma^2` for all `d` sensors.
    pub fn uniform(d: usize, sigma: f64) -> Result<Self> {
        NoiseModel::new(DVector::from_element(d, sigma * sigma))
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.variances[i]
    }

    pub fn sigma_min_sq(&self) -> f64 {
        self.sigma_min_sq
    }
}

/// An ordered set of `r` distinct candidate-sensor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    indices: Vec<usize>,
}

impl Design {
    /// Build a design over `candidate_count` sensors; indices are sorted and
    /// must be distinct and in range.
    pub fn new(mut indices: Vec<usize>, candidate_count: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidDesign("design must select at least one sensor".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDesign(format!(
                "duplicate sensor index in {indices:?}"
            )));
        }
        if *indices.last().unwrap() >= candidate_count {
            return Err(Error::InvalidDesign(format!(
                "index {} out of range for {} candidates",
                indices.last().unwrap(),
                candidate_count
            )));
        }
        Ok(Design { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// New design with `old` replaced by `new` (re-sorted).
    pub fn swapped(&self, old: usize, new: usize, candidate_count: usize) -> Result<Design> {
        let mut idx: Vec<usize> = self
            .indices
            .iter()
            .cloned()
            .filter(|&i| i != old)
            .collect();
        if idx.len() != self.indices.len() - 1 {
            return Err(Error::InvalidDesign(format!(
                "sensor {old} is not part of the design"
            )));
        }
        idx.push(new);
        Design::new(idx, candidate_count)
    }
}

/// The `(F, Γ_n, prior)` bundle for the full candidate set.
#[derive(Clone)]
pub struct LinearModel {
    pub forward: OperatorHandle,
    pub noise: NoiseModel,
    pub prior: GaussianPrior,
}

impl LinearModel {
    pub fn new(forward: OperatorHandle, noise: NoiseModel, prior: GaussianPrior) -> Result<Self> {
        if forward.range_dim() != noise.len() {
            return Err(Error::DimensionMismatch(format!(
                "forward range {} vs noise sensors {}",
                forward.range_dim(),
                noise.len()
            )));
        }
        if forward.domain_dim() != prior.dim() {
            return Err(Error::DimensionMismatch(format!(
                "forward domain {} vs prior dim {}",
                forward.domain_dim(),
                prior.dim()
            )));
        }
        Ok(LinearModel {
            forward,
            noise,
            prior,
        })
    }

    pub fn parameter_dim(&self) -> usize {
        self.forward.domain_dim()
    }

    pub fn candidate_count(&self) -> usize {
        self.forward.range_dim()
    }
}

/// QoI prior covariance `Σ = P Γ P*`, assembled column-by-column.
///
/// The result is symmetrized; entries must be finite.
pub fn compute_sigma_pr(goal: &OperatorHandle, prior: &GaussianPrior) -> Result<DMatrix<f64>> {
    if goal.domain_dim() != prior.dim() {
        return Err(Error::DimensionMismatch(format!(
            "goal domain {} vs prior dim {}",
            goal.domain_dim(),
            prior.dim()
        )));
    }
    let d_rho = goal.range_dim();
    let mut sigma = DMatrix::<f64>::zeros(d_rho, d_rho);
    for j in 0..d_rho {
        let mut e = DVector::zeros(d_rho);
        e[j] = 1.0;
        let col = goal.apply(&prior.cov_apply(&goal.apply_adjoint(&e)));
        sigma.set_column(j, &col);
    }
    linalg::ensure_finite(&sigma, "sigma_pr assembly")?;
    linalg::symmetrize(&mut sigma);
    Ok(sigma)
}

/// Goal map plus the factorized (jittered) QoI prior covariance.
pub struct GoalSetup {
    goal: OperatorHandle,
    sigma_pr: DMatrix<f64>,
    sigma_sqrt: DMatrix<f64>,
    sigma_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GoalSetup {
    /// Assemble `Σ = P Γ P*`, add the relative jitter `1e-12·trace/d_rho` to
    /// the diagonal, and factorize. Indefiniteness after jitter is a
    /// model-configuration error.
    pub fn new(goal: OperatorHandle, prior: &GaussianPrior) -> Result<Self> {
        let mut sigma_pr = compute_sigma_pr(&goal, prior)?;
        let d_rho = sigma_pr.nrows();
        let jitter = 1e-12 * sigma_pr.trace() / d_rho as f64;
        for i in 0..d_rho {
            sigma_pr[(i, i)] += jitter;
        }
        let sigma_chol = nalgebra::Cholesky::new(sigma_pr.clone()).ok_or(Error::ModelConfig(
            "QoI prior covariance is indefinite after jitter".into(),
        ))?;
        let sigma_sqrt = linalg::symmetric_sqrt(&sigma_pr);
        Ok(GoalSetup {
            goal,
            sigma_pr,
            sigma_sqrt,
            sigma_chol,
        })
    }

    pub fn goal(&self) -> &OperatorHandle {
        &self.goal
    }

    pub fn qoi_dim(&self) -> usize {
        self.goal.range_dim()
    }

    pub fn sigma_pr(&self) -> &DMatrix<f64> {
        &self.sigma_pr
    }

    pub fn sigma_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_sqrt
    }

    /// `Σ⁻¹ v` via the cached factorization.
    pub fn sigma_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.sigma_chol.solve(v)
    }
}

/// Densely assembled design-independent matrices.
#[derive(Debug, Clone)]
pub struct OfflineMatrices {
    pub h_d: DMatrix<f64>,
    pub h_d_rho: DMatrix<f64>,
    pub delta_h_d: DMatrix<f64>,
}

/// Truncated spectral factors for the low-rank mode.
#[derive(Debug, Clone)]
pub struct OfflineFactors {
    /// `(U_k, ζ)` of `Hᵨ`.
    pub h_rho: SpectralFactor,
    /// `(V_l, λ)` of `ΔH`.
    pub delta_h: SpectralFactor,
    /// Extended spectrum estimates beyond the truncation ranks (includes the
    /// oversampled Ritz values); used as tail surrogates by the error bound.
    pub h_rho_spectrum_est: Vec<f64>,
    pub delta_h_spectrum_est: Vec<f64>,
}

/// Offline data in either assembly mode.
#[derive(Debug, Clone)]
pub enum OfflineData {
    Exact(OfflineMatrices),
    LowRank(OfflineFactors),
}

impl OfflineData {
    pub fn candidate_count(&self) -> usize {
        match self {
            OfflineData::Exact(m) => m.h_d.nrows(),
            OfflineData::LowRank(f) => f.h_rho.source_dim(),
        }
    }
}

/// Operator applications consumed by an offline assembly.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyReport {
    pub forward_applies: u64,
    pub adjoint_applies: u64,
    pub goal_applies: u64,
    pub goal_adjoint_applies: u64,
}

/// Low-rank assembly plan: randomized eigensolver configuration per operator
/// plus the truncation tolerances of the spectral cut-offs.
#[derive(Debug, Clone)]
pub struct LowRankPlan {
    pub h_rho: RandEigConfig,
    pub delta_h: RandEigConfig,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone)]
pub enum AssemblyMode {
    Exact,
    LowRank(LowRankPlan),
}

/// Build the design-independent matrices `H`, `Hᵨ`, `ΔH` (exact mode) or
/// their truncated spectral factors (low-rank mode), reporting the operator
/// applications consumed.
pub fn assemble_offline(
    model: &LinearModel,
    goal: &GoalSetup,
    mode: &AssemblyMode,
    limits: &Limits,
) -> Result<(OfflineData, AssemblyReport)> {
    if goal.goal().domain_dim() != model.parameter_dim() {
        return Err(Error::DimensionMismatch(format!(
            "goal domain {} vs model parameter dim {}",
            goal.goal().domain_dim(),
            model.parameter_dim()
        )));
    }
    let before = snapshot(model, goal);
    let data = match mode {
        AssemblyMode::Exact => OfflineData::Exact(assemble_exact(model, goal, limits)?),
        AssemblyMode::LowRank(plan) => OfflineData::LowRank(assemble_lowrank(model, goal, plan)?),
    };
    let after = snapshot(model, goal);
    let report = AssemblyReport {
        forward_applies: after.0 - before.0,
        adjoint_applies: after.1 - before.1,
        goal_applies: after.2 - before.2,
        goal_adjoint_applies: after.3 - before.3,
    };
    Ok((data, report))
}

fn snapshot(model: &LinearModel, goal: &GoalSetup) -> (u64, u64, u64, u64) {
    (
        model.forward.forward_count(),
        model.forward.adjoint_count(),
        goal.goal().forward_count(),
        goal.goal().adjoint_count(),
    )
}

fn assemble_exact(
    model: &LinearModel,
    goal: &GoalSetup,
    limits: &Limits,
) -> Result<OfflineMatrices> {
    let d = model.candidate_count();
    if d > limits.dense_assembly {
        return Err(Error::DenseLimitExceeded {
            what: "candidate sensors (exact assembly)",
            value: d,
            limit: limits.dense_assembly,
        });
    }
    let d_rho = goal.qoi_dim();
    let mut h_d = DMatrix::<f64>::zeros(d, d);
    // g = P Γ F* applied to the sensor basis, columns of a d_rho × d matrix
    let mut g = DMatrix::<f64>::zeros(d_rho, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        let y = model.prior.cov_apply(&model.forward.apply_adjoint(&e));
        h_d.set_column(j, &model.forward.apply(&y));
        g.set_column(j, &goal.goal().apply(&y));
    }
    linalg::ensure_finite(&h_d, "H assembly")?;
    linalg::symmetrize(&mut h_d);

    // Hᵨ = gᵀ Σ⁻¹ g
    let mut sig_inv_g = DMatrix::<f64>::zeros(d_rho, d);
    for j in 0..d {
        sig_inv_g.set_column(j, &goal.sigma_solve(&DVector::from(g.column(j))));
    }
    let mut h_d_rho = g.tr_mul(&sig_inv_g);
    linalg::ensure_finite(&h_d_rho, "H_rho assembly")?;
    linalg::symmetrize(&mut h_d_rho);

    let mut delta_h_d = &h_d - &h_d_rho;
    linalg::symmetrize(&mut delta_h_d);
    Ok(OfflineMatrices {
        h_d,
        h_d_rho,
        delta_h_d,
    })
}

fn assemble_lowrank(
    model: &LinearModel,
    goal: &GoalSetup,
    plan: &LowRankPlan,
) -> Result<OfflineFactors> {
    let d = model.candidate_count();

    // Hᵨ v = F Γ P* Σ⁻¹ P Γ F* v
    let h_rho_action = |v: &DVector<f64>| -> DVector<f64> {
        let b = model.prior.cov_apply(&model.forward.apply_adjoint(v));
        let c = goal.sigma_solve(&goal.goal().apply(&b));
        model
            .forward
            .apply(&model.prior.cov_apply(&goal.goal().apply_adjoint(&c)))
    };
    let rho_out = randomized_eig(&h_rho_action, d, &plan.h_rho)?;

    // ΔH v = F Γ F* v − Hᵨ v, sharing the adjoint-and-prior leg
    let delta_action = |v: &DVector<f64>| -> DVector<f64> {
        let b = model.prior.cov_apply(&model.forward.apply_adjoint(v));
        let h_v = model.forward.apply(&b);
        let c = goal.sigma_solve(&goal.goal().apply(&b));
        let r_v = model
            .forward
            .apply(&model.prior.cov_apply(&goal.goal().apply_adjoint(&c)));
        h_v - r_v
    };
    let delta_out = randomized_eig(&delta_action, d, &plan.delta_h)?;

    let h_rho_spectrum_est = rho_out.factor.eigenvalues().as_slice().to_vec();
    let delta_h_spectrum_est = delta_out.factor.eigenvalues().as_slice().to_vec();
    Ok(OfflineFactors {
        h_rho: truncate_by_tolerance(&rho_out.factor, plan.tolerances.eps_zeta),
        delta_h: truncate_by_tolerance(&delta_out.factor, plan.tolerances.eps_lambda),
        h_rho_spectrum_est,
        delta_h_spectrum_est,
    })
}

/// Effective-noise covariance `Γ_η(W) = W (Γ_n + ΔH) Wᵀ` for a design,
/// realized as sub-matrix extraction (exact) or `diag + V Λ Vᵀ` compression
/// (low rank).
pub fn gamma_eta(offline: &OfflineData, noise: &NoiseModel, design: &Design) -> DMatrix<f64> {
    let idx = design.indices();
    let r = idx.len();
    let mut out = DMatrix::<f64>::zeros(r, r);
    match offline {
        OfflineData::Exact(m) => {
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[(a, b)] = m.delta_h_d[(i, j)];
                }
            }
        }
        OfflineData::LowRank(f) => {
            let v_sel = f.delta_h.selected_rows(idx);
            let lam = f.delta_h.eigenvalues();
            for a in 0..r {
                for b in 0..r {
                    let mut s = 0.0;
                    for (t, &l) in lam.iter().enumerate() {
                        s += v_sel[(a, t)] * l * v_sel[(b, t)];
                    }
                    out[(a, b)] = s;
                }
            }
        }
    }
    for (a, &i) in idx.iter().enumerate() {
        out[(a, a)] += noise.variance(i);
    }
    linalg::symmetrize(&mut out);
    out
}

/// `W Hᵨ Wᵀ` for a design, from either representation.
pub(crate) fn h_rho_submatrix(offline: &OfflineData, design: &Design) -> DMatrix<f64> {
    let idx = design.indices();
    let r = idx.len();
    let mut out = DMatrix::<f64>::zeros(r, r);
    match offline {
        OfflineData::Exact(m) => {
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[(a, b)] = m.h_d_rho[(i, j)];
                }
            }
        }
        OfflineData::LowRank(f) => {
            let u_sel = f.h_rho.selected_rows(idx);
            let z = f.h_rho.eigenvalues();
            for a in 0..r {
                for b in 0..r {
                    let mut s = 0.0;
                    for (t, &zt) in z.iter().enumerate() {
                        s += u_sel[(a, t)] * zt * u_sel[(b, t)];
                    }
                    out[(a, b)] = s;
                }
            }
        }
    }
    linalg::symmetrize(&mut out);
    out
}

/// Dense `r × d_m` matrix whose rows are the selected rows of `F`, obtained
/// via adjoint applications.
pub(crate) fn dense_forward_rows(model: &LinearModel, design: &Design) -> DMatrix<f64> {
    let d = model.candidate_count();
    let d_m = model.parameter_dim();
    let mut rows = DMatrix::<f64>::zeros(design.size(), d_m);
    for (a, &i) in design.indices().iter().enumerate() {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        let row = model.forward.apply_adjoint(&e);
        rows.set_row(a, &row.transpose());
    }
    rows
}

/// Dense prior covariance, one `cov_apply` per basis vector.
pub(crate) fn dense_prior_cov(prior: &GaussianPrior) -> DMatrix<f64> {
    let n = prior.dim();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        cov.set_column(j, &prior.cov_apply(&e));
    }
    linalg::symmetrize(&mut cov);
    cov
}

/// Dense goal map `P` (d_rho × d_m), rows via adjoint applications.
pub(crate) fn dense_goal_matrix(goal: &OperatorHandle) -> DMatrix<f64> {
    let d_rho = goal.range_dim();
    let d_m = goal.domain_dim();
    let mut p = DMatrix::<f64>::zeros(d_rho, d_m);
    for i in 0..d_rho {
        let mut e = DVector::zeros(d_rho);
        e[i] = 1.0;
        p.set_row(i, &goal.apply_adjoint(&e).transpose());
    }
    p
}

/// Dense posterior precision `H_m + Γ⁻¹` restricted to the design's rows,
/// assembled matrix-free column by column.
fn posterior_precision(
    model: &LinearModel,
    design: &Design,
    limits: &Limits,
) -> Result<DMatrix<f64>> {
    let d_m = model.parameter_dim();
    if d_m > limits.posterior_solve {
        return Err(Error::DenseLimitExceeded {
            what: "parameter dimension (posterior solve)",
            value: d_m,
            limit: limits.posterior_solve,
        });
    }
    let d = model.candidate_count();
    let mut prec = DMatrix::<f64>::zeros(d_m, d_m);
    for j in 0..d_m {
        let mut e = DVector::zeros(d_m);
        e[j] = 1.0;
        let y = model.forward.apply(&e);
        // Wᵀ Γ_n(W)⁻¹ W y: select, scale, scatter
        let mut scattered = DVector::<f64>::zeros(d);
        for &i in design.indices() {
            scattered[i] = y[i] / model.noise.variance(i);
        }
        let hm_col = model.forward.apply_adjoint(&scattered);
        let prec_col = model.prior.precision_apply(&e).ok_or(Error::ModelConfig(
            "prior precision action required for posterior statistics".into(),
        ))?;
        prec.set_column(j, &(hm_col + prec_col));
    }
    linalg::symmetrize(&mut prec);
    Ok(prec)
}

/// Posterior mean for observed `data` at the selected sensors: the solution
/// of `(H_m + Γ⁻¹) m = F* Γ_n⁻¹ y + Γ⁻¹ m_pr`.
pub fn posterior_mean(
    model: &LinearModel,
    design: &Design,
    data: &DVector<f64>,
    limits: &Limits,
) -> Result<DVector<f64>> {
    if data.len() != design.size() {
        return Err(Error::DimensionMismatch(format!(
            "data length {} vs design size {}",
            data.len(),
            design.size()
        )));
    }
    let d = model.candidate_count();
    let prec = posterior_precision(model, design, limits)?;

    let mut scattered = DVector::<f64>::zeros(d);
    for (a, &i) in design.indices().iter().enumerate() {
        scattered[i] = data[a] / model.noise.variance(i);
    }
    let rhs = model.forward.apply_adjoint(&scattered)
        + model
            .prior
            .precision_apply(model.prior.mean())
            .ok_or(Error::ModelConfig(
                "prior precision action required for posterior statistics".into(),
            ))?;

    let chol = nalgebra::Cholesky::new(prec.clone())
        .ok_or(Error::SingularSystem("posterior precision".into()))?;
    let mean = chol.solve(&rhs);
    let residual = (&prec * &mean - &rhs).norm();
    if residual > 1e-8 * rhs.norm() {
        return Err(Error::Numeric(format!(
            "posterior mean residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(mean)
}

/// Diagonal of the posterior covariance `(H_m + Γ⁻¹)⁻¹`.
pub fn posterior_pointwise_variance(
    model: &LinearModel,
    design: &Design,
    limits: &Limits,
) -> Result<DVector<f64>> {
    let prec = posterior_precision(model, design, limits)?;
    let chol = nalgebra::Cholesky::new(prec)
        .ok_or(Error::SingularSystem("posterior precision".into()))?;
    let inv = chol.inverse();
    Ok(DVector::from_fn(inv.nrows(), |i, _| inv[(i, i)]))
}
