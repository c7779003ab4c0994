//! Expected-information-gain evaluation.
//!
//! Three routes compute the goal-oriented EIG `Ψᵨ(W)`:
//!
//! * `eig_goal_direct` — the QoI-space formula
//!   `1/2 logdet(I_ρ + Σ^{1/2} H_mᵨ(W) Σ^{1/2})`, assembled densely from the
//!   model operators. Slow, design-dependent model solves; this is the
//!   verification oracle.
//! * `eig_goal_online` — the data-space formula
//!   `1/2 logdet(I_r + Lᵀ W Hᵨ Wᵀ L)` with `Γ_η⁻¹ = L Lᵀ`, evaluated from
//!   the exact offline matrices with `r × r` work and no model solves.
//! * `eig_goal_approx` — the same formula on truncated spectral factors.
//!
//! The evaluator caches values per design and counts distinct evaluations.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lowrank::dense_eig_reference;
use crate::model::{
    dense_forward_rows, dense_goal_matrix, dense_prior_cov, gamma_eta, h_rho_submatrix, Design,
    GoalSetup, LinearModel, Limits, NoiseModel, OfflineData,
};

/// `log det M` for a symmetric positive definite matrix, via Cholesky.
pub fn logdet_psd(m: &DMatrix<f64>) -> Result<f64> {
    let l = linalg::cholesky_lower(m)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Whitening factor `L` with `L Lᵀ = M⁻¹`, built from triangular solves
/// against the Cholesky factor of `M` (no explicit inverse of `M`).
pub struct CholeskyWhitener {
    factor: DMatrix<f64>,
}

impl CholeskyWhitener {
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `Lᵀ A L` for symmetric `A`, symmetrized.
    pub fn whiten(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.factor.tr_mul(a) * &self.factor;
        linalg::symmetrize(&mut out);
        out
    }
}

/// Factor `M⁻¹ = L Lᵀ` from the lower Cholesky factor `R` of `M`, with
/// `L = R⁻ᵀ` obtained by a triangular solve.
pub fn inv_cholesky_factor(m: &DMatrix<f64>) -> Result<CholeskyWhitener> {
    let r = linalg::cholesky_lower(m)?;
    let n = r.nrows();
    let factor = r
        .transpose()
        .solve_upper_triangular(&DMatrix::<f64>::identity(n, n))
        .ok_or(Error::SingularSystem("whitening factor".into()))?;
    Ok(CholeskyWhitener { factor })
}

/// Offline-backed EIG evaluator with a per-design cache and an evaluation
/// counter (one increment per distinct design evaluated).
pub struct EigEvaluator {
    offline: OfflineData,
    noise: NoiseModel,
    evals: AtomicU64,
    cache: Mutex<HashMap<Vec<usize>, f64>>,
}

impl EigEvaluator {
    pub fn new(offline: OfflineData, noise: NoiseModel) -> Result<Self> {
        if offline.candidate_count() != noise.len() {
            return Err(Error::DimensionMismatch(format!(
                "offline candidate count {} vs noise sensors {}",
                offline.candidate_count(),
                noise.len()
            )));
        }
        Ok(EigEvaluator {
            offline,
            noise,
            evals: AtomicU64::new(0),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.offline.candidate_count()
    }

    pub fn offline(&self) -> &OfflineData {
        &self.offline
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn is_low_rank(&self) -> bool {
        matches!(self.offline, OfflineData::LowRank(_))
    }

    /// Number of distinct designs whose EIG has been computed.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Goal-oriented EIG for a design: online formula in exact mode, the
    /// low-rank approximation otherwise. Cached values are returned bitwise.
    pub fn evaluate(&self, design: &Design) -> Result<f64> {
        let key = design.indices().to_vec();
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let value = self
            .compute(design)
            .map_err(|e| e.for_design(design.indices()))?;
        let mut cache = self.cache.lock().unwrap();
        if !cache.contains_key(&key) {
            cache.insert(key, value);
            self.evals.fetch_add(1, Ordering::Relaxed);
        }
        Ok(value)
    }

    fn compute(&self, design: &Design) -> Result<f64> {
        let geta = gamma_eta(&self.offline, &self.noise, design);
        let whitener = inv_cholesky_factor(&geta)?;
        let compressed = h_rho_submatrix(&self.offline, design);
        let r = design.size();
        let inner = DMatrix::<f64>::identity(r, r) + whitener.whiten(&compressed);
        Ok(0.5 * logdet_psd(&inner)?)
    }

    /// Basis whose row norms are the leverage scores used for design
    /// initialization: `U_k` in low-rank mode, the numerically nonzero
    /// eigenvectors of `Hᵨ` in exact mode.
    pub fn leverage_basis(&self) -> Result<DMatrix<f64>> {
        match &self.offline {
            OfflineData::LowRank(f) => Ok(f.h_rho.basis().clone()),
            OfflineData::Exact(m) => {
                let factor = dense_eig_reference(&m.h_d_rho)?;
                let top = factor.eigenvalues()[0].max(0.0);
                let keep = factor
                    .eigenvalues()
                    .iter()
                    .take_while(|&&v| v > 1e-12 * top)
                    .count()
                    .max(1);
                Ok(factor.basis().columns(0, keep).into_owned())
            }
        }
    }
}

/// Parameter-space EIG `Ψ(W)` in its data-space form
/// `1/2 logdet(I_r + Γ_n^{-1/2} W H Wᵀ Γ_n^{-1/2})` (exact mode only).
pub fn eig_parameter(evaluator: &EigEvaluator, design: &Design) -> Result<f64> {
    let OfflineData::Exact(m) = &evaluator.offline else {
        return Err(Error::ModelConfig(
            "parameter-space EIG needs the exact offline matrices".into(),
        ));
    };
    let idx = design.indices();
    let r = idx.len();
    let mut inner = DMatrix::<f64>::identity(r, r);
    for a in 0..r {
        for b in 0..r {
            let scale =
                (evaluator.noise.variance(idx[a]) * evaluator.noise.variance(idx[b])).sqrt();
            inner[(a, b)] += m.h_d[(idx[a], idx[b])] / scale;
        }
    }
    linalg::symmetrize(&mut inner);
    Ok(0.5 * logdet_psd(&inner)?)
}

/// Goal-oriented EIG through the offline-online decomposition (exact mode).
pub fn eig_goal_online(evaluator: &EigEvaluator, design: &Design) -> Result<f64> {
    if evaluator.is_low_rank() {
        return Err(Error::ModelConfig(
            "online EIG needs exact offline matrices; use eig_goal_approx".into(),
        ));
    }
    evaluator.evaluate(design)
}

/// Goal-oriented EIG from truncated spectral factors (low-rank mode).
pub fn eig_goal_approx(evaluator: &EigEvaluator, design: &Design) -> Result<f64> {
    if !evaluator.is_low_rank() {
        return Err(Error::ModelConfig(
            "approximate EIG needs low-rank offline factors; use eig_goal_online".into(),
        ));
    }
    evaluator.evaluate(design)
}

/// Goal-oriented EIG assembled densely from the model operators — the
/// independent verification route for the offline-online path. Consumes
/// model solves; gated by the dense-assembly limit on the parameter
/// dimension.
pub fn eig_goal_direct(
    model: &LinearModel,
    goal: &GoalSetup,
    design: &Design,
    limits: &Limits,
) -> Result<f64> {
    let d_m = model.parameter_dim();
    if d_m > limits.posterior_solve {
        return Err(Error::DenseLimitExceeded {
            what: "parameter dimension (direct EIG)",
            value: d_m,
            limit: limits.posterior_solve,
        });
    }
    let d_rho = goal.qoi_dim();
    let r = design.size();

    let f_rows = dense_forward_rows(model, design); // r × d_m
    let cov = dense_prior_cov(&model.prior); // d_m × d_m
    let p = dense_goal_matrix(goal.goal()); // d_rho × d_m

    // Γ_η(W) = W Γ_n Wᵀ + F_W (Γ − Γ Pᵀ Σ⁻¹ P Γ) F_Wᵀ
    let p_cov = &p * &cov; // d_rho × d_m
    let mut sig_inv_pcov = DMatrix::<f64>::zeros(d_rho, d_m);
    for j in 0..d_m {
        sig_inv_pcov.set_column(j, &goal.sigma_solve(&DVector::from(p_cov.column(j))));
    }
    let reduced = &cov - p_cov.tr_mul(&sig_inv_pcov); // Γ − Γ Pᵀ Σ⁻¹ P Γ
    let mut geta = &f_rows * reduced * f_rows.transpose();
    for (a, &i) in design.indices().iter().enumerate() {
        geta[(a, a)] += model.noise.variance(i);
    }
    linalg::symmetrize(&mut geta);

    // H_mᵨ(W) = (F_W P†)ᵀ Γ_η⁻¹ (F_W P†) with P† = Γ Pᵀ Σ⁻¹
    let fw_pdag = &f_rows * sig_inv_pcov.transpose(); // r × d_rho
    let geta_chol = nalgebra::Cholesky::new(geta)
        .ok_or(Error::NotPositiveDefinite { minor: 0 })?;
    let mut solved = DMatrix::<f64>::zeros(r, d_rho);
    for j in 0..d_rho {
        solved.set_column(j, &geta_chol.solve(&DVector::from(fw_pdag.column(j))));
    }
    let h_m_rho = fw_pdag.tr_mul(&solved);

    let sqrt = goal.sigma_sqrt();
    let mut inner = DMatrix::<f64>::identity(d_rho, d_rho) + sqrt * h_m_rho * sqrt;
    linalg::symmetrize(&mut inner);
    Ok(0.5 * logdet_psd(&inner)?)
}
