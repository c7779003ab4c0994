//! Matrix-free randomized symmetric eigendecomposition and the a-posteriori
//! EIG approximation error bound.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// Orthonormal basis with its (nonincreasing) spectrum.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    source_dim: usize,
}

impl SpectralFactor {
    pub fn new(basis: DMatrix<f64>, eigenvalues: DVector<f64>) -> Result<Self> {
        if basis.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis columns {} vs eigenvalue count {}",
                basis.ncols(),
                eigenvalues.len()
            )));
        }
        if eigenvalues
            .as_slice()
            .windows(2)
            .any(|w| w[1] > w[0] + 1e-12)
        {
            return Err(Error::InvalidInput(
                "spectral factor eigenvalues must be nonincreasing".into(),
            ));
        }
        let source_dim = basis.nrows();
        Ok(SpectralFactor {
            basis,
            eigenvalues,
            source_dim,
        })
    }

    /// Factor of rank zero (valid: reconstructs the zero operator).
    pub fn empty(source_dim: usize) -> Self {
        SpectralFactor {
            basis: DMatrix::zeros(source_dim, 0),
            eigenvalues: DVector::zeros(0),
            source_dim,
        }
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Rows of the basis at the given indices (`r × rank`).
    pub fn selected_rows(&self, indices: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(indices.len(), self.rank());
        for (a, &i) in indices.iter().enumerate() {
            for j in 0..self.rank() {
                out[(a, j)] = self.basis[(i, j)];
            }
        }
        out
    }

    /// Dense reconstruction `U Λ Uᵀ` (oracle use at desk scale).
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eigenvalues[j];
        }
        scaled * self.basis.transpose()
    }

    /// Max deviation of `basisᵀ basis` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.basis.tr_mul(&self.basis);
        (gram - DMatrix::identity(self.rank(), self.rank())).amax()
    }
}

/// Configuration for the randomized eigensolver.
#[derive(Debug, Clone)]
pub struct RandEigConfig {
    pub target_rank: usize,
    /// Extra sketch columns beyond the target rank.
    pub oversampling: usize,
    /// Subspace (power) iterations applied to the sketch before projection.
    pub power_iterations: usize,
    pub seed: u64,
}

impl RandEigConfig {
    pub fn new(target_rank: usize, seed: u64) -> Self {
        RandEigConfig {
            target_rank,
            oversampling: 10,
            power_iterations: 1,
            seed,
        }
    }
}

/// Spectral truncation tolerances for the two offline operators.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub eps_zeta: f64,
    pub eps_lambda: f64,
}

impl Tolerances {
    pub fn new(eps_zeta: f64, eps_lambda: f64) -> Result<Self> {
        if eps_zeta < 0.0 || eps_lambda < 0.0 {
            return Err(Error::InvalidInput("tolerances must be nonnegative".into()));
        }
        Ok(Tolerances {
            eps_zeta,
            eps_lambda,
        })
    }

    /// Keep everything the sketch resolves.
    pub fn none() -> Self {
        Tolerances {
            eps_zeta: 0.0,
            eps_lambda: 0.0,
        }
    }
}

/// Result of a randomized eigendecomposition.
#[derive(Debug, Clone)]
pub struct RandEigOutcome {
    pub factor: SpectralFactor,
    /// Operator actions consumed: `(2 + power_iterations) · (k + p)`.
    pub operator_applies: usize,
    /// The sketch had numerical rank below the target rank. The factor still
    /// carries `target_rank` (clamped) eigenpairs; trailing ones are noise.
    pub rank_deficient: bool,
}

fn gaussian_sketch(dim: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    // Standard normal entries from ChaCha20, filled column-major so the
    // sketch is reproducible across platforms for a given seed.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut omega = DMatrix::<f64>::zeros(dim, cols);
    for j in 0..cols {
        for i in 0..dim {
            omega[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    omega
}

fn apply_columns<F>(action: &F, block: &DMatrix<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut out = DMatrix::<f64>::zeros(block.nrows(), block.ncols());
    for j in 0..block.ncols() {
        let col = action(&DVector::from(block.column(j)));
        out.set_column(j, &col);
    }
    out
}

/// Randomized eigendecomposition of a symmetric PSD operator given by its
/// action on vectors: sketch, optional subspace iterations, orthonormalize,
/// project, and solve the small eigenproblem. Negative Ritz values are
/// clamped to zero.
pub fn randomized_eig<F>(action: &F, dim: usize, cfg: &RandEigConfig) -> Result<RandEigOutcome>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if cfg.target_rank == 0 {
        return Err(Error::InvalidInput("target rank must be positive".into()));
    }
    let sketch_cols = cfg.target_rank + cfg.oversampling;
    if sketch_cols > dim {
        return Err(Error::InvalidInput(format!(
            "target rank {} + oversampling {} exceeds dimension {}",
            cfg.target_rank, cfg.oversampling, dim
        )));
    }

    let omega = gaussian_sketch(dim, sketch_cols, cfg.seed);
    let mut y = apply_columns(action, &omega);
    let mut applies = sketch_cols;
    for _ in 0..cfg.power_iterations {
        let q = y.qr().q();
        y = apply_columns(action, &q);
        applies += sketch_cols;
    }
    let qr = y.qr();
    let r_diag_max = (0..sketch_cols)
        .map(|i| qr.r()[(i, i)].abs())
        .fold(0.0f64, f64::max);
    let numerical_rank = (0..sketch_cols)
        .filter(|&i| qr.r()[(i, i)].abs() > 1e-13 * r_diag_max)
        .count();
    let rank_deficient = numerical_rank < cfg.target_rank || r_diag_max == 0.0;
    let q = qr.q();

    let hq = apply_columns(action, &q);
    applies += sketch_cols;
    let mut b = q.tr_mul(&hq);
    linalg::ensure_finite(&b, "randomized eig projection")?;
    linalg::symmetrize(&mut b);

    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..sketch_cols).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let keep = cfg.target_rank.min(numerical_rank.max(1));
    let mut basis = DMatrix::<f64>::zeros(dim, keep);
    let mut values = DVector::<f64>::zeros(keep);
    for (out_j, &src_j) in order.iter().take(keep).enumerate() {
        let dir = &q * DVector::from(eig.eigenvectors.column(src_j));
        basis.set_column(out_j, &dir);
        values[out_j] = eig.eigenvalues[src_j].max(0.0);
    }
    Ok(RandEigOutcome {
        factor: SpectralFactor::new(basis, values)?,
        operator_applies: applies,
        rank_deficient,
    })
}

/// Keep the eigenpairs with eigenvalue `>= eps` (rank zero is a valid
/// outcome).
pub fn truncate_by_tolerance(factor: &SpectralFactor, eps: f64) -> SpectralFactor {
    let keep = factor
        .eigenvalues()
        .iter()
        .take_while(|&&v| v >= eps)
        .count();
    if keep == factor.rank() {
        return factor.clone();
    }
    let basis = factor.basis().columns(0, keep).into_owned();
    let values = DVector::from_fn(keep, |i, _| factor.eigenvalues()[i]);
    SpectralFactor {
        basis,
        eigenvalues: values,
        source_dim: factor.source_dim(),
    }
}

/// A-posteriori bound on `|Ψᵨ − Ψ̂ᵨ|` for truncation ranks `(k, l)`:
///
/// ```text
/// 1/2 Σ_{i>k} log(1 + ζ_i/σ²min)  +  1/2 Σ_{i=l+1}^{min(l+k, d)} log(1 + λ_i ζ_1/σ⁴min).
/// ```
///
/// The second sum carries `k` terms starting at `λ_{l+1}`: the compressed
/// tail factor pairs with a projector of rank at most `k`, so `k` terms
/// bound it for every design regardless of the design size.
pub fn eig_error_bound(
    zeta: &[f64],
    lambda: &[f64],
    k: usize,
    l: usize,
    sigma_min_sq: f64,
) -> Result<f64> {
    if !(sigma_min_sq > 0.0) {
        return Err(Error::InvalidInput("sigma_min_sq must be positive".into()));
    }
    validate_spectrum(zeta, "zeta")?;
    validate_spectrum(lambda, "lambda")?;

    let zeta_1 = zeta.first().cloned().unwrap_or(0.0).max(0.0);
    let mut bound = 0.0;
    for &z in zeta.iter().skip(k) {
        bound += 0.5 * (z.max(0.0) / sigma_min_sq).ln_1p();
    }
    let hi = (l + k).min(lambda.len());
    for &lam in lambda.iter().take(hi).skip(l) {
        bound += 0.5 * (lam.max(0.0) * zeta_1 / (sigma_min_sq * sigma_min_sq)).ln_1p();
    }
    Ok(bound)
}

fn validate_spectrum(values: &[f64], name: &str) -> Result<()> {
    if values.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} spectrum has entries below -1e-12 or non-finite"
        )));
    }
    if values.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "{name} spectrum must be nonincreasing"
        )));
    }
    Ok(())
}

/// Full dense symmetric eigendecomposition, sorted nonincreasing. Serves as
/// the oracle for the randomized path and supplies exact bound tails at desk
/// scale. Eigenvalues keep their sign so indefinite inputs reconstruct.
pub fn dense_eig_reference(m: &DMatrix<f64>) -> Result<SpectralFactor> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let scale = m.amax();
    if linalg::symmetry_defect(m) > 1e-8 * scale.max(1.0) {
        return Err(Error::InvalidInput(
            "matrix is not symmetric within 1e-8".into(),
        ));
    }
    let mut sym = m.clone();
    linalg::symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let mut basis = DMatrix::<f64>::zeros(n, n);
    let mut values = DVector::<f64>::zeros(n);
    for (out_j, &src_j) in order.iter().enumerate() {
        basis.set_column(out_j, &eig.eigenvectors.column(src_j));
        values[out_j] = eig.eigenvalues[src_j];
    }
    SpectralFactor::new(basis, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_operator() {
        // v ↦ u ⟨u, v⟩ with ‖u‖ = 2: top eigenvalue 4, basis = ±u/2
        let u = DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        let action = |v: &DVector<f64>| -> DVector<f64> { &u * u.dot(v) };
        let cfg = RandEigConfig {
            target_rank: 3,
            oversampling: 1,
            power_iterations: 1,
            seed: 9,
        };
        let out = randomized_eig(&action, 4, &cfg).unwrap();
        assert!(out.rank_deficient);
        assert!((out.factor.eigenvalues()[0] - 4.0).abs() < 1e-10);
        for i in 1..out.factor.rank() {
            assert!(out.factor.eigenvalues()[i] <= 1e-10);
        }
        let dir = DVector::from(out.factor.basis().column(0));
        assert!((dir.abs() - &u / 2.0).norm() < 1e-8);
    }

    #[test]
    fn diagonal_operator_top_two() {
        let diag = DVector::from_vec(vec![4.0, 1.0, 0.25, 0.0625, 0.015625]);
        let action = |v: &DVector<f64>| -> DVector<f64> { v.component_mul(&diag) };
        let cfg = RandEigConfig {
            target_rank: 2,
            oversampling: 3,
            power_iterations: 1,
            seed: 3,
        };
        let out = randomized_eig(&action, 5, &cfg).unwrap();
        assert!((out.factor.eigenvalues()[0] - 4.0).abs() < 1e-10);
        assert!((out.factor.eigenvalues()[1] - 1.0).abs() < 1e-10);
        for (j, target) in [0usize, 1].into_iter().enumerate() {
            let col = DVector::from(out.factor.basis().column(j));
            let mut e = DVector::zeros(5);
            e[target] = 1.0;
            assert!((col.abs() - e).norm() < 1e-8, "basis column {j} not axis-aligned");
        }
        assert_eq!(out.operator_applies, 3 * 5);
    }

    #[test]
    fn determinism_per_seed() {
        let diag = DVector::from_fn(30, |i, _| 1.0 / (1.0 + i as f64));
        let action = |v: &DVector<f64>| -> DVector<f64> { v.component_mul(&diag) };
        let cfg = RandEigConfig::new(5, 1234);
        let a = randomized_eig(&action, 30, &cfg).unwrap();
        let b = randomized_eig(&action, 30, &cfg).unwrap();
        assert_eq!(a.factor.eigenvalues().as_slice(), b.factor.eigenvalues().as_slice());
        assert_eq!(a.factor.basis().as_slice(), b.factor.basis().as_slice());
        let other = randomized_eig(
            &action,
            30,
            &RandEigConfig::new(5, 77),
        )
        .unwrap();
        assert_ne!(
            a.factor.basis().as_slice(),
            other.factor.basis().as_slice(),
            "different seeds should sketch differently"
        );
    }

    #[test]
    fn orthonormality_after_operations() {
        let diag = DVector::from_fn(40, |i, _| (-(i as f64)).exp());
        let action = |v: &DVector<f64>| -> DVector<f64> { v.component_mul(&diag) };
        let out = randomized_eig(&action, 40, &RandEigConfig::new(8, 5)).unwrap();
        assert!(out.factor.orthonormality_defect() < 1e-10);
        let trunc = truncate_by_tolerance(&out.factor, 1e-3);
        assert!(trunc.orthonormality_defect() < 1e-10);
        assert!(trunc
            .eigenvalues()
            .as_slice()
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn truncation_examples() {
        let basis = DMatrix::<f64>::identity(4, 3);
        let factor =
            SpectralFactor::new(basis, DVector::from_vec(vec![5.0, 2.0, 0.5])).unwrap();
        assert_eq!(truncate_by_tolerance(&factor, 1.0).rank(), 2);
        assert_eq!(truncate_by_tolerance(&factor, 10.0).rank(), 0);
        let unchanged = truncate_by_tolerance(&factor, 0.0);
        assert_eq!(unchanged.rank(), 3);
        assert_eq!(unchanged.eigenvalues().as_slice(), factor.eigenvalues().as_slice());
    }

    #[test]
    fn bound_empty_sums_is_zero() {
        let zeta = vec![3.0, 1.0, 0.5];
        let lambda = vec![2.0, 0.3, 0.1];
        let b = eig_error_bound(&zeta, &lambda, 3, 3, 1.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn bound_hand_value() {
        // ζ = (1, 0.1), λ = (0.5, 0.2), k = 1, l = 0, σ²min = 1:
        // 1/2 ln(1.1) + 1/2 ln(1 + 0.5·1) = 0.2503876...
        let b = eig_error_bound(&[1.0, 0.1], &[0.5, 0.2], 1, 0, 1.0).unwrap();
        assert!((b - 0.250_387_664).abs() < 1e-6, "bound {b}");
    }

    #[test]
    fn bound_decreases_with_noise_floor() {
        let zeta = vec![1.0, 0.1, 0.01];
        let lambda = vec![0.5, 0.2, 0.05];
        let b1 = eig_error_bound(&zeta, &lambda, 1, 0, 1.0).unwrap();
        let b2 = eig_error_bound(&zeta, &lambda, 1, 0, 2.0).unwrap();
        assert!(b2 < b1);
    }

    #[test]
    fn bound_nonincreasing_in_l() {
        let zeta = vec![1.0, 0.5, 0.25, 0.125];
        let lambda = vec![0.8, 0.4, 0.2, 0.1];
        let mut prev = f64::INFINITY;
        for l in 0..=3 {
            let b = eig_error_bound(&zeta, &lambda, 3, l, 0.5).unwrap();
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn bound_rejects_bad_spectra() {
        assert!(eig_error_bound(&[1.0, -1e-6], &[], 0, 0, 1.0).is_err());
        assert!(eig_error_bound(&[0.1, 1.0], &[], 0, 0, 1.0).is_err());
        assert!(eig_error_bound(&[1.0], &[], 0, 0, 0.0).is_err());
    }

    #[test]
    fn dense_reference_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let f = dense_eig_reference(&m).unwrap();
        assert_eq!(f.eigenvalues().as_slice(), &[3.0, 1.0]);

        let z = DMatrix::<f64>::zeros(4, 4);
        let fz = dense_eig_reference(&z).unwrap();
        assert!(fz.eigenvalues().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_reference_reconstructs_random_symmetric() {
        let mut m = DMatrix::from_fn(12, 12, |i, j| ((i * 5 + j * 3) % 13) as f64 / 13.0 - 0.4);
        let mt = m.transpose();
        m = (&m + &mt) * 0.5;
        let f = dense_eig_reference(&m).unwrap();
        assert!((f.reconstruct() - &m).amax() < 1e-10);
        assert!(f.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn dense_reference_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(dense_eig_reference(&m).is_err());
    }
}
