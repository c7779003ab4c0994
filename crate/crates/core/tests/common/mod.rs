//! Seeded random linear-Gaussian instances shared by the integration tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use goed_core::{
    assemble_offline, AssemblyMode, DenseCovariance, DenseOperator, EigEvaluator, GaussianPrior,
    GoalSetup, Limits, LinearModel, NoiseModel, OfflineData, OperatorHandle,
};

// Not every test binary touches every field.
#[allow(dead_code)]
pub struct Instance {
    pub model: LinearModel,
    pub goal: GoalSetup,
    pub offline: OfflineData,
    pub evaluator: EigEvaluator,
}

pub fn random_matrix(r: usize, c: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| -> f64 { StandardNormal.sample(rng) })
}

pub fn random_spd(n: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let g = random_matrix(n, n, rng);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5
}

/// Dense seeded instance with moderate noise so EIG values are O(1).
pub fn build_instance(d_m: usize, d: usize, d_rho: usize, seed: u64) -> Instance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let f = random_matrix(d, d_m, &mut rng) / (d_m as f64).sqrt();
    let cov = random_spd(d_m, &mut rng);
    let p = random_matrix(d_rho, d_m, &mut rng) / (d_m as f64).sqrt();
    let vars = DVector::from_fn(d, |i, _| 0.05 + 0.01 * (i % 5) as f64);

    let prior = GaussianPrior::new(
        DVector::zeros(d_m),
        Arc::new(DenseCovariance::new(cov).unwrap()),
    );
    let model = LinearModel::new(
        OperatorHandle::new(DenseOperator::new(f)),
        NoiseModel::new(vars).unwrap(),
        prior.clone(),
    )
    .unwrap();
    let goal = GoalSetup::new(OperatorHandle::new(DenseOperator::new(p)), &prior).unwrap();
    let (offline, _) =
        assemble_offline(&model, &goal, &AssemblyMode::Exact, &Limits::default()).unwrap();
    let evaluator = EigEvaluator::new(offline.clone(), model.noise.clone()).unwrap();
    Instance {
        model,
        goal,
        offline,
        evaluator,
    }
}

/// All r-subsets of 0..d in lexicographic order.
pub fn all_designs(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut pos = r;
        while pos > 0 && idx[pos - 1] == d - r + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for q in pos..r {
            idx[q] = idx[q - 1] + 1;
        }
    }
    out
}
