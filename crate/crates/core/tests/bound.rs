//! Validity of the spectral-truncation error bound: for every truncation
//! pair (k, l) with l ≤ k and every design, the approximate EIG stays within
//! the bound of the exact one, and the bound vanishes at full rank.

mod common;

use common::{all_designs, build_instance};
use goed_core::{
    dense_eig_reference, eig_error_bound, eig_goal_approx, eig_goal_online, Design, EigEvaluator,
    OfflineData, SpectralFactor,
};
use nalgebra::{DMatrix, DVector};

/// Clamped PSD spectral factor of a dense symmetric matrix.
fn psd_factor(m: &DMatrix<f64>) -> SpectralFactor {
    let f = dense_eig_reference(m).unwrap();
    let vals = DVector::from_fn(f.rank(), |i, _| f.eigenvalues()[i].max(0.0));
    SpectralFactor::new(f.basis().clone(), vals).unwrap()
}

fn truncated(f: &SpectralFactor, rank: usize) -> SpectralFactor {
    let basis = f.basis().columns(0, rank).into_owned();
    let vals = DVector::from_fn(rank, |i, _| f.eigenvalues()[i]);
    if rank == 0 {
        SpectralFactor::empty(f.source_dim())
    } else {
        SpectralFactor::new(basis, vals).unwrap()
    }
}

#[test]
fn truncation_error_stays_within_bound_for_every_pair() {
    let d = 10usize;
    let r = 3usize;
    for seed in [11u64, 22, 33] {
        let inst = build_instance(30, d, 2, seed);
        let OfflineData::Exact(m) = &inst.offline else {
            panic!()
        };
        let rho_full = psd_factor(&m.h_d_rho);
        let delta_full = psd_factor(&m.delta_h_d);
        let zeta: Vec<f64> = rho_full.eigenvalues().as_slice().to_vec();
        let lambda: Vec<f64> = delta_full.eigenvalues().as_slice().to_vec();
        let sigma_min_sq = inst.model.noise.sigma_min_sq();
        let designs = all_designs(d, r);

        let mut prev_diag = f64::INFINITY;
        for k in 0..=d {
            for l in 0..=k {
                let factors = goed_core::OfflineFactors {
                    h_rho: truncated(&rho_full, k),
                    delta_h: truncated(&delta_full, l),
                    h_rho_spectrum_est: zeta.clone(),
                    delta_h_spectrum_est: lambda.clone(),
                };
                let approx_ev = EigEvaluator::new(
                    OfflineData::LowRank(factors),
                    inst.model.noise.clone(),
                )
                .unwrap();
                let bound = eig_error_bound(&zeta, &lambda, k, l, sigma_min_sq).unwrap();
                for idx in &designs {
                    let design = Design::new(idx.clone(), d).unwrap();
                    let exact = eig_goal_online(&inst.evaluator, &design).unwrap();
                    let approx = eig_goal_approx(&approx_ev, &design).unwrap();
                    let err = (exact - approx).abs();
                    assert!(
                        err <= bound + 1e-10,
                        "seed {seed} k={k} l={l} design {idx:?}: err {err:e} > bound {bound:e}"
                    );
                }
                if l == k {
                    // the k-1 -> k diagonal step is provably nonincreasing
                    // once the second sum's gained indices fall past d
                    if k >= 1 && 2 * (k - 1) >= d {
                        assert!(bound <= prev_diag + 1e-12);
                    }
                    prev_diag = bound;
                }
            }
        }
        // full-rank bound is exactly zero
        let final_bound = eig_error_bound(&zeta, &lambda, d, d, sigma_min_sq).unwrap();
        assert_eq!(final_bound, 0.0);
    }
}

#[test]
fn bound_converges_to_zero_along_the_diagonal() {
    let d = 12usize;
    let inst = build_instance(40, d, 1, 77);
    let OfflineData::Exact(m) = &inst.offline else {
        panic!()
    };
    let zeta: Vec<f64> = psd_factor(&m.h_d_rho).eigenvalues().as_slice().to_vec();
    let lambda: Vec<f64> = psd_factor(&m.delta_h_d).eigenvalues().as_slice().to_vec();
    let s2 = inst.model.noise.sigma_min_sq();
    let diag: Vec<f64> = (0..=d)
        .map(|k| eig_error_bound(&zeta, &lambda, k, k, s2).unwrap())
        .collect();
    assert_eq!(diag[d], 0.0);
    for k in d / 2..d {
        assert!(diag[k + 1] <= diag[k] + 1e-12);
    }
    assert!(diag[d - 1] < diag[d / 2].max(1e-30));
}
