//! Cross-route EIG consistency: the offline-online data-space formula must
//! reproduce the QoI-space formula on every design, goal information must
//! never exceed parameter information, and adding sensors must never lose
//! information.

mod common;

use common::{all_designs, build_instance};
use goed_core::{
    eig_goal_direct, eig_goal_online, eig_parameter, logdet_psd, Design, Limits,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[test]
fn online_equals_direct_across_all_designs() {
    // two QoI dimensions, full 220-design sweep each
    for (seed, d_rho) in [(101u64, 1usize), (202, 2)] {
        let inst = build_instance(40, 12, d_rho, seed);
        let mut worst = 0.0f64;
        for idx in all_designs(12, 3) {
            let design = Design::new(idx, 12).unwrap();
            let online = eig_goal_online(&inst.evaluator, &design).unwrap();
            let direct =
                eig_goal_direct(&inst.model, &inst.goal, &design, &Limits::default()).unwrap();
            worst = worst.max((online - direct).abs() / direct.abs().max(1e-12));
        }
        assert!(worst <= 1e-8, "seed {seed}: max relative defect {worst:e}");
    }
}

#[test]
fn goal_information_never_exceeds_parameter_information() {
    let inst = build_instance(30, 9, 2, 303);
    for r in 1..=4 {
        for idx in all_designs(9, r) {
            let design = Design::new(idx, 9).unwrap();
            let goal = eig_goal_online(&inst.evaluator, &design).unwrap();
            let param = eig_parameter(&inst.evaluator, &design).unwrap();
            assert!(
                goal <= param + 1e-8,
                "goal {goal} exceeds parameter {param} at {:?}",
                design.indices()
            );
        }
    }
}

#[test]
fn eig_is_monotone_under_nested_designs() {
    let inst = build_instance(20, 6, 1, 404);
    let d = 6;
    for r in 1..d {
        for idx in all_designs(d, r) {
            let base = Design::new(idx.clone(), d).unwrap();
            let v_base = eig_goal_online(&inst.evaluator, &base).unwrap();
            for extra in 0..d {
                if idx.contains(&extra) {
                    continue;
                }
                let mut sup = idx.clone();
                sup.push(extra);
                let sup = Design::new(sup, d).unwrap();
                let v_sup = eig_goal_online(&inst.evaluator, &sup).unwrap();
                assert!(
                    v_base <= v_sup + 1e-10,
                    "{:?} -> {:?}: {v_base} > {v_sup}",
                    base.indices(),
                    sup.indices()
                );
            }
        }
    }
}

#[test]
fn weinstein_aronszajn_identity_on_spd_shifts() {
    // logdet(I + G S Gᵀ) = logdet(I + S^{1/2} Gᵀ G S^{1/2}) for random G and SPD S
    let mut rng = ChaCha20Rng::seed_from_u64(505);
    for m in 1..=8usize {
        for n in 1..=8usize {
            let g = common::random_matrix(m, n, &mut rng);
            let s = common::random_spd(n, &mut rng);
            let s_half = goed_core::linalg::symmetric_sqrt(&s);

            let mut lhs_m = DMatrix::<f64>::identity(m, m) + &g * &s * g.transpose();
            goed_core::linalg::symmetrize(&mut lhs_m);
            let mut rhs_m = DMatrix::<f64>::identity(n, n) + &s_half * g.tr_mul(&g) * &s_half;
            goed_core::linalg::symmetrize(&mut rhs_m);

            let lhs = logdet_psd(&lhs_m).unwrap();
            let rhs = logdet_psd(&rhs_m).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "m={m} n={n}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn online_path_is_pure_in_model_solves() {
    let inst = build_instance(25, 10, 2, 606);
    let before = (
        inst.model.forward.solve_count(),
        inst.goal.goal().solve_count(),
    );
    for idx in all_designs(10, 3).into_iter().step_by(7) {
        let design = Design::new(idx, 10).unwrap();
        eig_goal_online(&inst.evaluator, &design).unwrap();
        eig_parameter(&inst.evaluator, &design).unwrap();
    }
    let after = (
        inst.model.forward.solve_count(),
        inst.goal.goal().solve_count(),
    );
    assert_eq!(before, after, "online evaluation consumed model solves");
}
