mod common;

use anatomik::analysis::elbow_reflection_example;
use anatomik::lifter::{lift, LiftConfig, LiftInit, LiftMode};
use anatomik::losses::{illegal_angle_loss, LossWeights};
use anatomik::synth::{generate_sequence, project_2d, rest_pose, MotionSpec};
use anatomik::{Skeleton, NUM_JOINTS};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn supervised_round_trip_recovers_depths() {
    let sk = Skeleton::standard();
    let seq = generate_sequence(&sk, &MotionSpec::random(31, 5, 50.0)).unwrap();
    for p in seq.frames() {
        let gt = p.depths();
        let cfg = LiftConfig { mode: LiftMode::Supervised, max_iters: 500, ..Default::default() };
        let out = lift(&project_2d(p), &sk, &LossWeights::default(), &cfg, Some(&gt)).unwrap();
        for j in 0..NUM_JOINTS {
            assert!((out.pose[j].z - gt[j]).abs() < 1e-3);
        }
    }
}

#[test]
fn zero_loss_pose_is_a_fixed_point() {
    let sk = Skeleton::standard();
    let rest = rest_pose(&sk).unwrap();
    let cfg = LiftConfig { init: LiftInit::Provided(rest.depths().to_vec()), tol: 1e-6, ..Default::default() };
    let out = lift(&project_2d(&rest), &sk, &LossWeights::default(), &cfg, None).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 0);
    assert_eq!(out.pose, rest);
}

#[test]
fn weak_lift_straightens_a_bent_elbow() {
    let sk = Skeleton::standard();
    let (_, bent) = elbow_reflection_example(&sk).unwrap();
    let before = illegal_angle_loss(&bent, &sk).value;
    assert!(before > 0.0);
    let cfg = LiftConfig { init: LiftInit::Provided(bent.depths().to_vec()), max_iters: 5000, ..Default::default() };
    let out = lift(&project_2d(&bent), &sk, &LossWeights::default(), &cfg, None).unwrap();
    assert!(out.final_objective < out.initial_objective);
    assert!(illegal_angle_loss(&out.pose, &sk).value < before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_never_increases(seed in any::<u64>(), sigma in 10.0f64..80.0) {
        let sk = Skeleton::standard();
        let gt = generate_sequence(&sk, &MotionSpec::random(seed, 1, 50.0)).unwrap().frames()[0];
        let mut r = rng(seed);
        let z: Vec<f64> = gt.depths().iter().enumerate()
            .map(|(j, z)| if j == 0 { *z } else { z + r.random_range(-sigma..sigma) })
            .collect();
        let cfg = LiftConfig { init: LiftInit::Provided(z), max_iters: 300, record_trajectory: true, ..Default::default() };
        let out = lift(&project_2d(&gt), &sk, &LossWeights::default(), &cfg, None).unwrap();
        for w in out.trajectory.windows(2) {
            prop_assert!(w[1].total <= w[0].total);
        }
        prop_assert!(out.final_objective <= out.initial_objective);
        prop_assert_eq!(out.pose.xy(), project_2d(&gt));
    }
}
