mod common;

use anatomik::fit::fit_skeleton;
use anatomik::losses::symmetry_loss;
use anatomik::metrics::validity_report;
use anatomik::synth::{generate_sequence, MotionSpec};
use anatomik::{bone_vector, Skeleton, Vec3, NUM_JOINTS};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn random_targets(sk: &Skeleton, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..sk.bones().len()).map(|_| r.random_range(50.0..500.0)).collect()
}

fn symmetric(sk: &Skeleton, mut targets: Vec<f64>) -> Vec<f64> {
    for &(right, left) in sk.lr_pairs() {
        targets[left.0] = targets[right.0];
    }
    targets
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lengths_hit_targets_and_directions_survive(pose in pose_strategy(80.0), seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let targets = random_targets(&sk, seed);
        let fitted = fit_skeleton(&pose, &targets, &sk).unwrap();
        prop_assert_eq!(fitted[0], Vec3::zeros());
        for (b, bone) in sk.bones().iter().enumerate() {
            let (before, after) = (bone_vector(&pose, bone), bone_vector(&fitted, bone));
            prop_assert!((after.norm() - targets[b]).abs() <= 1e-9);
            prop_assert!((before.dot(&after) / (before.norm() * after.norm()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fitting_is_idempotent(pose in pose_strategy(80.0), seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let targets = random_targets(&sk, seed);
        let once = fit_skeleton(&pose, &targets, &sk).unwrap();
        let twice = fit_skeleton(&once, &targets, &sk).unwrap();
        for j in 0..NUM_JOINTS {
            prop_assert!((once[j] - twice[j]).amax() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_targets_give_exactly_symmetric_output(pose in pose_strategy(80.0), seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let targets = symmetric(&sk, random_targets(&sk, seed));
        let fitted = fit_skeleton(&pose, &targets, &sk).unwrap();
        prop_assert_eq!(symmetry_loss(&fitted, &sk).value, 0.0);
    }

    #[test]
    fn fitting_commutes_with_rotation(pose in pose_strategy(80.0), seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let targets = random_targets(&sk, seed);
        let rot = random_rotation(&mut rng(seed ^ 1));
        let rotated_first = fit_skeleton(&pose.transform(&rot, 1.0, &Vec3::zeros()), &targets, &sk).unwrap();
        let rotated_after = fit_skeleton(&pose, &targets, &sk).unwrap().transform(&rot, 1.0, &Vec3::zeros());
        for j in 0..NUM_JOINTS {
            prop_assert!((rotated_first[j] - rotated_after[j]).amax() <= 1e-9);
        }
    }
}

#[test]
fn fitted_sequence_has_no_length_variation() {
    let sk = Skeleton::standard();
    let seq = generate_sequence(&sk, &MotionSpec::random(3, 100, 50.0)).unwrap();
    let mut r = rng(4);
    let noisy: Vec<_> = seq
        .frames()
        .iter()
        .map(|p| {
            let mut q = *p;
            for j in 1..NUM_JOINTS {
                q[j] += random_vec(&mut r, 20.0);
            }
            q
        })
        .collect();
    let targets = sk.canonical_lengths().to_vec();
    let fitted: Vec<_> = noisy.iter().map(|p| fit_skeleton(p, &targets, &sk).unwrap()).collect();
    let report = validity_report(&fitted, &sk).unwrap();
    assert_eq!(report.mean_bone_length_std_mm, 0.0);
    assert_eq!(report.mean_pair_l1_mm, 0.0);
}
