mod common;

use anatomik::metrics::{mpjpe, validity_report};
use anatomik::synth::{corrupt_sequence, generate_sequence, project_2d, rest_pose, MotionSpec, NoiseSpec};
use anatomik::{PoseSequence, Skeleton, NUM_JOINTS};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_sequences_are_legal_and_rigid(seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let seq = generate_sequence(&sk, &MotionSpec::random(seed, 150, 50.0)).unwrap();
        prop_assert_eq!(seq.len(), 150);
        let report = validity_report(seq.frames(), &sk).unwrap();
        prop_assert_eq!(report.illegal_angle_rate, 0.0);
        prop_assert!(report.mean_bone_length_std_mm < 1e-9);
        prop_assert!(report.mean_pair_l1_mm < 1e-9);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let spec = MotionSpec::random(seed, 60, 30.0);
        prop_assert_eq!(generate_sequence(&sk, &spec).unwrap(), generate_sequence(&sk, &spec).unwrap());
    }
}

#[test]
fn still_spec_is_constant_rest_pose() {
    let sk = Skeleton::standard();
    let rest = rest_pose(&sk).unwrap();
    let seq = generate_sequence(&sk, &MotionSpec::still(30, 50.0)).unwrap();
    assert!(seq.frames().iter().all(|p| mpjpe(p, &rest) < 1e-9));
}

fn clean(frames: usize) -> PoseSequence {
    generate_sequence(&Skeleton::standard(), &MotionSpec::random(5, frames, 50.0)).unwrap()
}

#[test]
fn jitter_error_matches_chi_mean() {
    // E‖N(0, σ²I₃)‖ = σ·2√(2/π) ≈ 15.96 for σ = 10.
    let seq = clean(2000);
    let noisy = corrupt_sequence(&seq, &NoiseSpec { jitter_sigma: 10.0, depth_flip_prob: 0.0, seed: 6 }).unwrap();
    let mean = noisy.frames().iter().zip(seq.frames()).map(|(a, b)| mpjpe(a, b)).sum::<f64>() / 2000.0;
    assert!((mean - 16.0).abs() < 1.0, "mean error {mean}");
}

#[test]
fn corruption_identity_pairing_and_flips() {
    let seq = clean(100);
    let same = corrupt_sequence(&seq, &NoiseSpec { jitter_sigma: 0.0, depth_flip_prob: 0.0, seed: 1 }).unwrap();
    assert_eq!(same.frames(), seq.frames());
    assert_eq!(same.ground_truth().unwrap(), seq.frames());

    let flipped = corrupt_sequence(&seq, &NoiseSpec { jitter_sigma: 0.0, depth_flip_prob: 1.0, seed: 2 }).unwrap();
    assert_eq!(flipped.len(), seq.len());
    for (f, g) in flipped.frames().iter().zip(seq.frames()) {
        let changed: Vec<usize> = (0..NUM_JOINTS).filter(|&j| f[j] != g[j]).collect();
        assert!(changed.len() <= 1);
        for j in changed {
            assert_eq!(f[j].z, -g[j].z);
            assert_eq!((f[j].x, f[j].y), (g[j].x, g[j].y));
        }
    }
}

#[test]
fn projection_drops_depth() {
    let seq = clean(10);
    for p in seq.frames() {
        let xy = project_2d(p);
        assert_eq!(xy, project_2d(&p.reflect_depth()));
        for j in 0..NUM_JOINTS {
            assert_eq!((xy[j].x, xy[j].y), (p[j].x, p[j].y));
        }
    }
}
