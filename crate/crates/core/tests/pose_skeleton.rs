mod common;

use anatomik::synth::rest_pose;
use anatomik::{bone_length, bone_vector, JointId, Pose3D, Skeleton, Vec3, NUM_JOINTS};
use common::*;
use proptest::prelude::*;

#[test]
fn shipped_skeleton_file_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/standard_skeleton.json");
    let shipped = Skeleton::load(path).unwrap();
    assert_eq!(shipped, Skeleton::standard());
}

#[test]
fn rest_pose_bone_lengths_are_canonical() {
    let sk = Skeleton::standard();
    let rest = rest_pose(&sk).unwrap();
    for (b, bone) in sk.bones().iter().enumerate() {
        let v = bone_vector(&rest, bone);
        assert_eq!(v, rest[bone.child] - rest[bone.parent]);
        assert!((bone_length(&rest, bone) - sk.canonical_lengths()[b]).abs() < 1e-9, "{}", bone.name);
    }
}

#[test]
fn zero_pose_has_zero_bones() {
    let sk = Skeleton::standard();
    let zero = Pose3D::zeros();
    for bone in sk.bones() {
        assert_eq!(bone_vector(&zero, bone), Vec3::zeros());
        assert_eq!(bone_length(&zero, bone), 0.0);
    }
}

#[test]
fn root_center_removes_translation() {
    let sk = Skeleton::standard();
    let p = rest_pose(&sk).unwrap();
    let shifted = p.translate(&Vec3::new(10.0, 20.0, 30.0));
    let centered = shifted.root_center();
    for j in 0..NUM_JOINTS {
        assert!((centered[j] - p[j]).amax() < 1e-12);
    }
    assert_eq!(p.root_center(), p);
}

proptest! {
    #[test]
    fn root_center_is_idempotent(pose in pose_strategy(200.0), shift in prop::array::uniform3(-1e3f64..1e3)) {
        let p = pose.translate(&Vec3::from(shift));
        let once = p.root_center();
        prop_assert_eq!(once[JointId::Pelvis], Vec3::zeros());
        prop_assert_eq!(once.root_center(), once);
    }

    #[test]
    fn bone_lengths_survive_rigid_motion(pose in pose_strategy(150.0), seed in any::<u64>()) {
        let sk = Skeleton::standard();
        let mut r = rng(seed);
        let rot = random_rotation(&mut r);
        let moved = pose.transform(&rot, 1.0, &random_vec(&mut r, 1e3));
        for bone in sk.bones() {
            prop_assert!(rel_close(bone_length(&pose, bone), bone_length(&moved, bone), 1e-9));
        }
    }

    #[test]
    fn bone_vectors_telescope_along_paths(pose in pose_strategy(300.0)) {
        let sk = Skeleton::standard();
        let p = pose.root_center();
        for leaf in [JointId::Head, JointId::LWrist, JointId::RWrist, JointId::LAnkle, JointId::RAnkle] {
            let mut path = vec![leaf];
            while let Some(parent) = sk.parent_of(*path.last().unwrap()) {
                path.push(parent);
            }
            let sum: Vec3 = path
                .windows(2)
                .map(|w| bone_vector(&p, sk.bone(sk.bone_of_child(w[0]).unwrap())))
                .sum();
            prop_assert!((sum - (p[leaf] - p[JointId::Pelvis])).amax() < 1e-9);
        }
    }
}
