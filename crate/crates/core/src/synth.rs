//! Synthetic motion: a forward-kinematics generator of anatomically legal
//! sequences, a corruption model standing in for single-frame predictor
//! noise, and the orthographic projector.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{JointId, Pose2D, Pose3D, PoseSequence, Vec3};
use crate::skeleton::Skeleton;

/// Smallest flexion (rad) the generator produces; keeps limbs off the
/// straight-limb boundary of the legal half-space.
pub const MIN_FLEXION: f64 = 0.05;
/// Largest flexion (rad).
pub const MAX_FLEXION: f64 = 2.6;
/// Largest forward/backward swing amplitude (rad).
pub const MAX_SWING: f64 = 1.5;

/// Rest angles (rad): arm and leg abduction, elbow and knee flexion.
const ARM_ABDUCTION: f64 = 0.15;
const LEG_ABDUCTION: f64 = 0.05;
const ELBOW_REST_FLEXION: f64 = 0.25;
const KNEE_REST_FLEXION: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    /// Radians.
    pub amplitude: f64,
    /// Hertz.
    pub frequency: f64,
    /// Radians.
    pub phase: f64,
}

impl Oscillation {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.amplitude.is_finite() && self.frequency.is_finite() && self.phase.is_finite()) {
            return Err(Error::InvalidConfig(format!("{what}: non-finite oscillation")));
        }
        if self.frequency < 0.0 {
            return Err(Error::InvalidConfig(format!("{what}: negative frequency")));
        }
        Ok(())
    }

    fn angle(&self, t: f64) -> f64 {
        TAU * self.frequency * t + self.phase
    }
}

/// Motion of one limb: swing of the upper segment in the sagittal plane and
/// flexion of the elbow or knee.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LimbMotion {
    /// `swing(t) = amplitude · sin(2π f t + φ)`.
    pub swing: Oscillation,
    /// `flex(t) = rest + amplitude · (1 − cos(2π f t + φ)) / 2`, so the
    /// flexion stays within `[rest, rest + amplitude]`.
    pub flex: Oscillation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    #[serde(default)]
    pub right_arm: LimbMotion,
    #[serde(default)]
    pub left_arm: LimbMotion,
    #[serde(default)]
    pub right_leg: LimbMotion,
    #[serde(default)]
    pub left_leg: LimbMotion,
    /// Initial heading about the vertical axis (rad).
    #[serde(default)]
    pub yaw: f64,
    /// Constant heading drift (rad/s).
    #[serde(default)]
    pub yaw_rate: f64,
    /// Random-walk heading noise (rad/√s), driven by `seed`.
    #[serde(default)]
    pub yaw_noise: f64,
    /// Constant forward lean (rad).
    #[serde(default)]
    pub pitch: f64,
    pub frames: usize,
    pub fps: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MotionSpec {
    /// A spec with no motion at all: every frame is the rest pose.
    pub fn still(frames: usize, fps: f64) -> Self {
        Self {
            right_arm: LimbMotion::default(),
            left_arm: LimbMotion::default(),
            right_leg: LimbMotion::default(),
            left_leg: LimbMotion::default(),
            yaw: 0.0,
            yaw_rate: 0.0,
            yaw_noise: 0.0,
            pitch: 0.0,
            frames,
            fps,
            seed: 0,
        }
    }

    /// Draws a varied but legal spec.
    pub fn random(seed: u64, frames: usize, fps: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limb = |swing: (f64, f64), flex: (f64, f64), rng: &mut ChaCha8Rng| LimbMotion {
            swing: Oscillation {
                amplitude: rng.random_range(swing.0..swing.1),
                frequency: rng.random_range(0.1..0.3),
                phase: rng.random_range(0.0..TAU),
            },
            flex: Oscillation {
                amplitude: rng.random_range(flex.0..flex.1),
                frequency: rng.random_range(0.1..0.3),
                phase: rng.random_range(0.0..TAU),
            },
        };
        let right_arm = limb((0.2, 0.8), (0.3, 1.5), &mut rng);
        let left_arm = limb((0.2, 0.8), (0.3, 1.5), &mut rng);
        let right_leg = limb((0.2, 0.6), (0.2, 1.2), &mut rng);
        let left_leg = limb((0.2, 0.6), (0.2, 1.2), &mut rng);
        Self {
            right_arm,
            left_arm,
            right_leg,
            left_leg,
            yaw: rng.random_range(-PI..PI),
            yaw_rate: rng.random_range(-0.3..0.3),
            yaw_noise: 0.05,
            pitch: rng.random_range(-0.15..0.15),
            frames,
            fps,
            seed: rng.random(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidConfig("motion spec needs at least one frame".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidConfig(format!("fps must be positive, got {}", self.fps)));
        }
        for v in [self.yaw, self.yaw_rate, self.pitch] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig("non-finite orientation parameter".into()));
            }
        }
        if !(self.yaw_noise >= 0.0 && self.yaw_noise.is_finite()) {
            return Err(Error::InvalidConfig("yaw_noise must be >= 0".into()));
        }
        let limbs = [
            ("right_arm", &self.right_arm, ELBOW_REST_FLEXION),
            ("left_arm", &self.left_arm, ELBOW_REST_FLEXION),
            ("right_leg", &self.right_leg, KNEE_REST_FLEXION),
            ("left_leg", &self.left_leg, KNEE_REST_FLEXION),
        ];
        for (name, limb, rest) in limbs {
            limb.swing.validate(name)?;
            limb.flex.validate(name)?;
            if limb.swing.amplitude.abs() > MAX_SWING {
                return Err(Error::InvalidConfig(format!(
                    "{name}: swing amplitude {} exceeds {MAX_SWING} rad",
                    limb.swing.amplitude
                )));
            }
            if limb.flex.amplitude < 0.0 || rest + limb.flex.amplitude > MAX_FLEXION {
                return Err(Error::InvalidConfig(format!(
                    "{name}: flexion amplitude {} leaves the legal range [0, {}] rad",
                    limb.flex.amplitude,
                    MAX_FLEXION - rest
                )));
            }
        }
        Ok(())
    }
}

/// Joint angles of one limb at one instant.
#[derive(Clone, Copy, Debug)]
struct LimbAngles {
    swing: f64,
    abduction: f64,
    flexion: f64,
}

struct LimbChain {
    root: JointId,
    mid: JointId,
    end: JointId,
    upper: f64,
    lower: f64,
    /// −1 for the right side, +1 for the left.
    side: f64,
    legal: f64,
}

/// Bone lengths and legal sides the generator needs, resolved once.
struct Rig {
    lower_spine: f64,
    upper_spine: f64,
    head: f64,
    collar: [f64; 2],
    hip: [f64; 2],
    limbs: [LimbChain; 4],
}

impl Rig {
    fn new(skeleton: &Skeleton) -> Result<Rig> {
        use JointId::*;
        let standard = Skeleton::standard();
        for j in JointId::ALL.into_iter().skip(1) {
            if skeleton.parent_of(j) != standard.parent_of(j) {
                return Err(Error::InvalidConfig(
                    "motion generator requires the standard joint tree".into(),
                ));
            }
        }
        let len = |child: JointId| skeleton.canonical_length(skeleton.bone_of_child(child).unwrap());
        let legal = |joint: JointId| -> Result<f64> {
            skeleton
                .angle_joints()
                .iter()
                .find(|a| a.joint == joint)
                .map(|a| a.legal_side.sign())
                .ok_or_else(|| Error::InvalidConfig(format!("no angle limit for {joint}")))
        };
        let chain = |root, mid, end, side| -> Result<LimbChain> {
            Ok(LimbChain {
                root,
                mid,
                end,
                upper: len(mid),
                lower: len(end),
                side,
                legal: legal(mid)?,
            })
        };
        Ok(Rig {
            lower_spine: len(Spine),
            upper_spine: len(Neck),
            head: len(Head),
            collar: [len(RShoulder), len(LShoulder)],
            hip: [len(RHip), len(LHip)],
            limbs: [
                chain(RShoulder, RElbow, RWrist, -1.0)?,
                chain(LShoulder, LElbow, LWrist, 1.0)?,
                chain(RHip, RKnee, RAnkle, -1.0)?,
                chain(LHip, LKnee, LAnkle, 1.0)?,
            ],
        })
    }

    fn pose(&self, orientation: &Matrix3<f64>, angles: &[LimbAngles; 4]) -> Pose3D {
        use JointId::*;
        let up = Vec3::new(0.0, 1.0, 0.0);
        let mut p = Pose3D::zeros();
        p[Spine] = orientation * up * self.lower_spine;
        p[Neck] = p[Spine] + orientation * up * self.upper_spine;
        p[Head] = p[Neck] + orientation * up * self.head;
        p[RShoulder] = p[Neck] + orientation * Vec3::new(-self.collar[0], 0.0, 0.0);
        p[LShoulder] = p[Neck] + orientation * Vec3::new(self.collar[1], 0.0, 0.0);
        p[RHip] = orientation * Vec3::new(-self.hip[0], 0.0, 0.0);
        p[LHip] = orientation * Vec3::new(self.hip[1], 0.0, 0.0);

        for (limb, a) in self.limbs.iter().zip(angles) {
            let lateral = Vec3::new(limb.side, 0.0, 0.0);
            let upper_dir = Vec3::new(
                limb.side * a.abduction.sin(),
                -a.abduction.cos() * a.swing.cos(),
                a.abduction.cos() * a.swing.sin(),
            );
            // Normal of the (collar or hip bone, upper segment) plane; the
            // lower segment bends toward its legal side of that plane.
            let normal = lateral.cross(&upper_dir).normalize();
            let lower_dir =
                upper_dir * a.flexion.cos() + normal * (limb.legal * a.flexion.sin());
            p[limb.mid] = p[limb.root] + orientation * upper_dir * limb.upper;
            p[limb.end] = p[limb.mid] + orientation * lower_dir * limb.lower;
        }
        p
    }
}

fn orientation(yaw: f64, pitch: f64) -> Matrix3<f64> {
    let yaw = Rotation3::from_axis_angle(&Vec3::y_axis(), yaw);
    let pitch = Rotation3::from_axis_angle(&Vec3::x_axis(), pitch);
    (yaw * pitch).into_inner()
}

fn rest_angles() -> [LimbAngles; 4] {
    let arm = LimbAngles {
        swing: 0.0,
        abduction: ARM_ABDUCTION,
        flexion: ELBOW_REST_FLEXION,
    };
    let leg = LimbAngles {
        swing: 0.0,
        abduction: LEG_ABDUCTION,
        flexion: KNEE_REST_FLEXION,
    };
    [arm, arm, leg, leg]
}

/// Upright, facing `+z`, arms hanging with slightly bent elbows.
pub fn rest_pose(skeleton: &Skeleton) -> Result<Pose3D> {
    let rig = Rig::new(skeleton)?;
    Ok(rig.pose(&Matrix3::identity(), &rest_angles()))
}

/// Forward kinematics of `spec` on the canonical bone lengths. The returned
/// sequence carries itself as ground truth.
pub fn generate_sequence(skeleton: &Skeleton, spec: &MotionSpec) -> Result<PoseSequence> {
    spec.validate()?;
    let rig = Rig::new(skeleton)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let step_noise = Normal::new(0.0, spec.yaw_noise * (1.0 / spec.fps).sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rest = rest_angles();
    let limbs = [&spec.right_arm, &spec.left_arm, &spec.right_leg, &spec.left_leg];

    let mut frames = Vec::with_capacity(spec.frames);
    let mut yaw_walk = 0.0;
    for i in 0..spec.frames {
        let t = i as f64 / spec.fps;
        if i > 0 && spec.yaw_noise > 0.0 {
            yaw_walk += step_noise.sample(&mut rng);
        }
        let mut angles = rest;
        for (a, m) in angles.iter_mut().zip(limbs) {
            a.swing += m.swing.amplitude * m.swing.angle(t).sin();
            a.flexion += m.flex.amplitude * 0.5 * (1.0 - m.flex.angle(t).cos());
            a.flexion = a.flexion.max(MIN_FLEXION);
        }
        let r = orientation(spec.yaw + spec.yaw_rate * t + yaw_walk, spec.pitch);
        frames.push(rig.pose(&r, &angles));
    }
    let gt = frames.clone();
    PoseSequence::new(frames, spec.fps, Some(gt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation (mm) of the i.i.d. Gaussian added to every
    /// coordinate of every joint, pelvis included.
    pub jitter_sigma: f64,
    /// Per-frame probability of negating the depth of one limb joint.
    pub depth_flip_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidConfig("jitter_sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.depth_flip_prob) {
            return Err(Error::InvalidConfig("depth_flip_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Joints eligible for a depth flip: elbows, wrists, knees and ankles.
pub const FLIPPABLE_JOINTS: [JointId; 8] = [
    JointId::RElbow,
    JointId::RWrist,
    JointId::LElbow,
    JointId::LWrist,
    JointId::RKnee,
    JointId::RAnkle,
    JointId::LKnee,
    JointId::LAnkle,
];

/// Corrupts every frame; the original frames become the ground truth.
pub fn corrupt_sequence(seq: &PoseSequence, noise: &NoiseSpec) -> Result<PoseSequence> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let jitter = Normal::new(0.0, noise.jitter_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let frames = seq
        .frames()
        .iter()
        .map(|frame| {
            let mut out = *frame;
            if noise.depth_flip_prob > 0.0 && rng.random_bool(noise.depth_flip_prob) {
                let joint = FLIPPABLE_JOINTS[rng.random_range(0..FLIPPABLE_JOINTS.len())];
                out[joint].z = -out[joint].z;
            }
            if noise.jitter_sigma > 0.0 {
                for p in out.joints_mut().iter_mut() {
                    for c in p.iter_mut() {
                        *c += jitter.sample(&mut rng);
                    }
                }
            }
            out
        })
        .collect();
    PoseSequence::new(frames, seq.fps(), Some(seq.frames().to_vec()))
}

/// Orthographic projection onto the image plane.
pub fn project_2d(pose: &Pose3D) -> Pose2D {
    pose.xy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{angle_terms, AngleMode};
    use crate::skeleton::bone_vector;

    #[test]
    fn rest_pose_is_legal_and_canonical() {
        let sk = Skeleton::standard();
        let rest = rest_pose(&sk).unwrap();
        assert_eq!(rest[JointId::Pelvis], Vec3::zeros());
        for (b, bone) in sk.bones().iter().enumerate() {
            let len = bone_vector(&rest, bone).norm();
            assert!((len - sk.canonical_lengths()[b]).abs() < 1e-9, "{}", bone.name);
        }
        for t in angle_terms(&rest, &sk, AngleMode::Unit) {
            assert!(!t.degenerate);
            assert!(t.projection * sk.angle_joints().iter().find(|a| a.joint == t.joint).unwrap().legal_side.sign() > 0.05);
            assert_eq!(t.value, 0.0);
        }
        // Hand-derived rest-pose lower leg: flexion 0.1 rad backwards from a
        // leg abducted by 0.05 rad.
        let shin = bone_vector(&rest, sk.bone(sk.bone_by_name("r_lower_leg").unwrap()));
        let (sa, ca) = (0.05f64.sin(), 0.05f64.cos());
        let upper = Vec3::new(-sa, -ca, 0.0);
        let normal = Vec3::new(0.0, 0.0, 1.0);
        let expected = (upper * 0.1f64.cos() - normal * 0.1f64.sin()) * 440.0;
        assert!((shin - expected).norm() < 1e-9);
    }

    #[test]
    fn still_spec_repeats_rest_pose() {
        let sk = Skeleton::standard();
        let seq = generate_sequence(&sk, &MotionSpec::still(5, 50.0)).unwrap();
        let rest = rest_pose(&sk).unwrap();
        assert!(seq.frames().iter().all(|f| *f == rest));
    }

    #[test]
    fn rejects_out_of_range_amplitude() {
        let sk = Skeleton::standard();
        let mut spec = MotionSpec::still(5, 50.0);
        spec.left_leg.flex.amplitude = 3.0;
        assert!(generate_sequence(&sk, &spec).is_err());
        let mut spec = MotionSpec::still(5, 50.0);
        spec.right_arm.flex.amplitude = -0.1;
        assert!(generate_sequence(&sk, &spec).is_err());
        assert!(generate_sequence(&sk, &MotionSpec::still(0, 50.0)).is_err());
    }

    #[test]
    fn corruption_identity_and_flip() {
        let sk = Skeleton::standard();
        let seq = generate_sequence(&sk, &MotionSpec::random(3, 40, 50.0)).unwrap();
        let same = corrupt_sequence(
            &seq,
            &NoiseSpec {
                jitter_sigma: 0.0,
                depth_flip_prob: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(same.frames(), seq.frames());

        let flipped = corrupt_sequence(
            &seq,
            &NoiseSpec {
                jitter_sigma: 0.0,
                depth_flip_prob: 1.0,
                seed: 1,
            },
        )
        .unwrap();
        for (a, b) in flipped.frames().iter().zip(seq.frames()) {
            let changed: Vec<usize> = (0..16).filter(|&j| a[j] != b[j]).collect();
            assert_eq!(changed.len(), 1);
            let j = changed[0];
            assert_eq!(a[j], Vec3::new(b[j].x, b[j].y, -b[j].z));
        }
        assert_eq!(flipped.ground_truth().unwrap(), seq.frames());
    }

    #[test]
    fn projection_ignores_depth_reflection() {
        let sk = Skeleton::standard();
        let rest = rest_pose(&sk).unwrap();
        assert_eq!(project_2d(&rest), project_2d(&rest.reflect_depth()));
        assert_eq!(project_2d(&rest)[3].x, rest[3].x);
        assert_eq!(project_2d(&rest)[3].y, rest[3].y);
    }
}
