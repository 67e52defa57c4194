//! Skeleton topology: the bone tree, left/right pairing, the four
//! angle-limited joints and the bone-length tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{JointId, Pose3D, Vec3, NUM_JOINTS};

pub const NUM_BONES: usize = NUM_JOINTS - 1;

/// Index into [`Skeleton::bones`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoneId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bone {
    pub parent: JointId,
    pub child: JointId,
    pub name: String,
}

/// Vector from the bone's parent joint to its child joint.
#[inline]
pub fn bone_vector(pose: &Pose3D, bone: &Bone) -> Vec3 {
    pose[bone.child] - pose[bone.parent]
}

#[inline]
pub fn bone_length(pose: &Pose3D, bone: &Bone) -> f64 {
    bone_vector(pose, bone).norm()
}

/// Which side of the limb plane the lower limb must point into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegalSide {
    /// Legal when the lower limb has a non-negative component along the normal.
    Positive,
    /// Legal when that component is non-positive.
    Negative,
}

impl LegalSide {
    pub fn sign(self) -> f64 {
        match self {
            LegalSide::Positive => 1.0,
            LegalSide::Negative => -1.0,
        }
    }

    fn from_sign(sign: i8) -> Result<Self> {
        match sign {
            1 => Ok(LegalSide::Positive),
            -1 => Ok(LegalSide::Negative),
            other => Err(Error::InvalidSkeleton(format!(
                "legal_side must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// An angle-limited joint (elbow or knee).
///
/// The plane normal is `plane_bones[0] × plane_bones[1]` (collar × upper-arm,
/// or hip-bone × upper-leg) and the limb bone is the lower arm or lower leg.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleJointSpec {
    pub joint: JointId,
    pub plane_bones: [BoneId; 2],
    pub limb_bone: BoneId,
    pub legal_side: LegalSide,
}

/// Expected value of `length(numerator) / length(denominator)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioPrior {
    pub numerator: BoneId,
    pub denominator: BoneId,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    bones: Vec<Bone>,
    parent_of: [Option<JointId>; NUM_JOINTS],
    bone_of_child: [Option<BoneId>; NUM_JOINTS],
    /// Joints ordered parent-before-child, pelvis first.
    topo_order: Vec<JointId>,
    lr_pairs: Vec<(BoneId, BoneId)>,
    symmetry_set: Vec<BoneId>,
    angle_joints: Vec<AngleJointSpec>,
    canonical_lengths: Vec<f64>,
    ratio_priors: Vec<RatioPrior>,
}

const STANDARD_PARENTS: [i64; NUM_JOINTS] = [-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 8, 10, 11, 8, 13, 14];

fn standard_bone_name(child: JointId) -> Option<&'static str> {
    use JointId::*;
    Some(match child {
        RHip => "r_hip_bone",
        RKnee => "r_upper_leg",
        RAnkle => "r_lower_leg",
        LHip => "l_hip_bone",
        LKnee => "l_upper_leg",
        LAnkle => "l_lower_leg",
        Spine => "lower_spine",
        Neck => "upper_spine",
        Head => "head_bone",
        LShoulder => "l_collar",
        LElbow => "l_upper_arm",
        LWrist => "l_lower_arm",
        RShoulder => "r_collar",
        RElbow => "r_upper_arm",
        RWrist => "r_lower_arm",
        Pelvis => return None,
    })
}

const STANDARD_LENGTHS: [(&str, f64); NUM_BONES] = [
    ("r_hip_bone", 130.0),
    ("r_upper_leg", 450.0),
    ("r_lower_leg", 440.0),
    ("l_hip_bone", 130.0),
    ("l_upper_leg", 450.0),
    ("l_lower_leg", 440.0),
    ("lower_spine", 230.0),
    ("upper_spine", 250.0),
    ("head_bone", 160.0),
    ("l_collar", 150.0),
    ("l_upper_arm", 280.0),
    ("l_lower_arm", 250.0),
    ("r_collar", 150.0),
    ("r_upper_arm", 280.0),
    ("r_lower_arm", 250.0),
];

const STANDARD_SYMMETRY_SET: [&str; 6] = [
    "r_collar",
    "r_upper_arm",
    "r_lower_arm",
    "r_hip_bone",
    "r_upper_leg",
    "r_lower_leg",
];

/// Denominator of the default ratio priors.
const REFERENCE_BONE: &str = "lower_spine";

/// `(joint, plane bone 0, plane bone 1, limb bone, legal side)`.
///
/// With `+x` to the subject's left, `+y` up and `+z` forward, the right-arm
/// normal `collar × upper_arm` points forward for a hanging arm, so a
/// flexed right forearm is legal on the positive side; the left elbow and
/// right knee flip, the left knee flips twice.
const STANDARD_ANGLE_JOINTS: [(&str, &str, &str, &str, i8); 4] = [
    ("r_elbow", "r_collar", "r_upper_arm", "r_lower_arm", 1),
    ("l_elbow", "l_collar", "l_upper_arm", "l_lower_arm", -1),
    ("r_knee", "r_hip_bone", "r_upper_leg", "r_lower_leg", -1),
    ("l_knee", "l_hip_bone", "l_upper_leg", "l_lower_leg", 1),
];

/// On-disk JSON layout of a skeleton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkeletonFile {
    pub joints: Vec<String>,
    pub parents: Vec<i64>,
    /// Bone pairs as `[right child joint index, left child joint index]`.
    pub lr_pairs: Vec<[usize; 2]>,
    pub symmetry_set: Vec<String>,
    pub canonical_lengths: BTreeMap<String, f64>,
    pub ratio_priors: Vec<(String, String, f64)>,
    /// Bone names keyed by child joint name; defaults to the standard names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bone_names: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_joints: Option<Vec<AngleJointEntry>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleJointEntry {
    pub joint: String,
    pub plane_bones: [String; 2],
    pub limb_bone: String,
    pub legal_side: i8,
}

impl Skeleton {
    /// The built-in 16-joint skeleton with adult bone lengths and ratio
    /// priors taken from those lengths.
    pub fn standard() -> Skeleton {
        Skeleton::from_file(Self::standard_file()).expect("built-in skeleton is valid")
    }

    pub fn standard_file() -> SkeletonFile {
        let lengths: BTreeMap<String, f64> = STANDARD_LENGTHS
            .iter()
            .map(|(n, l)| (n.to_string(), *l))
            .collect();
        let reference = lengths[REFERENCE_BONE];
        let ratio_priors = STANDARD_LENGTHS
            .iter()
            .filter(|(n, _)| *n != REFERENCE_BONE)
            .map(|(n, l)| (n.to_string(), REFERENCE_BONE.to_string(), l / reference))
            .collect();
        use JointId::*;
        let lr = |r: JointId, l: JointId| [r.index(), l.index()];
        SkeletonFile {
            joints: JointId::ALL.iter().map(|j| j.name().to_string()).collect(),
            parents: STANDARD_PARENTS.to_vec(),
            lr_pairs: vec![
                lr(RShoulder, LShoulder),
                lr(RElbow, LElbow),
                lr(RWrist, LWrist),
                lr(RHip, LHip),
                lr(RKnee, LKnee),
                lr(RAnkle, LAnkle),
            ],
            symmetry_set: STANDARD_SYMMETRY_SET.iter().map(|s| s.to_string()).collect(),
            canonical_lengths: lengths,
            ratio_priors,
            bone_names: None,
            angle_joints: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Skeleton> {
        let file: SkeletonFile = serde_json::from_str(text)?;
        Skeleton::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Skeleton> {
        Skeleton::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_file(file: SkeletonFile) -> Result<Skeleton> {
        let invalid = |msg: String| Error::InvalidSkeleton(msg);

        if file.joints.len() != NUM_JOINTS {
            return Err(invalid(format!(
                "expected {NUM_JOINTS} joints, got {}",
                file.joints.len()
            )));
        }
        for (i, name) in file.joints.iter().enumerate() {
            let joint = JointId::from_name(name)?;
            if joint.index() != i {
                return Err(invalid(format!(
                    "joint `{name}` must have index {}, found at {i}",
                    joint.index()
                )));
            }
        }
        if file.parents.len() != NUM_JOINTS {
            return Err(invalid(format!(
                "expected {NUM_JOINTS} parents, got {}",
                file.parents.len()
            )));
        }

        let mut parent_of = [None; NUM_JOINTS];
        for (i, &p) in file.parents.iter().enumerate() {
            if i == 0 {
                if p != -1 {
                    return Err(invalid("pelvis must be the root (parent -1)".into()));
                }
                continue;
            }
            let parent = usize::try_from(p)
                .ok()
                .and_then(JointId::from_index)
                .ok_or_else(|| invalid(format!("joint {i} has invalid parent {p}")))?;
            if parent.index() == i {
                return Err(invalid(format!("joint {i} is its own parent")));
            }
            parent_of[i] = Some(parent);
        }
        for start in 1..NUM_JOINTS {
            let mut j = start;
            let mut steps = 0;
            while let Some(p) = parent_of[j] {
                j = p.index();
                steps += 1;
                if steps > NUM_JOINTS {
                    return Err(invalid(format!("cycle through joint {start}")));
                }
            }
            if j != 0 {
                return Err(invalid(format!("joint {start} is not connected to the pelvis")));
            }
        }

        let mut topo_order = vec![JointId::Pelvis];
        let mut head = 0;
        while head < topo_order.len() {
            let current = topo_order[head];
            head += 1;
            for j in JointId::ALL {
                if parent_of[j.index()] == Some(current) {
                    topo_order.push(j);
                }
            }
        }

        let mut bones = Vec::with_capacity(NUM_BONES);
        let mut bone_of_child = [None; NUM_JOINTS];
        for child in JointId::ALL.into_iter().skip(1) {
            let parent = parent_of[child.index()].expect("non-root joints have parents");
            let name = match file.bone_names.as_ref().and_then(|m| m.get(child.name())) {
                Some(name) => name.clone(),
                None => match standard_bone_name(child) {
                    Some(n) if STANDARD_PARENTS[child.index()] == parent.index() as i64 => {
                        n.to_string()
                    }
                    _ => format!("{}_{}", parent.name(), child.name()),
                },
            };
            if bones.iter().any(|b: &Bone| b.name == name) {
                return Err(invalid(format!("duplicate bone name `{name}`")));
            }
            bone_of_child[child.index()] = Some(BoneId(bones.len()));
            bones.push(Bone {
                parent,
                child,
                name,
            });
        }

        let bone_by_name = |name: &str| -> Result<BoneId> {
            bones
                .iter()
                .position(|b| b.name == name)
                .map(BoneId)
                .ok_or_else(|| Error::UnknownBone(name.to_string()))
        };
        let bone_by_child = |idx: usize| -> Result<BoneId> {
            JointId::from_index(idx)
                .and_then(|j| bone_of_child[j.index()])
                .ok_or_else(|| invalid(format!("lr_pairs entry {idx} names no bone")))
        };

        let mut lr_pairs = Vec::with_capacity(file.lr_pairs.len());
        for [r, l] in &file.lr_pairs {
            let pair = (bone_by_child(*r)?, bone_by_child(*l)?);
            if pair.0 == pair.1 {
                return Err(invalid(format!("bone pair ({r}, {l}) pairs a bone with itself")));
            }
            lr_pairs.push(pair);
        }

        let mut symmetry_set = Vec::with_capacity(file.symmetry_set.len());
        for name in &file.symmetry_set {
            let b = bone_by_name(name)?;
            if !lr_pairs.iter().any(|(r, _)| *r == b) {
                return Err(invalid(format!(
                    "symmetry bone `{name}` has no left counterpart in lr_pairs"
                )));
            }
            symmetry_set.push(b);
        }

        let mut canonical_lengths = vec![0.0; bones.len()];
        for (i, bone) in bones.iter().enumerate() {
            let len = *file
                .canonical_lengths
                .get(&bone.name)
                .ok_or_else(|| invalid(format!("missing canonical length for `{}`", bone.name)))?;
            if !(len > 0.0 && len.is_finite()) {
                return Err(invalid(format!(
                    "canonical length of `{}` must be positive, got {len}",
                    bone.name
                )));
            }
            canonical_lengths[i] = len;
        }
        for name in file.canonical_lengths.keys() {
            bone_by_name(name)?;
        }

        let mut ratio_priors = Vec::with_capacity(file.ratio_priors.len());
        for (a, b, r) in &file.ratio_priors {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("ratio prior {a}/{b} must be positive, got {r}")));
            }
            ratio_priors.push(RatioPrior {
                numerator: bone_by_name(a)?,
                denominator: bone_by_name(b)?,
                ratio: *r,
            });
        }

        let angle_entries = file.angle_joints.clone().unwrap_or_else(|| {
            STANDARD_ANGLE_JOINTS
                .iter()
                .map(|(j, p0, p1, limb, s)| AngleJointEntry {
                    joint: j.to_string(),
                    plane_bones: [p0.to_string(), p1.to_string()],
                    limb_bone: limb.to_string(),
                    legal_side: *s,
                })
                .collect()
        });
        let mut angle_joints = Vec::with_capacity(angle_entries.len());
        for entry in &angle_entries {
            let spec = AngleJointSpec {
                joint: JointId::from_name(&entry.joint)?,
                plane_bones: [
                    bone_by_name(&entry.plane_bones[0])?,
                    bone_by_name(&entry.plane_bones[1])?,
                ],
                limb_bone: bone_by_name(&entry.limb_bone)?,
                legal_side: LegalSide::from_sign(entry.legal_side)?,
            };
            let [p0, p1] = spec.plane_bones.map(|b| &bones[b.0]);
            let limb = &bones[spec.limb_bone.0];
            if p1.parent != p0.child || limb.parent != p1.child || limb.parent != spec.joint {
                return Err(invalid(format!(
                    "angle joint `{}` bones do not form a chain ending at the joint",
                    entry.joint
                )));
            }
            angle_joints.push(spec);
        }

        Ok(Skeleton {
            bones,
            parent_of,
            bone_of_child,
            topo_order,
            lr_pairs,
            symmetry_set,
            angle_joints,
            canonical_lengths,
            ratio_priors,
        })
    }

    /// Serializable form; round-trips through [`Skeleton::from_file`].
    pub fn to_file(&self) -> SkeletonFile {
        let names = |ids: &[BoneId]| ids.iter().map(|b| self.bones[b.0].name.clone()).collect();
        let bone_names: BTreeMap<String, String> = self
            .bones
            .iter()
            .map(|b| (b.child.name().to_string(), b.name.clone()))
            .collect();
        let standard = self
            .bones
            .iter()
            .all(|b| standard_bone_name(b.child) == Some(b.name.as_str()));
        SkeletonFile {
            joints: JointId::ALL.iter().map(|j| j.name().to_string()).collect(),
            parents: self
                .parent_of
                .iter()
                .map(|p| p.map_or(-1, |p| p.index() as i64))
                .collect(),
            lr_pairs: self
                .lr_pairs
                .iter()
                .map(|(r, l)| [self.bones[r.0].child.index(), self.bones[l.0].child.index()])
                .collect(),
            symmetry_set: names(&self.symmetry_set),
            canonical_lengths: self
                .bones
                .iter()
                .zip(&self.canonical_lengths)
                .map(|(b, l)| (b.name.clone(), *l))
                .collect(),
            ratio_priors: self
                .ratio_priors
                .iter()
                .map(|p| {
                    (
                        self.bones[p.numerator.0].name.clone(),
                        self.bones[p.denominator.0].name.clone(),
                        p.ratio,
                    )
                })
                .collect(),
            bone_names: (!standard).then_some(bone_names),
            angle_joints: Some(
                self.angle_joints
                    .iter()
                    .map(|a| AngleJointEntry {
                        joint: a.joint.name().to_string(),
                        plane_bones: a.plane_bones.map(|b| self.bones[b.0].name.clone()),
                        limb_bone: self.bones[a.limb_bone.0].name.clone(),
                        legal_side: a.legal_side.sign() as i8,
                    })
                    .collect(),
            ),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("skeleton serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_pretty() + "\n")?;
        Ok(())
    }

    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    pub fn bone(&self, id: BoneId) -> &Bone {
        &self.bones[id.0]
    }

    pub fn bone_ids(&self) -> impl Iterator<Item = BoneId> + '_ {
        (0..self.bones.len()).map(BoneId)
    }

    pub fn bone_by_name(&self, name: &str) -> Result<BoneId> {
        self.bones
            .iter()
            .position(|b| b.name == name)
            .map(BoneId)
            .ok_or_else(|| Error::UnknownBone(name.to_string()))
    }

    /// The bone ending at `joint`; `None` for the pelvis.
    pub fn bone_of_child(&self, joint: JointId) -> Option<BoneId> {
        self.bone_of_child[joint.index()]
    }

    pub fn parent_of(&self, joint: JointId) -> Option<JointId> {
        self.parent_of[joint.index()]
    }

    pub fn topological_order(&self) -> &[JointId] {
        &self.topo_order
    }

    pub fn lr_pairs(&self) -> &[(BoneId, BoneId)] {
        &self.lr_pairs
    }

    pub fn symmetry_set(&self) -> &[BoneId] {
        &self.symmetry_set
    }

    /// Left counterpart of a right-side bone.
    pub fn counterpart(&self, right: BoneId) -> Option<BoneId> {
        self.lr_pairs
            .iter()
            .find(|(r, _)| *r == right)
            .map(|(_, l)| *l)
    }

    pub fn angle_joints(&self) -> &[AngleJointSpec] {
        &self.angle_joints
    }

    pub fn canonical_lengths(&self) -> &[f64] {
        &self.canonical_lengths
    }

    pub fn canonical_length(&self, bone: BoneId) -> f64 {
        self.canonical_lengths[bone.0]
    }

    pub fn ratio_priors(&self) -> &[RatioPrior] {
        &self.ratio_priors
    }

    pub fn with_ratio_priors(mut self, priors: Vec<RatioPrior>) -> Result<Self> {
        if let Some(p) = priors.iter().find(|p| !(p.ratio > 0.0 && p.ratio.is_finite())) {
            return Err(Error::InvalidSkeleton(format!("ratio prior must be positive, got {}", p.ratio)));
        }
        self.ratio_priors = priors;
        Ok(self)
    }

    pub fn with_canonical_lengths(mut self, lengths: Vec<f64>) -> Result<Self> {
        if lengths.len() != self.bones.len() || lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSkeleton(
                "canonical lengths must be positive, one per bone".into(),
            ));
        }
        self.canonical_lengths = lengths;
        Ok(self)
    }

    /// Lengths of every bone of `pose`, indexed by [`BoneId`].
    pub fn bone_lengths(&self, pose: &Pose3D) -> Vec<f64> {
        self.bones.iter().map(|b| bone_length(pose, b)).collect()
    }

    /// Reads a per-bone length table keyed by bone name (every bone required).
    pub fn lengths_from_map(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        for name in map.keys() {
            self.bone_by_name(name)?;
        }
        self.bones
            .iter()
            .map(|b| {
                map.get(&b.name)
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("no target length for `{}`", b.name)))
            })
            .collect()
    }
}

impl fmt::Display for Bone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} -> {})", self.name, self.parent, self.child)
    }
}
