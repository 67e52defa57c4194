//! Joint indexing and the pose value types.
//!
//! Poses are stored in millimeters in a body-centred frame: `+x` points to
//! the subject's left, `+y` up and `+z` forward (out of the chest). The
//! sign conventions of the illegal-angle loss are stated in this frame.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

pub const NUM_JOINTS: usize = 16;

/// One of the sixteen body joints. The discriminant is the joint index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum JointId {
    Pelvis = 0,
    RHip,
    RKnee,
    RAnkle,
    LHip,
    LKnee,
    LAnkle,
    Spine,
    Neck,
    Head,
    LShoulder,
    LElbow,
    LWrist,
    RShoulder,
    RElbow,
    RWrist,
}

impl JointId {
    pub const ALL: [JointId; NUM_JOINTS] = [
        JointId::Pelvis,
        JointId::RHip,
        JointId::RKnee,
        JointId::RAnkle,
        JointId::LHip,
        JointId::LKnee,
        JointId::LAnkle,
        JointId::Spine,
        JointId::Neck,
        JointId::Head,
        JointId::LShoulder,
        JointId::LElbow,
        JointId::LWrist,
        JointId::RShoulder,
        JointId::RElbow,
        JointId::RWrist,
    ];

    const NAMES: [&'static str; NUM_JOINTS] = [
        "pelvis",
        "r_hip",
        "r_knee",
        "r_ankle",
        "l_hip",
        "l_knee",
        "l_ankle",
        "spine",
        "neck",
        "head",
        "l_shoulder",
        "l_elbow",
        "l_wrist",
        "r_shoulder",
        "r_elbow",
        "r_wrist",
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<JointId> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Result<JointId> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    /// The same joint on the other side of the body; midline joints map to
    /// themselves.
    pub fn mirror(self) -> JointId {
        use JointId::*;
        match self {
            RHip => LHip,
            RKnee => LKnee,
            RAnkle => LAnkle,
            LHip => RHip,
            LKnee => RKnee,
            LAnkle => RAnkle,
            LShoulder => RShoulder,
            LElbow => RElbow,
            LWrist => RWrist,
            RShoulder => LShoulder,
            RElbow => LElbow,
            RWrist => LWrist,
            other => other,
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sixteen 3D joint positions in millimeters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose3D {
    joints: [Vec3; NUM_JOINTS],
}

impl Default for Pose3D {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Pose3D {
    pub fn new(joints: [Vec3; NUM_JOINTS]) -> Self {
        Self { joints }
    }

    pub fn zeros() -> Self {
        Self {
            joints: [Vec3::zeros(); NUM_JOINTS],
        }
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        if rows.len() != NUM_JOINTS {
            return Err(Error::ShapeMismatch {
                expected: format!("{NUM_JOINTS} joints"),
                got: format!("{} joints", rows.len()),
            });
        }
        let mut pose = Self::zeros();
        for (dst, row) in pose.joints.iter_mut().zip(rows) {
            *dst = Vec3::new(row[0], row[1], row[2]);
        }
        Ok(pose)
    }

    pub fn to_rows(&self) -> [[f64; 3]; NUM_JOINTS] {
        let mut rows = [[0.0; 3]; NUM_JOINTS];
        for (row, p) in rows.iter_mut().zip(&self.joints) {
            *row = [p.x, p.y, p.z];
        }
        rows
    }

    /// Joint-major flattening: `[x0, y0, z0, x1, ...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != 3 * NUM_JOINTS {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", 3 * NUM_JOINTS),
                got: format!("{} values", flat.len()),
            });
        }
        let mut pose = Self::zeros();
        for (j, p) in pose.joints.iter_mut().enumerate() {
            *p = Vec3::new(flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]);
        }
        Ok(pose)
    }

    pub fn to_flat(&self) -> [f64; 3 * NUM_JOINTS] {
        let mut flat = [0.0; 3 * NUM_JOINTS];
        self.write_flat(&mut flat);
        flat
    }

    pub fn write_flat(&self, out: &mut [f64]) {
        for (j, p) in self.joints.iter().enumerate() {
            out[3 * j] = p.x;
            out[3 * j + 1] = p.y;
            out[3 * j + 2] = p.z;
        }
    }

    /// Combines ground-truth image-plane coordinates with a depth column.
    pub fn from_xy_z(xy: &Pose2D, z: &[f64; NUM_JOINTS]) -> Self {
        let mut pose = Self::zeros();
        for j in 0..NUM_JOINTS {
            pose.joints[j] = Vec3::new(xy[j].x, xy[j].y, z[j]);
        }
        pose
    }

    pub fn joints(&self) -> &[Vec3; NUM_JOINTS] {
        &self.joints
    }

    pub fn joints_mut(&mut self) -> &mut [Vec3; NUM_JOINTS] {
        &mut self.joints
    }

    pub fn depths(&self) -> [f64; NUM_JOINTS] {
        let mut z = [0.0; NUM_JOINTS];
        for (dst, p) in z.iter_mut().zip(&self.joints) {
            *dst = p.z;
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.joints.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Translates every joint so the pelvis sits exactly at the origin.
    pub fn root_center(&self) -> Pose3D {
        let root = self.joints[JointId::Pelvis.index()];
        let mut out = *self;
        for p in out.joints.iter_mut() {
            *p -= root;
        }
        // Subtraction of a value from itself is exact, but keep the
        // postcondition explicit for signed zeros.
        out.joints[0] = Vec3::zeros();
        out
    }

    pub fn translate(&self, offset: &Vec3) -> Pose3D {
        self.map(|p| p + offset)
    }

    /// Applies `p ↦ scale · R · p + t` to every joint.
    pub fn transform(&self, rotation: &Matrix3<f64>, scale: f64, translation: &Vec3) -> Pose3D {
        self.map(|p| scale * (rotation * p) + translation)
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Pose3D {
        let mut out = *self;
        for p in out.joints.iter_mut() {
            *p = f(p);
        }
        out
    }

    /// Negates every depth coordinate.
    pub fn reflect_depth(&self) -> Pose3D {
        self.map(|p| Vec3::new(p.x, p.y, -p.z))
    }

    /// Reflects through the sagittal plane (`x ↦ −x`) and swaps left and
    /// right joint labels, producing the anatomical mirror image.
    pub fn mirror(&self) -> Pose3D {
        let mut out = Pose3D::zeros();
        for j in JointId::ALL {
            let p = self[j];
            out[j.mirror()] = Vec3::new(-p.x, p.y, p.z);
        }
        out
    }

    /// Orthographic projection: drops the depth column.
    pub fn xy(&self) -> Pose2D {
        let mut out = Pose2D::zeros();
        for j in 0..NUM_JOINTS {
            out.joints[j] = self.joints[j].xy();
        }
        out
    }
}

impl Index<usize> for Pose3D {
    type Output = Vec3;
    fn index(&self, index: usize) -> &Vec3 {
        &self.joints[index]
    }
}

impl IndexMut<usize> for Pose3D {
    fn index_mut(&mut self, index: usize) -> &mut Vec3 {
        &mut self.joints[index]
    }
}

impl Index<JointId> for Pose3D {
    type Output = Vec3;
    fn index(&self, joint: JointId) -> &Vec3 {
        &self.joints[joint.index()]
    }
}

impl IndexMut<JointId> for Pose3D {
    fn index_mut(&mut self, joint: JointId) -> &mut Vec3 {
        &mut self.joints[joint.index()]
    }
}

/// Sixteen image-plane joint positions, same metric scale as [`Pose3D`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2D {
    joints: [Vec2; NUM_JOINTS],
}

impl Pose2D {
    pub fn new(joints: [Vec2; NUM_JOINTS]) -> Self {
        Self { joints }
    }

    pub fn zeros() -> Self {
        Self {
            joints: [Vec2::zeros(); NUM_JOINTS],
        }
    }

    pub fn joints(&self) -> &[Vec2; NUM_JOINTS] {
        &self.joints
    }

    pub fn is_finite(&self) -> bool {
        self.joints.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }
}

impl Index<usize> for Pose2D {
    type Output = Vec2;
    fn index(&self, index: usize) -> &Vec2 {
        &self.joints[index]
    }
}

impl Index<JointId> for Pose2D {
    type Output = Vec2;
    fn index(&self, joint: JointId) -> &Vec2 {
        &self.joints[joint.index()]
    }
}

/// Time-ordered poses at a fixed frame rate, optionally paired with ground
/// truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    frames: Vec<Pose3D>,
    fps: f64,
    ground_truth: Option<Vec<Pose3D>>,
}

impl PoseSequence {
    pub fn new(frames: Vec<Pose3D>, fps: f64, ground_truth: Option<Vec<Pose3D>>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidConfig(format!("fps must be positive, got {fps}")));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != frames.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} ground-truth frames", frames.len()),
                    got: format!("{}", gt.len()),
                });
            }
        }
        Ok(Self {
            frames,
            fps,
            ground_truth,
        })
    }

    pub fn frames(&self) -> &[Pose3D] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn ground_truth(&self) -> Option<&[Pose3D]> {
        self.ground_truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Replaces the frames, keeping fps and ground truth.
    pub fn with_frames(&self, frames: Vec<Pose3D>) -> Result<Self> {
        Self::new(frames, self.fps, self.ground_truth.clone())
    }

    pub fn with_ground_truth(self, ground_truth: Option<Vec<Pose3D>>) -> Result<Self> {
        Self::new(self.frames, self.fps, ground_truth)
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.len());
        let start = start.min(end);
        Self::new(
            self.frames[start..end].to_vec(),
            self.fps,
            self.ground_truth.as_ref().map(|gt| gt[start..end].to_vec()),
        )
    }
}
