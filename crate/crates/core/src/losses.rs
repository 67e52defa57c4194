//! Anatomical loss terms with exact analytic gradients.
//!
//! * illegal-angle loss: penalises elbows and knees bent past straight,
//! * symmetry loss: absolute left/right bone-length differences,
//! * geometry loss: squared deviation of bone-length ratios from priors,
//! * their weighted sum, evaluated on ground-truth `xy` with free depths.
//!
//! Every term returns its value together with the gradient with respect to
//! all sixteen joint positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{JointId, Pose2D, Pose3D, Vec3, NUM_JOINTS};
use crate::skeleton::{bone_vector, AngleJointSpec, Bone, Skeleton};

/// Gradient with respect to every joint position.
pub type JointGrad = [Vec3; NUM_JOINTS];

/// Bones shorter than this (mm) have no defined direction.
pub const MIN_BONE_LENGTH: f64 = 1e-6;

/// Relative threshold on `|a × b| / (|a| |b|)` below which the limb plane
/// is considered undefined.
pub const DEGENERATE_PLANE_SINE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_a: f64,
    pub lambda_s: f64,
    pub lambda_g: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_a: 0.03,
            lambda_s: 0.05,
            lambda_g: 0.03,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            lambda_a: 0.0,
            lambda_s: 0.0,
            lambda_g: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_s", self.lambda_s),
            ("lambda_g", self.lambda_g),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Weighted sum, accumulated angle → symmetry → geometry.
    #[inline]
    pub fn combine(&self, angle: f64, symmetry: f64, geometry: f64) -> f64 {
        self.lambda_a * angle + self.lambda_s * symmetry + self.lambda_g * geometry
    }
}

/// How the plane normal and limb are compared in the illegal-angle loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Unit normal against unit limb direction; magnitudes stay in `[0, 1]`.
    #[default]
    Unit,
    /// Raw dot product of the unnormalised vectors. Only sensible for
    /// unit-scale poses, as `m·e^m` overflows for millimeter inputs.
    RawDot,
}

/// A loss value and its gradient with respect to the joints.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: JointGrad,
}

impl LossValue {
    fn zero() -> Self {
        Self {
            value: 0.0,
            grad: [Vec3::zeros(); NUM_JOINTS],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gradient {
    /// Per-joint 3-vectors.
    Full(JointGrad),
    /// Per-joint depth derivatives only.
    Depth([f64; NUM_JOINTS]),
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        match self {
            Gradient::Full(g) => g.iter().all(|v| v.iter().all(|c| c.is_finite())),
            Gradient::Depth(g) => g.iter().all(|c| c.is_finite()),
        }
    }
}

/// Per-term values of the structure-aware loss plus the gradient of the total.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub angle: f64,
    pub symmetry: f64,
    pub geometry: f64,
    pub grad: Gradient,
}

/// Evaluation of one angle-limited joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleTerm {
    pub joint: JointId,
    /// Component of the limb along the plane normal (cosine in unit mode).
    pub projection: f64,
    /// Illegality `max(0, −side · projection)`.
    pub magnitude: f64,
    /// `magnitude · e^magnitude`.
    pub value: f64,
    /// The plane or limb direction was undefined; the term is zero.
    pub degenerate: bool,
}

impl AngleTerm {
    pub fn is_illegal(&self) -> bool {
        self.magnitude > 0.0
    }
}

#[inline]
fn scatter(grad: &mut JointGrad, bone: &Bone, g: &Vec3) {
    grad[bone.child.index()] += g;
    grad[bone.parent.index()] -= g;
}

/// Evaluates one angle joint; optionally accumulates `scale · ∂term/∂joints`.
fn eval_angle_joint(
    pose: &Pose3D,
    skeleton: &Skeleton,
    spec: &AngleJointSpec,
    mode: AngleMode,
    grad: Option<(&mut JointGrad, f64)>,
) -> AngleTerm {
    let plane0 = skeleton.bone(spec.plane_bones[0]);
    let plane1 = skeleton.bone(spec.plane_bones[1]);
    let limb = skeleton.bone(spec.limb_bone);
    let a = bone_vector(pose, plane0);
    let b = bone_vector(pose, plane1);
    let c = bone_vector(pose, limb);
    let n = a.cross(&b);
    let n_norm = n.norm();
    let c_norm = c.norm();

    let degenerate = n_norm <= DEGENERATE_PLANE_SINE * a.norm() * b.norm() || c_norm == 0.0;
    if degenerate {
        return AngleTerm {
            joint: spec.joint,
            projection: 0.0,
            magnitude: 0.0,
            value: 0.0,
            degenerate: true,
        };
    }

    let (projection, grad_n, grad_c) = match mode {
        AngleMode::Unit => {
            let n_hat = n / n_norm;
            let c_hat = c / c_norm;
            let d = n_hat.dot(&c_hat);
            (d, (c_hat - d * n_hat) / n_norm, (n_hat - d * c_hat) / c_norm)
        }
        AngleMode::RawDot => (n.dot(&c), c, n),
    };

    let side = spec.legal_side.sign();
    let magnitude = (-side * projection).max(0.0);
    let exp_m = magnitude.exp();
    let value = magnitude * exp_m;

    if let Some((grad, scale)) = grad {
        // The clip is inactive on the legal side, including m = 0 itself.
        if magnitude > 0.0 {
            let dvalue_dd = -side * (1.0 + magnitude) * exp_m * scale;
            let g_n = grad_n * dvalue_dd;
            scatter(grad, plane0, &b.cross(&g_n));
            scatter(grad, plane1, &g_n.cross(&a));
            scatter(grad, limb, &(grad_c * dvalue_dd));
        }
    }

    AngleTerm {
        joint: spec.joint,
        projection,
        magnitude,
        value,
        degenerate: false,
    }
}

/// Per-joint breakdown of the illegal-angle loss, in skeleton order.
pub fn angle_terms(pose: &Pose3D, skeleton: &Skeleton, mode: AngleMode) -> Vec<AngleTerm> {
    skeleton
        .angle_joints()
        .iter()
        .map(|spec| eval_angle_joint(pose, skeleton, spec, mode, None))
        .collect()
}

/// Illegal-angle loss with unit-normalised vectors.
pub fn illegal_angle_loss(pose: &Pose3D, skeleton: &Skeleton) -> LossValue {
    illegal_angle_loss_with(pose, skeleton, AngleMode::Unit)
}

pub fn illegal_angle_loss_with(pose: &Pose3D, skeleton: &Skeleton, mode: AngleMode) -> LossValue {
    let mut out = LossValue::zero();
    for spec in skeleton.angle_joints() {
        let term = eval_angle_joint(pose, skeleton, spec, mode, Some((&mut out.grad, 1.0)));
        out.value += term.value;
    }
    out
}

#[inline]
fn length_grad(v: &Vec3, len: f64) -> Vec3 {
    if len > 0.0 {
        v / len
    } else {
        Vec3::zeros()
    }
}

/// Sum over the symmetry set of `|length(right) − length(left)|`.
pub fn symmetry_loss(pose: &Pose3D, skeleton: &Skeleton) -> LossValue {
    let mut out = LossValue::zero();
    for &right in skeleton.symmetry_set() {
        let left = skeleton
            .counterpart(right)
            .expect("validated skeleton pairs every symmetry bone");
        let (rb, lb) = (skeleton.bone(right), skeleton.bone(left));
        let (rv, lv) = (bone_vector(pose, rb), bone_vector(pose, lb));
        let (rl, ll) = (rv.norm(), lv.norm());
        let diff = rl - ll;
        out.value += diff.abs();
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            scatter(&mut out.grad, rb, &(length_grad(&rv, rl) * sign));
            scatter(&mut out.grad, lb, &(length_grad(&lv, ll) * -sign));
        }
    }
    out
}

/// Sum over the ratio priors of `(length(a) / length(b) − r)²`.
pub fn geometry_loss(pose: &Pose3D, skeleton: &Skeleton) -> Result<LossValue> {
    if skeleton.ratio_priors().is_empty() {
        return Err(Error::InvalidSkeleton("geometry loss needs at least one ratio prior".into()));
    }
    let mut out = LossValue::zero();
    for prior in skeleton.ratio_priors() {
        let (nb, db) = (skeleton.bone(prior.numerator), skeleton.bone(prior.denominator));
        let (nv, dv) = (bone_vector(pose, nb), bone_vector(pose, db));
        let (nl, dl) = (nv.norm(), dv.norm());
        if dl < MIN_BONE_LENGTH {
            return Err(Error::DegenerateBone {
                bone: db.name.clone(),
                length: dl,
            });
        }
        let err = nl / dl - prior.ratio;
        out.value += err * err;
        let d_num = 2.0 * err / dl;
        let d_den = -2.0 * err * nl / (dl * dl);
        scatter(&mut out.grad, nb, &(length_grad(&nv, nl) * d_num));
        scatter(&mut out.grad, db, &(length_grad(&dv, dl) * d_den));
    }
    Ok(out)
}

/// Weighted structure-aware loss of a full 3D pose with the gradient over
/// all coordinates.
pub fn structure_aware_loss_3d(
    pose: &Pose3D,
    skeleton: &Skeleton,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let angle = illegal_angle_loss(pose, skeleton);
    let symmetry = symmetry_loss(pose, skeleton);
    let geometry = geometry_loss(pose, skeleton)?;
    let mut grad = [Vec3::zeros(); NUM_JOINTS];
    for (j, g) in grad.iter_mut().enumerate() {
        *g = angle.grad[j] * weights.lambda_a
            + symmetry.grad[j] * weights.lambda_s
            + geometry.grad[j] * weights.lambda_g;
    }
    Ok(LossBreakdown {
        total: weights.combine(angle.value, symmetry.value, geometry.value),
        angle: angle.value,
        symmetry: symmetry.value,
        geometry: geometry.value,
        grad: Gradient::Full(grad),
    })
}

/// Weakly supervised loss: ground-truth `xy` with free depths `z`. Only the
/// depth components of the gradient are returned.
pub fn structure_aware_loss(
    xy: &Pose2D,
    z: &[f64; NUM_JOINTS],
    skeleton: &Skeleton,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let pose = Pose3D::from_xy_z(xy, z);
    let mut out = structure_aware_loss_3d(&pose, skeleton, weights)?;
    if let Gradient::Full(g) = &out.grad {
        let mut dz = [0.0; NUM_JOINTS];
        for (dst, v) in dz.iter_mut().zip(g) {
            *dst = v.z;
        }
        out.grad = Gradient::Depth(dz);
    }
    Ok(out)
}

/// Squared Euclidean depth error and its gradient `2 (z − z_gt)`.
pub fn supervised_depth_loss(
    z: &[f64; NUM_JOINTS],
    z_gt: &[f64; NUM_JOINTS],
) -> (f64, [f64; NUM_JOINTS]) {
    let mut value = 0.0;
    let mut grad = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let diff = z[i] - z_gt[i];
        value += diff * diff;
        grad[i] = 2.0 * diff;
    }
    (value, grad)
}
