//! Pose-evaluation metrics: MPJPE, Procrustes-aligned MPJPE, PCK/AUC and a
//! structural validity report (left/right bone differences, bone-length
//! stability, illegal joint-angle rate).

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{angle_terms, AngleMode};
use crate::pose::{Pose3D, Vec3, NUM_JOINTS};
use crate::skeleton::{bone_length, Skeleton};

/// Mean Euclidean joint distance (mm).
pub fn mpjpe(pred: &Pose3D, gt: &Pose3D) -> f64 {
    let sum: f64 = (0..NUM_JOINTS).map(|j| (pred[j] - gt[j]).norm()).sum();
    sum / NUM_JOINTS as f64
}

/// `p ↦ scale · rotation · p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, pose: &Pose3D) -> Pose3D {
        pose.transform(&self.rotation, self.scale, &self.translation)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Rotation, uniform scale and translation.
    #[default]
    Similarity,
    /// Rotation and translation only.
    Rigid,
}

/// Least-squares transform taking `source` onto `target`
/// (`min Σ ‖s R p_i + t − q_i‖²`), with `det R = +1`.
pub fn procrustes_align(source: &Pose3D, target: &Pose3D) -> Result<SimilarityTransform> {
    procrustes_align_with(source, target, Alignment::Similarity)
}

pub fn procrustes_align_with(
    source: &Pose3D,
    target: &Pose3D,
    alignment: Alignment,
) -> Result<SimilarityTransform> {
    let n = NUM_JOINTS as f64;
    let mu_p = source.joints().iter().sum::<Vec3>() / n;
    let mu_q = target.joints().iter().sum::<Vec3>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_p = 0.0;
    for j in 0..NUM_JOINTS {
        let p = source[j] - mu_p;
        let q = target[j] - mu_q;
        cov += q * p.transpose();
        var_p += p.norm_squared();
    }
    cov /= n;
    var_p /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut sv = svd.singular_values;
    // nalgebra does not promise sorted singular values.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if !(sv[order[0]] > 0.0) || sv[order[1]] <= 1e-12 * sv[order[0]] || var_p <= 0.0 {
        return Err(Error::DegeneratePointSet(
            "cross-covariance has rank < 2 (collinear or coincident joints)".into(),
        ));
    }

    let mut correction = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // Flip the direction of the smallest singular value.
        correction[(order[2], order[2])] = -1.0;
        sv[order[2]] = -sv[order[2]];
    }
    let rotation = u * correction * v_t;
    let scale = match alignment {
        Alignment::Similarity => sv.sum() / var_p,
        Alignment::Rigid => 1.0,
    };
    let translation = mu_q - scale * (rotation * mu_p);
    Ok(SimilarityTransform {
        rotation,
        scale,
        translation,
    })
}

/// MPJPE after aligning `pred` onto `gt`.
pub fn pampjpe(pred: &Pose3D, gt: &Pose3D) -> Result<f64> {
    pampjpe_with(pred, gt, Alignment::Similarity)
}

pub fn pampjpe_with(pred: &Pose3D, gt: &Pose3D, alignment: Alignment) -> Result<f64> {
    let t = procrustes_align_with(pred, gt, alignment)?;
    Ok(mpjpe(&t.apply(pred), gt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PckConfig {
    pub threshold_mm: f64,
    /// AUC thresholds run from 0 to `auc_max_mm` inclusive in `auc_step_mm` steps.
    pub auc_max_mm: f64,
    pub auc_step_mm: f64,
}

impl Default for PckConfig {
    fn default() -> Self {
        Self {
            threshold_mm: 150.0,
            auc_max_mm: 150.0,
            auc_step_mm: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PckAuc {
    pub pck: f64,
    pub auc: f64,
}

fn joint_distances(preds: &[Pose3D], gts: &[Pose3D]) -> Result<Vec<f64>> {
    if preds.len() != gts.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} ground-truth frames", preds.len()),
            got: format!("{}", gts.len()),
        });
    }
    Ok(preds
        .iter()
        .zip(gts)
        .flat_map(|(p, g)| (0..NUM_JOINTS).map(move |j| (p[j] - g[j]).norm()))
        .collect())
}

fn fraction_within(distances: &[f64], threshold: f64) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.iter().filter(|d| **d <= threshold).count() as f64 / distances.len() as f64
}

/// Fraction of joints within the threshold, and its mean over the AUC sweep.
pub fn pck_auc(preds: &[Pose3D], gts: &[Pose3D], config: &PckConfig) -> Result<PckAuc> {
    if !(config.auc_step_mm > 0.0 && config.auc_max_mm >= 0.0) {
        return Err(Error::InvalidConfig("AUC sweep needs a positive step".into()));
    }
    let distances = joint_distances(preds, gts)?;
    let steps = (config.auc_max_mm / config.auc_step_mm).round() as usize;
    let auc = (0..=steps)
        .map(|k| fraction_within(&distances, k as f64 * config.auc_step_mm))
        .sum::<f64>()
        / (steps + 1) as f64;
    Ok(PckAuc {
        pck: fraction_within(&distances, config.threshold_mm),
        auc,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Mean over frames of `|length(right) − length(left)|` per bone pair,
    /// named by the right bone.
    pub pair_l1_mm: Vec<NamedValue>,
    pub mean_pair_l1_mm: f64,
    /// Population standard deviation of each bone's length across frames.
    pub bone_length_std_mm: Vec<NamedValue>,
    pub mean_bone_length_std_mm: f64,
    /// Fraction of (frame, angle-limited joint) pairs that are illegal.
    pub illegal_angle_rate: f64,
    pub illegal_angle_count: usize,
    pub angle_joint_count: usize,
}

pub fn validity_report(frames: &[Pose3D], skeleton: &Skeleton) -> Result<ValidityReport> {
    if frames.is_empty() {
        return Err(Error::InvalidConfig("validity report needs at least one frame".into()));
    }
    let n = frames.len() as f64;
    let lengths: Vec<Vec<f64>> = frames.iter().map(|f| skeleton.bone_lengths(f)).collect();

    let pair_l1_mm: Vec<NamedValue> = skeleton
        .lr_pairs()
        .iter()
        .map(|(r, l)| NamedValue {
            name: skeleton.bone(*r).name.clone(),
            value: lengths.iter().map(|ls| (ls[r.0] - ls[l.0]).abs()).sum::<f64>() / n,
        })
        .collect();

    let bone_length_std_mm: Vec<NamedValue> = skeleton
        .bone_ids()
        .map(|b| {
            let mean = lengths.iter().map(|ls| ls[b.0]).sum::<f64>() / n;
            let var = lengths.iter().map(|ls| (ls[b.0] - mean).powi(2)).sum::<f64>() / n;
            NamedValue {
                name: skeleton.bone(b).name.clone(),
                value: var.sqrt(),
            }
        })
        .collect();

    let mut illegal = 0;
    for f in frames {
        illegal += angle_terms(f, skeleton, AngleMode::Unit)
            .iter()
            .filter(|t| t.is_illegal())
            .count();
    }
    let total = frames.len() * skeleton.angle_joints().len();

    let mean = |v: &[NamedValue]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().map(|x| x.value).sum::<f64>() / v.len() as f64
        }
    };
    Ok(ValidityReport {
        mean_pair_l1_mm: mean(&pair_l1_mm),
        pair_l1_mm,
        mean_bone_length_std_mm: mean(&bone_length_std_mm),
        bone_length_std_mm,
        illegal_angle_rate: if total == 0 { 0.0 } else { illegal as f64 / total as f64 },
        illegal_angle_count: illegal,
        angle_joint_count: total,
    })
}

/// Everything the `metrics` command reports for a prediction sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    pub pck: f64,
    pub auc: f64,
    pub pck_threshold_mm: f64,
    pub alignment: Alignment,
    pub validity: ValidityReport,
}

pub fn evaluate(
    preds: &[Pose3D],
    gts: &[Pose3D],
    skeleton: &Skeleton,
    pck: &PckConfig,
    alignment: Alignment,
) -> Result<MetricsReport> {
    if preds.len() != gts.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} ground-truth frames", preds.len()),
            got: format!("{}", gts.len()),
        });
    }
    let n = preds.len().max(1) as f64;
    let mpjpe_mm = preds.iter().zip(gts).map(|(p, g)| mpjpe(p, g)).sum::<f64>() / n;
    let mut pa = 0.0;
    for (p, g) in preds.iter().zip(gts) {
        pa += pampjpe_with(p, g, alignment)?;
    }
    let PckAuc { pck: pck_value, auc } = pck_auc(preds, gts, pck)?;
    Ok(MetricsReport {
        frames: preds.len(),
        mpjpe_mm,
        pa_mpjpe_mm: pa / n,
        pck: pck_value,
        auc,
        pck_threshold_mm: pck.threshold_mm,
        alignment,
        validity: validity_report(preds, skeleton)?,
    })
}

/// Per-bone lengths across frames, `[frame][bone]`.
pub fn bone_length_table(frames: &[Pose3D], skeleton: &Skeleton) -> Vec<Vec<f64>> {
    frames
        .iter()
        .map(|f| skeleton.bones().iter().map(|b| bone_length(f, b)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rest_pose;

    #[test]
    fn mpjpe_single_joint_offset() {
        let sk = Skeleton::standard();
        let gt = rest_pose(&sk).unwrap();
        assert_eq!(mpjpe(&gt, &gt), 0.0);
        let mut pred = gt;
        pred[5] += Vec3::new(3.0, 4.0, 0.0);
        assert!((mpjpe(&pred, &gt) - 0.3125).abs() < 1e-12);
    }

    #[test]
    fn procrustes_identity() {
        let sk = Skeleton::standard();
        let p = rest_pose(&sk).unwrap();
        let t = procrustes_align(&p, &p).unwrap();
        assert!((t.rotation - Matrix3::identity()).abs().max() < 1e-9);
        assert!((t.scale - 1.0).abs() < 1e-9);
        assert!(t.translation.norm() < 1e-9);
    }

    #[test]
    fn procrustes_rejects_collinear() {
        let mut p = Pose3D::zeros();
        for j in 0..NUM_JOINTS {
            p[j] = Vec3::new(j as f64, 2.0 * j as f64, 0.0);
        }
        assert!(matches!(procrustes_align(&p, &p), Err(Error::DegeneratePointSet(_))));
        assert!(procrustes_align(&Pose3D::zeros(), &p).is_err());
    }

    #[test]
    fn pck_examples() {
        let sk = Skeleton::standard();
        let gt = rest_pose(&sk).unwrap();
        let cfg = PckConfig::default();
        let same = pck_auc(&[gt], &[gt], &cfg).unwrap();
        assert_eq!(same.pck, 1.0);
        assert_eq!(same.auc, 1.0);

        let far = gt.translate(&Vec3::new(151.0, 0.0, 0.0));
        assert_eq!(pck_auc(&[far], &[gt], &cfg).unwrap().pck, 0.0);

        let mut half = gt;
        for j in 0..8 {
            half[j] += Vec3::new(0.0, 200.0, 0.0);
        }
        assert_eq!(pck_auc(&[half], &[gt], &cfg).unwrap().pck, 0.5);
        assert!(pck_auc(&[gt, gt], &[gt], &cfg).is_err());
    }

    #[test]
    fn validity_of_static_symmetric_sequence() {
        let sk = Skeleton::standard();
        let rest = rest_pose(&sk).unwrap();
        let report = validity_report(&[rest; 4], &sk).unwrap();
        assert!(report.pair_l1_mm.iter().all(|v| v.value < 1e-9));
        assert!(report.bone_length_std_mm.iter().all(|v| v.value == 0.0));
        assert_eq!(report.illegal_angle_rate, 0.0);
        assert_eq!(report.angle_joint_count, 16);
        assert!(validity_report(&[], &sk).is_err());
    }
}
