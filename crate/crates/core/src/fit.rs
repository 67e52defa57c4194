//! Skeleton fitting: rescale each bone to a known length, keeping its
//! direction.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::losses::MIN_BONE_LENGTH;
use crate::pose::{JointId, Pose3D, Vec3};
use crate::skeleton::Skeleton;

/// Rebuilds `pose` from the pelvis outwards so that every bone has the
/// length in `target_lengths` (indexed by bone id) and the direction it has
/// in `pose`. The pelvis ends up at the origin.
pub fn fit_skeleton(pose: &Pose3D, target_lengths: &[f64], skeleton: &Skeleton) -> Result<Pose3D> {
    if target_lengths.len() != skeleton.bones().len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target lengths", skeleton.bones().len()),
            got: format!("{}", target_lengths.len()),
        });
    }
    if let Some(l) = target_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig(format!("target lengths must be positive, got {l}")));
    }

    let mut out = Pose3D::zeros();
    out[JointId::Pelvis] = Vec3::zeros();
    for &joint in &skeleton.topological_order()[1..] {
        let bone_id = skeleton.bone_of_child(joint).expect("non-root joint");
        let bone = skeleton.bone(bone_id);
        let v = pose[bone.child] - pose[bone.parent];
        let len = v.norm();
        if len < MIN_BONE_LENGTH {
            return Err(Error::DegenerateBone {
                bone: bone.name.clone(),
                length: len,
            });
        }
        let target = target_lengths[bone_id.0];
        if len == target && out[bone.parent] == pose[bone.parent] {
            out[joint] = pose[joint];
            continue;
        }
        out[joint] = out[bone.parent] + v * (target / len);
        snap_length(&mut out, bone.parent, joint, target);
    }
    Ok(out)
}

const SNAP_RADIUS: i32 = 6;

/// Per-axis ulp offsets within `SNAP_RADIUS`, nearest (L1) first.
fn snap_offsets() -> &'static [[i32; 3]] {
    static OFFSETS: OnceLock<Vec<[i32; 3]>> = OnceLock::new();
    OFFSETS.get_or_init(|| {
        let r = -SNAP_RADIUS..=SNAP_RADIUS;
        let mut v: Vec<[i32; 3]> = r
            .clone()
            .flat_map(|a| r.clone().flat_map(move |b| (-SNAP_RADIUS..=SNAP_RADIUS).map(move |c| [a, b, c])))
            .collect();
        v.sort_by_key(|o| o.iter().map(|k| k.abs()).sum::<i32>());
        v
    })
}

fn ulp(x: f64) -> f64 {
    x.abs().next_up() - x.abs()
}

/// Searches positions near `child`, nearest first, for one whose computed
/// distance to `parent` is exactly `target`, so that bones given equal
/// targets come out with bitwise-equal lengths. Each axis moves in steps
/// that change the length by about half an ulp. Keeps the closest candidate
/// when no exact one exists.
fn snap_length(pose: &mut Pose3D, parent: JointId, child: JointId, target: f64) {
    let p = pose[parent];
    let start = pose[child];
    let c = start - p;
    let half = 0.5 * ulp(target) * target;
    let steps: [f64; 3] = std::array::from_fn(|k| {
        let s = if c[k].abs() > 1e-3 * target { half / c[k].abs() } else { 0.0 };
        s.max(ulp(start[k]))
    });
    let mut best = (start, (c.norm() - target).abs());
    for o in snap_offsets() {
        let cand = Vec3::from_fn(|k, _| start[k] + o[k] as f64 * steps[k]);
        let err = ((cand - p).norm() - target).abs();
        if err == 0.0 {
            pose[child] = cand;
            return;
        }
        if err < best.1 {
            best = (cand, err);
        }
    }
    pose[child] = best.0;
}
