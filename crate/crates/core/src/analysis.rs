//! Diagnostics: loss surfaces over a grid of positions for one joint, and
//! the sensitivity of the temporal network's output to each input joint at
//! each window offset.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{illegal_angle_loss, symmetry_loss, LossWeights};
use crate::pose::{JointId, Pose3D, Vec3, NUM_JOINTS};
use crate::skeleton::Skeleton;
use crate::temporal::{tpnet_forward, TPNetParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    X,
    Y,
    Z,
}

impl Coord {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z"][self.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub joint: JointId,
    pub axes: (Coord, Coord),
    /// Grid center in mm; `None` centers on the ground-truth joint.
    pub center: Option<[f64; 2]>,
    pub half_extent: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            joint: JointId::LElbow,
            axes: (Coord::X, Coord::Z),
            center: None,
            half_extent: 300.0,
            resolution: 64,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidConfig("grid resolution must be at least 2".into()));
        }
        if !(self.half_extent > 0.0 && self.half_extent.is_finite()) {
            return Err(Error::InvalidConfig("half_extent must be positive".into()));
        }
        if self.axes.0 == self.axes.1 {
            return Err(Error::InvalidConfig("grid axes must differ".into()));
        }
        if self.joint == JointId::Pelvis {
            return Err(Error::InvalidConfig("the root joint cannot be moved".into()));
        }
        Ok(())
    }

    /// Sample positions along one axis around `center`.
    pub fn axis_values(&self, center: f64) -> Vec<f64> {
        let n = self.resolution;
        (0..n)
            .map(|i| center - self.half_extent + 2.0 * self.half_extent * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Loss values with the grid joint at one position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub u: f64,
    pub v: f64,
    /// Squared image-plane distance of the joint to ground truth.
    pub loc2d: f64,
    /// Unweighted symmetry loss of the whole pose.
    pub sym: f64,
    /// Unweighted illegal-angle loss of the whole pose.
    pub angle: f64,
    /// `loc2d + λs·sym + λa·angle`.
    pub total_weak: f64,
    /// Squared 3D distance of the joint to ground truth.
    pub full3d: f64,
}

impl SurfaceCell {
    pub fn loc2d_sym(&self, weights: &LossWeights) -> f64 {
        self.loc2d + weights.lambda_s * self.sym
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossSurface {
    pub spec: GridSpec,
    pub weights: LossWeights,
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    /// Row-major over `v`, then `u`.
    pub cells: Vec<SurfaceCell>,
}

impl LossSurface {
    pub fn cell(&self, iu: usize, iv: usize) -> &SurfaceCell {
        &self.cells[iv * self.u_values.len() + iu]
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let (a, b) = (self.spec.axes.0.name(), self.spec.axes.1.name());
        writeln!(out, "{a},{b},loc2d,sym,angle,total_weak,full3d")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.u, c.v, c.loc2d, c.sym, c.angle, c.total_weak, c.full3d
            )?;
        }
        Ok(())
    }
}

/// Evaluates every loss layer with `spec.joint` of `base_pose` moved to
/// `(u, v)` along `spec.axes`; all other joints stay where they are.
pub fn evaluate_cell(
    base_pose: &Pose3D,
    gt_pose: &Pose3D,
    spec: &GridSpec,
    skeleton: &Skeleton,
    weights: &LossWeights,
    u: f64,
    v: f64,
) -> SurfaceCell {
    let mut pose = *base_pose;
    let j = spec.joint;
    pose[j][spec.axes.0.index()] = u;
    pose[j][spec.axes.1.index()] = v;
    let d = pose[j] - gt_pose[j];
    let loc2d = d.x * d.x + d.y * d.y;
    let full3d = d.norm_squared();
    let sym = symmetry_loss(&pose, skeleton).value;
    let angle = illegal_angle_loss(&pose, skeleton).value;
    SurfaceCell {
        u,
        v,
        loc2d,
        sym,
        angle,
        total_weak: loc2d + weights.lambda_s * sym + weights.lambda_a * angle,
        full3d,
    }
}

pub fn loss_surface_grid(
    base_pose: &Pose3D,
    gt_pose: &Pose3D,
    spec: &GridSpec,
    skeleton: &Skeleton,
    weights: &LossWeights,
) -> Result<LossSurface> {
    spec.validate()?;
    weights.validate()?;
    let gt_joint = gt_pose[spec.joint];
    let center = spec
        .center
        .unwrap_or([gt_joint[spec.axes.0.index()], gt_joint[spec.axes.1.index()]]);
    let u_values = spec.axis_values(center[0]);
    let v_values = spec.axis_values(center[1]);
    let n = spec.resolution;
    let cells = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (iu, iv) = (k % n, k / n);
            evaluate_cell(base_pose, gt_pose, spec, skeleton, weights, u_values[iu], v_values[iv])
        })
        .collect();
    Ok(LossSurface {
        spec: *spec,
        weights: *weights,
        u_values,
        v_values,
        cells,
    })
}

/// A legal pose with the left elbow bent behind the shoulder–wrist line, and
/// the same pose with the elbow moved through that line to the mirror depth.
///
/// Shoulder and wrist share a depth, so both poses project to the same image
/// and have identical bone lengths; only the second one is bent backwards.
pub fn elbow_reflection_example(skeleton: &Skeleton) -> Result<(Pose3D, Pose3D)> {
    let mut legal = crate::synth::rest_pose(skeleton)?;
    let shoulder = legal[JointId::LShoulder];
    legal[JointId::LElbow] = shoulder + Vec3::new(0.0, -250.0, -150.0);
    legal[JointId::LWrist] = shoulder + Vec3::new(0.0, -470.0, 0.0);
    let mut bent = legal;
    bent[JointId::LElbow].z = 2.0 * shoulder.z - legal[JointId::LElbow].z;
    Ok((legal, bent))
}

/// Mean output displacement per unit input displacement, indexed by
/// `[offset][input joint][output joint]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMap {
    /// Frame offsets relative to the output frame, latest first.
    pub offsets: Vec<isize>,
    pub values: Vec<[[f64; NUM_JOINTS]; NUM_JOINTS]>,
}

impl SensitivityMap {
    pub fn get(&self, offset: isize, j_in: usize, j_out: usize) -> Option<f64> {
        let k = self.offsets.iter().position(|&o| o == offset)?;
        Some(self.values[k][j_in][j_out])
    }

    /// Mean over both joint axes for one offset slot.
    pub fn offset_mean(&self, k: usize) -> f64 {
        self.values[k].iter().flatten().sum::<f64>() / (NUM_JOINTS * NUM_JOINTS) as f64
    }

    /// Mean over every entry whose offset satisfies `keep`.
    pub fn mean_where(&self, keep: impl Fn(isize) -> bool) -> f64 {
        let picked: Vec<f64> = (0..self.offsets.len())
            .filter(|&k| keep(self.offsets[k]))
            .map(|k| self.offset_mean(k))
            .collect();
        picked.iter().sum::<f64>() / picked.len().max(1) as f64
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,j_in,j_out,value")?;
        for (k, &t) in self.offsets.iter().enumerate() {
            for j_in in 0..NUM_JOINTS {
                for j_out in 0..NUM_JOINTS {
                    writeln!(out, "{t},{j_in},{j_out},{}", self.values[k][j_in][j_out])?;
                }
            }
        }
        Ok(())
    }
}

fn unit_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Sensitivity of every output joint to random perturbations of one input
/// joint at one frame offset. Offsets outside the window give zeros.
pub fn sensitivity_at(
    params: &TPNetParams,
    base_window: &[Pose3D],
    offset: isize,
    joint: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<[f64; NUM_JOINTS]> {
    let mut out = [0.0; NUM_JOINTS];
    let Some(slot) = params.config.slot_of_offset(offset) else {
        return Ok(out);
    };
    let base = tpnet_forward(params, base_window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((slot * NUM_JOINTS + joint) as u64);
    let mut window = base_window.to_vec();
    for _ in 0..trials {
        window[slot][joint] = base_window[slot][joint] + unit_direction(&mut rng) * epsilon;
        let moved = tpnet_forward(params, &window)?;
        for (k, o) in out.iter_mut().enumerate() {
            *o += (moved[k] - base[k]).norm() / epsilon;
        }
    }
    out.iter_mut().for_each(|o| *o /= trials as f64);
    Ok(out)
}

pub fn sensitivity_map(
    params: &TPNetParams,
    base_window: &[Pose3D],
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<SensitivityMap> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let mut offsets: Vec<isize> = params.config.offsets().collect();
    offsets.reverse();
    let jobs: Vec<(isize, usize)> = offsets
        .iter()
        .flat_map(|&o| (0..NUM_JOINTS).map(move |j| (o, j)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(o, j)| sensitivity_at(params, base_window, o, j, epsilon, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let values = rows
        .chunks(NUM_JOINTS)
        .map(|chunk| {
            let mut block = [[0.0; NUM_JOINTS]; NUM_JOINTS];
            block.copy_from_slice(chunk);
            block
        })
        .collect();
    Ok(SensitivityMap { offsets, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rest_pose;
    use crate::temporal::{TPNetConfig, WindowMode};

    #[test]
    fn cell_at_ground_truth_is_zero() {
        let sk = Skeleton::standard();
        let pose = rest_pose(&sk).unwrap();
        let spec = GridSpec::default();
        let p = pose[spec.joint];
        let c = evaluate_cell(&pose, &pose, &spec, &sk, &LossWeights::default(), p.x, p.z);
        assert_eq!(c.loc2d, 0.0);
        assert_eq!(c.full3d, 0.0);
    }

    #[test]
    fn elbow_example_differs_only_in_angle() {
        let sk = Skeleton::standard();
        let (legal, bent) = elbow_reflection_example(&sk).unwrap();
        assert_eq!(legal.xy(), bent.xy());
        assert_eq!(illegal_angle_loss(&legal, &sk).value, 0.0);
        assert!(illegal_angle_loss(&bent, &sk).value > 1.0);
        assert_eq!(symmetry_loss(&legal, &sk).value, symmetry_loss(&bent, &sk).value);
    }

    #[test]
    fn grid_shape_and_csv_rows() {
        let sk = Skeleton::standard();
        let pose = rest_pose(&sk).unwrap();
        let spec = GridSpec {
            resolution: 5,
            ..Default::default()
        };
        let s = loss_surface_grid(&pose, &pose, &spec, &sk, &LossWeights::default()).unwrap();
        assert_eq!(s.cells.len(), 25);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 26);
        assert!(GridSpec { resolution: 1, ..spec }.validate().is_err());
    }

    #[test]
    fn constant_net_is_insensitive() {
        let sk = Skeleton::standard();
        let pose = rest_pose(&sk).unwrap();
        let cfg = TPNetConfig {
            window: 4,
            mode: WindowMode::Online,
            hidden: 8,
        };
        let net = TPNetParams::constant(cfg, &pose).unwrap();
        let window = vec![pose; 4];
        let map = sensitivity_map(&net, &window, 5.0, 3, 1).unwrap();
        assert_eq!(map.offsets, vec![0, -1, -2, -3]);
        assert!(map.values.iter().flatten().flatten().all(|v| *v == 0.0));
        let outside = sensitivity_at(&net, &window, -4, 3, 5.0, 3, 1).unwrap();
        assert_eq!(outside, [0.0; NUM_JOINTS]);
    }
}
