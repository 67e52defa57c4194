//! Depth lifting: recover the sixteen joint depths for known image-plane
//! joints by gradient descent on either the weakly supervised
//! structure-aware loss or the supervised Euclidean depth loss.
//!
//! The weak objective is invariant to a global depth shift, so the pelvis
//! depth is held at its initial value in that mode. It is *not* invariant to
//! a global depth reflection once the angle term is active: reflecting a
//! legal pose bends every elbow and knee backwards.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{structure_aware_loss, supervised_depth_loss, Gradient, LossBreakdown, LossWeights};
use crate::pose::{JointId, Pose2D, Pose3D, NUM_JOINTS};
use crate::skeleton::Skeleton;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Factor applied to the last accepted step to get the next trial step.
const STEP_GROWTH: f64 = 2.0;
/// Backtracking gives up once the step has shrunk by this factor.
const MIN_STEP_RATIO: f64 = 1e-30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    #[default]
    Weak,
    Supervised,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftInit {
    #[default]
    Zeros,
    Provided(Vec<f64>),
    /// Independent `N(0, sigma²)` depths; the pelvis starts at zero.
    Random { seed: u64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftConfig {
    pub mode: LiftMode,
    /// Initial trial step (mm² per unit loss). Each accepted step seeds the
    /// next trial at twice its size; rejected trials are halved.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
    pub init: LiftInit,
    pub record_trajectory: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            mode: LiftMode::Weak,
            step_size: 1.0,
            max_iters: 2000,
            tol: 1e-8,
            init: LiftInit::Zeros,
            record_trajectory: false,
        }
    }
}

impl LiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// Value of the optimised objective.
    pub total: f64,
    pub angle: f64,
    pub symmetry: f64,
    pub geometry: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftResult {
    pub pose: Pose3D,
    /// Structure-aware breakdown at the returned depths.
    pub final_loss: LossBreakdown,
    /// Optimised objective at the start and at the returned depths.
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl LiftResult {
    pub fn write_trajectory_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "iteration,total,angle,symmetry,geometry")?;
        for p in &self.trajectory {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.iteration, p.total, p.angle, p.symmetry, p.geometry
            )?;
        }
        Ok(())
    }
}

struct Evaluation {
    objective: f64,
    breakdown: LossBreakdown,
    grad: [f64; NUM_JOINTS],
}

fn evaluate(
    xy: &Pose2D,
    z: &[f64; NUM_JOINTS],
    skeleton: &Skeleton,
    weights: &LossWeights,
    mode: LiftMode,
    gt_z: Option<&[f64; NUM_JOINTS]>,
) -> Result<Evaluation> {
    let breakdown = structure_aware_loss(xy, z, skeleton, weights)?;
    match mode {
        LiftMode::Weak => {
            let mut grad = match &breakdown.grad {
                Gradient::Depth(g) => *g,
                Gradient::Full(_) => unreachable!("weak loss returns depth gradient"),
            };
            grad[JointId::Pelvis.index()] = 0.0;
            Ok(Evaluation {
                objective: breakdown.total,
                breakdown,
                grad,
            })
        }
        LiftMode::Supervised => {
            let gt = gt_z.expect("checked by caller");
            let (objective, grad) = supervised_depth_loss(z, gt);
            Ok(Evaluation {
                objective,
                breakdown,
                grad,
            })
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimises the selected objective over the depths of `xy`'s joints.
pub fn lift(
    xy: &Pose2D,
    skeleton: &Skeleton,
    weights: &LossWeights,
    config: &LiftConfig,
    gt_z: Option<&[f64; NUM_JOINTS]>,
) -> Result<LiftResult> {
    config.validate()?;
    weights.validate()?;
    if config.mode == LiftMode::Supervised && gt_z.is_none() {
        return Err(Error::InvalidConfig("supervised lifting needs ground-truth depths".into()));
    }

    let mut z = match &config.init {
        LiftInit::Zeros => [0.0; NUM_JOINTS],
        LiftInit::Provided(v) => {
            if v.len() != NUM_JOINTS {
                return Err(Error::ShapeMismatch {
                    expected: format!("{NUM_JOINTS} initial depths"),
                    got: format!("{}", v.len()),
                });
            }
            let mut z = [0.0; NUM_JOINTS];
            z.copy_from_slice(v);
            z
        }
        LiftInit::Random { seed, sigma } => {
            let normal = Normal::new(0.0, *sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut z = [0.0; NUM_JOINTS];
            for v in z.iter_mut().skip(1) {
                *v = normal.sample(&mut rng);
            }
            z
        }
    };

    let mut current = evaluate(xy, &z, skeleton, weights, config.mode, gt_z)?;
    let initial_objective = current.objective;
    let mut trajectory = Vec::new();
    let record = |it: usize, e: &Evaluation, trajectory: &mut Vec<TrajectoryPoint>| {
        if config.record_trajectory {
            trajectory.push(TrajectoryPoint {
                iteration: it,
                total: e.objective,
                angle: e.breakdown.angle,
                symmetry: e.breakdown.symmetry,
                geometry: e.breakdown.geometry,
            });
        }
    };
    record(0, &current, &mut trajectory);

    let mut step = config.step_size;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let g_norm = norm(&current.grad);
        if g_norm < config.tol {
            converged = true;
            break;
        }
        let g_sq = g_norm * g_norm;
        let mut accepted = None;
        let mut trial = step;
        while trial >= config.step_size * MIN_STEP_RATIO {
            let mut candidate = z;
            for (c, g) in candidate.iter_mut().zip(&current.grad) {
                *c -= trial * g;
            }
            let eval = evaluate(xy, &candidate, skeleton, weights, config.mode, gt_z)?;
            if eval.objective <= current.objective - ARMIJO_C * trial * g_sq {
                accepted = Some((candidate, eval));
                break;
            }
            trial *= 0.5;
        }
        let Some((candidate, eval)) = accepted else {
            log::debug!("line search stalled after {iterations} iterations");
            break;
        };
        z = candidate;
        current = eval;
        iterations += 1;
        step = trial * STEP_GROWTH;
        record(iterations, &current, &mut trajectory);
    }
    if !converged && norm(&current.grad) < config.tol {
        converged = true;
    }

    Ok(LiftResult {
        pose: Pose3D::from_xy_z(xy, &z),
        final_objective: current.objective,
        final_loss: current.breakdown,
        initial_objective,
        iterations,
        converged,
        trajectory,
    })
}

/// Root-mean-square depth error against `gt_z` and against its global
/// reflection `−gt_z`; returns the smaller of the two.
pub fn depth_rms_up_to_reflection(z: &[f64; NUM_JOINTS], gt_z: &[f64; NUM_JOINTS]) -> f64 {
    let rms = |sign: f64| {
        (z.iter()
            .zip(gt_z)
            .map(|(a, b)| (a - sign * b).powi(2))
            .sum::<f64>()
            / NUM_JOINTS as f64)
            .sqrt()
    };
    rms(1.0).min(rms(-1.0))
}
