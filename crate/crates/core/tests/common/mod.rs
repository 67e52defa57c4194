#![allow(dead_code)]

use anatomik::synth::rest_pose;
use anatomik::{Pose3D, Skeleton, Vec3, NUM_JOINTS};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rest pose with every non-root joint moved uniformly within `±spread` mm.
pub fn jittered_pose(sk: &Skeleton, rng: &mut impl Rng, spread: f64) -> Pose3D {
    let mut p = rest_pose(sk).unwrap();
    for j in 1..NUM_JOINTS {
        for c in 0..3 {
            p[j][c] += rng.random_range(-spread..spread);
        }
    }
    p
}

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-6 { Vector3::y() } else { axis.normalize() };
    *Rotation3::from_scaled_axis(axis * rng.random_range(0.0..std::f64::consts::PI)).matrix()
}

pub fn random_vec(rng: &mut impl Rng, spread: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
    )
}

pub fn pose_strategy(spread: f64) -> impl Strategy<Value = Pose3D> {
    any::<u64>().prop_map(move |seed| jittered_pose(&Skeleton::standard(), &mut rng(seed), spread))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

/// Central differences of `f` over every coordinate of `pose`.
pub fn fd_pose(pose: &Pose3D, h: f64, f: impl Fn(&Pose3D) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * NUM_JOINTS);
    for j in 0..NUM_JOINTS {
        for c in 0..3 {
            let (mut plus, mut minus) = (*pose, *pose);
            plus[j][c] += h;
            minus[j][c] -= h;
            out.push((f(&plus) - f(&minus)) / (2.0 * h));
        }
    }
    out
}

pub fn flat(g: &[Vec3; NUM_JOINTS]) -> Vec<f64> {
    g.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}

pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
