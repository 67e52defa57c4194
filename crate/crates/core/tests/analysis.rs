mod common;

use anatomik::analysis::{evaluate_cell, loss_surface_grid, sensitivity_map, Coord, GridSpec};
use anatomik::losses::{illegal_angle_loss, symmetry_loss, LossWeights};
use anatomik::synth::{generate_sequence, MotionSpec};
use anatomik::temporal::{window_at, TPNetConfig, TPNetParams, WindowMode};
use anatomik::{JointId, Skeleton};
use common::*;

#[test]
fn grid_cells_match_hand_composition() {
    let sk = Skeleton::standard();
    let w = LossWeights::default();
    let mut r = rng(41);
    let gt = jittered_pose(&sk, &mut r, 50.0);
    let base = jittered_pose(&sk, &mut r, 50.0);
    let spec = GridSpec { joint: JointId::RKnee, axes: (Coord::Y, Coord::Z), resolution: 9, ..Default::default() };
    let surface = loss_surface_grid(&base, &gt, &spec, &sk, &w).unwrap();
    assert_eq!(surface.cells.len(), 81);
    for iv in 0..9 {
        for iu in 0..9 {
            let cell = surface.cell(iu, iv);
            let mut pose = base;
            pose[JointId::RKnee].y = surface.u_values[iu];
            pose[JointId::RKnee].z = surface.v_values[iv];
            let d = pose[JointId::RKnee] - gt[JointId::RKnee];
            let sym = symmetry_loss(&pose, &sk).value;
            let angle = illegal_angle_loss(&pose, &sk).value;
            assert_eq!(cell.loc2d, d.x * d.x + d.y * d.y);
            assert_eq!(cell.sym, sym);
            assert_eq!(cell.angle, angle);
            assert_eq!(cell.total_weak, cell.loc2d + w.lambda_s * sym + w.lambda_a * angle);
            assert_eq!(cell.full3d, d.norm_squared());
            assert_eq!(*cell, evaluate_cell(&base, &gt, &spec, &sk, &w, cell.u, cell.v));
        }
    }
    assert_eq!(surface, loss_surface_grid(&base, &gt, &spec, &sk, &w).unwrap());
}

#[test]
fn sensitivity_is_scale_free_for_small_epsilon() {
    let sk = Skeleton::standard();
    let net = TPNetConfig { window: 4, mode: WindowMode::SemiOnline, hidden: 64 };
    let params = TPNetParams::init(net, 42).unwrap();
    let seq = generate_sequence(&sk, &MotionSpec::random(43, 20, 50.0)).unwrap();
    let window = window_at(seq.frames(), 10, &net);
    let a = sensitivity_map(&params, &window, 0.02, 8, 1).unwrap();
    let b = sensitivity_map(&params, &window, 0.01, 8, 1).unwrap();
    assert_eq!(a.offsets, vec![2, 1, 0, -1]);
    for k in 0..a.offsets.len() {
        let (x, y) = (a.offset_mean(k), b.offset_mean(k));
        assert!((x - y).abs() < 0.1 * x.max(y), "{x} vs {y}");
    }
    assert_eq!(a.get(5, 0, 0), None);
}

#[test]
fn constant_net_has_no_sensitivity() {
    let sk = Skeleton::standard();
    let net = TPNetConfig { window: 3, mode: WindowMode::Online, hidden: 8 };
    let seq = generate_sequence(&sk, &MotionSpec::random(44, 10, 50.0)).unwrap();
    let params = TPNetParams::constant(net, &seq.frames()[0]).unwrap();
    let map = sensitivity_map(&params, &window_at(seq.frames(), 5, &net), 1.0, 4, 0).unwrap();
    assert!(map.values.iter().flatten().flatten().all(|v| *v == 0.0));
}
