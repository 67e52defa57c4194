//! Temporal pose refinement: a two-layer fully connected network that maps
//! a window of `N` consecutive poses to one refined pose.
//!
//! Poses enter the network in meters (millimeters × 1e-3) and the output is
//! scaled back to millimeters. Losses and gradients are computed in the
//! network's meter units.

use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose3D, PoseSequence, NUM_JOINTS};

pub const POSE_DIM: usize = 3 * NUM_JOINTS;
/// Millimeters → network units.
pub const INPUT_SCALE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Frames `[i − N + 1, i]`.
    #[default]
    Online,
    /// Frames `[i − N/2 + 1, i + N/2]`.
    SemiOnline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TPNetConfig {
    pub window: usize,
    pub mode: WindowMode,
    pub hidden: usize,
}

impl Default for TPNetConfig {
    fn default() -> Self {
        Self {
            window: 20,
            mode: WindowMode::Online,
            hidden: 4096,
        }
    }
}

impl TPNetConfig {
    /// Smaller hidden layer for quick experiments and tests.
    pub fn desk_scale() -> Self {
        Self {
            hidden: 256,
            ..Self::default()
        }
    }

    pub fn input_dim(&self) -> usize {
        self.window * POSE_DIM
    }

    pub fn output_dim(&self) -> usize {
        POSE_DIM
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden must be at least 1".into()));
        }
        if self.mode == WindowMode::SemiOnline && !self.window.is_multiple_of(2) {
            return Err(Error::InvalidConfig("semi-online windows must have even length".into()));
        }
        Ok(())
    }

    /// Frame offset, relative to the output frame, of the first window slot.
    pub fn first_offset(&self) -> isize {
        match self.mode {
            WindowMode::Online => -(self.window as isize - 1),
            WindowMode::SemiOnline => -(self.window as isize / 2 - 1),
        }
    }

    /// Offsets relative to the output frame, in window order.
    pub fn offsets(&self) -> impl Iterator<Item = isize> {
        let first = self.first_offset();
        (0..self.window as isize).map(move |k| first + k)
    }

    /// Window slot holding the frame at `offset`, if inside the window.
    pub fn slot_of_offset(&self, offset: isize) -> Option<usize> {
        let k = offset - self.first_offset();
        (0..self.window as isize).contains(&k).then_some(k as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TPNetParams {
    pub config: TPNetConfig,
    /// `hidden × input_dim`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `output_dim × hidden`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients of the loss with respect to every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct TPNetGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl TPNetParams {
    pub fn zeros(config: TPNetConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            w1: Array2::zeros((config.hidden, config.input_dim())),
            b1: Array1::zeros(config.hidden),
            w2: Array2::zeros((config.output_dim(), config.hidden)),
            b2: Array1::zeros(config.output_dim()),
        })
    }

    /// He-normal first layer, scaled-normal second layer, zero biases.
    pub fn init(config: TPNetConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, (2.0 / config.input_dim() as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (1.0 / config.hidden as f64).sqrt()).unwrap();
        p.w1.iter_mut().for_each(|w| *w = n1.sample(&mut rng));
        p.w2.iter_mut().for_each(|w| *w = n2.sample(&mut rng));
        Ok(p)
    }

    /// Network that ignores its input and always outputs `pose`.
    pub fn constant(config: TPNetConfig, pose: &Pose3D) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        for (b, v) in p.b2.iter_mut().zip(pose.to_flat()) {
            *b = v * INPUT_SCALE;
        }
        Ok(p)
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let ok = self.w1.dim() == (c.hidden, c.input_dim())
            && self.b1.len() == c.hidden
            && self.w2.dim() == (c.output_dim(), c.hidden)
            && self.b2.len() == c.output_dim();
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("parameters for {c:?}"),
                got: format!(
                    "w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                    self.w1.dim(),
                    self.b1.len(),
                    self.w2.dim(),
                    self.b2.len()
                ),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.w2].iter().all(|a| a.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2].iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }
}

fn check_window(config: &TPNetConfig, window: &[Pose3D]) -> Result<()> {
    if window.len() != config.window {
        return Err(Error::ShapeMismatch {
            expected: format!("window of {} poses", config.window),
            got: format!("{} poses", window.len()),
        });
    }
    Ok(())
}

/// Flattens a window of poses, in time order, into network units.
pub fn encode_window(window: &[Pose3D], out: &mut [f64]) {
    for (k, pose) in window.iter().enumerate() {
        let dst = &mut out[k * POSE_DIM..(k + 1) * POSE_DIM];
        pose.write_flat(dst);
        dst.iter_mut().for_each(|v| *v *= INPUT_SCALE);
    }
}

fn encode_target(pose: &Pose3D) -> [f64; POSE_DIM] {
    let mut t = pose.to_flat();
    t.iter_mut().for_each(|v| *v *= INPUT_SCALE);
    t
}

fn decode_output(row: ndarray::ArrayView1<f64>) -> Pose3D {
    let flat: Vec<f64> = row.iter().map(|v| v / INPUT_SCALE).collect();
    Pose3D::from_flat(&flat).expect("output has pose dimension")
}

struct Activations {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    out: Array2<f64>,
}

fn forward_batch(params: &TPNetParams, x: ArrayView2<f64>) -> Activations {
    let mut pre = x.dot(&params.w1.t());
    pre += &params.b1;
    let hidden = pre.mapv(|v| v.max(0.0));
    let mut out = hidden.dot(&params.w2.t());
    out += &params.b2;
    Activations { pre, hidden, out }
}

/// Refined pose for one window.
pub fn tpnet_forward(params: &TPNetParams, window: &[Pose3D]) -> Result<Pose3D> {
    params.check_shapes()?;
    check_window(&params.config, window)?;
    let mut x = Array1::zeros(params.config.input_dim());
    encode_window(window, x.as_slice_mut().unwrap());
    let mut hidden = params.w1.dot(&x);
    hidden.zip_mut_with(&params.b1, |h, b| *h = (*h + b).max(0.0));
    let out = params.w2.dot(&hidden) + &params.b2;
    Ok(decode_output(out.view()))
}

/// Mean of `‖out − target‖²` over the batch and its exact parameter gradient.
fn backward_batch(params: &TPNetParams, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> (f64, TPNetGrads) {
    let batch = x.nrows() as f64;
    let act = forward_batch(params, x);
    let residual = &act.out - &targets;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / batch;
    let d_out = residual * (2.0 / batch);
    let w2 = d_out.t().dot(&act.hidden);
    let b2 = d_out.sum_axis(Axis(0));
    let mut d_pre = d_out.dot(&params.w2);
    // ReLU subgradient is zero at the kink.
    ndarray::Zip::from(&mut d_pre)
        .and(&act.pre)
        .for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
    let w1 = d_pre.t().dot(&x);
    let b1 = d_pre.sum_axis(Axis(0));
    (loss, TPNetGrads { w1, b1, w2, b2 })
}

/// Loss `‖out − target‖²` (network units) and its gradient for one window.
pub fn tpnet_backward(params: &TPNetParams, window: &[Pose3D], target: &Pose3D) -> Result<(f64, TPNetGrads)> {
    params.check_shapes()?;
    check_window(&params.config, window)?;
    let mut x = Array2::zeros((1, params.config.input_dim()));
    encode_window(window, x.as_slice_mut().unwrap());
    let t = Array2::from_shape_vec((1, POSE_DIM), encode_target(target).to_vec()).unwrap();
    Ok(backward_batch(params, x.view(), t.view()))
}

/// One training example: a window of (noisy) poses and the clean pose the
/// network should output.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub window: Vec<Pose3D>,
    pub target: Pose3D,
}

/// Edge-padded window of `frames` around frame `i`.
pub fn window_at(frames: &[Pose3D], i: usize, config: &TPNetConfig) -> Vec<Pose3D> {
    let last = frames.len() as isize - 1;
    config
        .offsets()
        .map(|o| frames[(i as isize + o).clamp(0, last) as usize])
        .collect()
}

/// One sample per frame, targets taken from the sequence's ground truth.
pub fn samples_from_sequence(seq: &PoseSequence, config: &TPNetConfig) -> Result<Vec<Sample>> {
    let gt = seq
        .ground_truth()
        .ok_or_else(|| Error::InvalidConfig("training sequence has no ground truth".into()))?;
    Ok((0..seq.len())
        .map(|i| Sample {
            window: window_at(seq.frames(), i, config),
            target: gt[i],
        })
        .collect())
}

/// Appends `copies` rotated versions of every sample, each turned about
/// the vertical axis by its own uniformly random angle. Window and target
/// rotate together, so the pairing stays exact.
pub fn augment_heading(samples: &[Sample], copies: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = samples.to_vec();
    out.reserve(samples.len() * copies);
    for _ in 0..copies {
        for s in samples {
            let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
            let turn = |p: &Pose3D| p.transform(rot.matrix(), 1.0, &Vector3::zeros());
            out.push(Sample {
                window: s.window.iter().map(turn).collect(),
                target: turn(&s.target),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 30,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub params: TPNetParams,
    /// Mean per-sample `‖out − target‖²` (m²) over each epoch's minibatches,
    /// measured before each update.
    pub epoch_losses: Vec<f64>,
}

struct AdamState {
    m: TPNetGrads,
    v: TPNetGrads,
    t: i32,
}

fn adam_step<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &TrainConfig,
    bias1: f64,
    bias2: f64,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        });
}

fn zero_grads(c: &TPNetConfig) -> TPNetGrads {
    TPNetGrads {
        w1: Array2::zeros((c.hidden, c.input_dim())),
        b1: Array1::zeros(c.hidden),
        w2: Array2::zeros((c.output_dim(), c.hidden)),
        b2: Array1::zeros(c.output_dim()),
    }
}

fn encode_dataset(dataset: &[Sample], net: &TPNetConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut x = Array2::zeros((dataset.len(), net.input_dim()));
    let mut t = Array2::zeros((dataset.len(), POSE_DIM));
    for (i, s) in dataset.iter().enumerate() {
        check_window(net, &s.window)?;
        encode_window(&s.window, x.row_mut(i).as_slice_mut().unwrap());
        t.row_mut(i)
            .iter_mut()
            .zip(encode_target(&s.target))
            .for_each(|(d, v)| *d = v);
    }
    Ok((x, t))
}

/// Seeded initialisation with the output bias set to the mean target, then
/// Adam training.
pub fn tpnet_train(dataset: &[Sample], config: &TrainConfig, net: &TPNetConfig) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let mut params = TPNetParams::init(*net, config.seed)?;
    let n = dataset.len() as f64;
    for s in dataset {
        for (b, v) in params.b2.iter_mut().zip(encode_target(&s.target)) {
            *b += v / n;
        }
    }
    tpnet_train_from(params, dataset, config)
}

/// Adam training from the given parameters.
pub fn tpnet_train_from(mut params: TPNetParams, dataset: &[Sample], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    params.check_shapes()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let net = params.config;
    let (x_all, t_all) = encode_dataset(dataset, &net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0005_eed0_fba7_c4e5);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut state = AdamState {
        m: zero_grads(&net),
        v: zero_grads(&net),
        t: 0,
    };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut xb = Array2::zeros((config.batch_size.min(dataset.len()), net.input_dim()));
    let mut tb = Array2::zeros((config.batch_size.min(dataset.len()), POSE_DIM));

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len();
            for (r, &i) in chunk.iter().enumerate() {
                xb.row_mut(r).assign(&x_all.row(i));
                tb.row_mut(r).assign(&t_all.row(i));
            }
            let (loss, g) = backward_batch(&params, xb.slice(s![..b, ..]), tb.slice(s![..b, ..]));
            loss_sum += loss * b as f64;

            state.t += 1;
            let bias1 = 1.0 - config.beta1.powi(state.t);
            let bias2 = 1.0 - config.beta2.powi(state.t);
            adam_step(&mut params.w1, &g.w1, &mut state.m.w1, &mut state.v.w1, config, bias1, bias2);
            adam_step(&mut params.b1, &g.b1, &mut state.m.b1, &mut state.v.b1, config, bias1, bias2);
            adam_step(&mut params.w2, &g.w2, &mut state.m.w2, &mut state.v.w2, config, bias1, bias2);
            adam_step(&mut params.b2, &g.b2, &mut state.m.b2, &mut state.v.b2, config, bias1, bias2);
        }
        let epoch_loss = loss_sum / dataset.len() as f64;
        log::info!("epoch {}: loss {:.6e}", epoch + 1, epoch_loss);
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: epoch_loss,
            });
        }
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainReport { params, epoch_losses })
}

/// Mean per-sample loss of `params` over `dataset` (network units).
pub fn dataset_loss(params: &TPNetParams, dataset: &[Sample]) -> Result<f64> {
    let (x, t) = encode_dataset(dataset, &params.config)?;
    let out = forward_batch(params, x.view()).out;
    Ok((&out - &t).iter().map(|r| r * r).sum::<f64>() / dataset.len() as f64)
}

/// Refines every frame from its edge-padded window; output length equals
/// input length.
pub fn tpnet_refine_sequence(params: &TPNetParams, seq: &PoseSequence) -> Result<PoseSequence> {
    params.check_shapes()?;
    let net = params.config;
    let frames = seq.frames();
    if frames.is_empty() {
        return Err(Error::InvalidConfig("cannot refine an empty sequence".into()));
    }
    let mut refined = Vec::with_capacity(frames.len());
    // Bounded batches keep memory flat for long sequences with wide nets.
    const BATCH: usize = 256;
    let mut x = Array2::zeros((BATCH.min(frames.len()), net.input_dim()));
    for start in (0..frames.len()).step_by(BATCH) {
        let end = (start + BATCH).min(frames.len());
        for i in start..end {
            let window = window_at(frames, i, &net);
            encode_window(&window, x.row_mut(i - start).as_slice_mut().unwrap());
        }
        let act = forward_batch(params, x.slice(s![..end - start, ..]));
        refined.extend(act.out.rows().into_iter().map(decode_output));
    }
    seq.with_frames(refined)
}

#[derive(Serialize, Deserialize)]
struct TensorDump {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format: String,
    version: u32,
    config: TPNetConfig,
    input_scale: f64,
    w1: TensorDump,
    b1: TensorDump,
    w2: TensorDump,
    b2: TensorDump,
}

const PARAMS_FORMAT: &str = "anatomik-tpnet";

impl TPNetParams {
    pub fn to_json(&self) -> String {
        let dump2 = |a: &Array2<f64>| TensorDump {
            shape: a.shape().to_vec(),
            data: a.iter().copied().collect(),
        };
        let dump1 = |a: &Array1<f64>| TensorDump {
            shape: a.shape().to_vec(),
            data: a.to_vec(),
        };
        serde_json::to_string(&ParamsFile {
            format: PARAMS_FORMAT.into(),
            version: 1,
            config: self.config,
            input_scale: INPUT_SCALE,
            w1: dump2(&self.w1),
            b1: dump1(&self.b1),
            w2: dump2(&self.w2),
            b2: dump1(&self.b2),
        })
        .expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.format != PARAMS_FORMAT || file.version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported params file {} v{}",
                file.format, file.version
            )));
        }
        if file.input_scale != INPUT_SCALE {
            return Err(Error::InvalidConfig(format!(
                "params were trained with input scale {}",
                file.input_scale
            )));
        }
        file.config.validate()?;
        let shape_err = |name: &str, t: &TensorDump| Error::ShapeMismatch {
            expected: format!("{name} data matching shape {:?}", t.shape),
            got: format!("{} values", t.data.len()),
        };
        let arr2 = |name: &str, t: TensorDump| -> Result<Array2<f64>> {
            if t.shape.len() != 2 {
                return Err(shape_err(name, &t));
            }
            let shape = (t.shape[0], t.shape[1]);
            Array2::from_shape_vec(shape, t.data.clone()).map_err(|_| shape_err(name, &t))
        };
        let arr1 = |name: &str, t: TensorDump| -> Result<Array1<f64>> {
            if t.shape.len() != 1 || t.shape[0] != t.data.len() {
                return Err(shape_err(name, &t));
            }
            Ok(Array1::from(t.data))
        };
        let params = TPNetParams {
            config: file.config,
            w1: arr2("w1", file.w1)?,
            b1: arr1("b1", file.b1)?,
            w2: arr2("w2", file.w2)?,
            b2: arr1("b2", file.b2)?,
        };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
