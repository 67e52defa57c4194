//! `anatomik` command-line tool.
//!
//! Every command prints one JSON summary object on stdout. Logs go to
//! stderr. Option values resolve as: flag, then `--config` file, then the
//! built-in default.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anatomik::analysis::{self, Coord, GridSpec};
use anatomik::fit::fit_skeleton;
use anatomik::io::{load_sequence, save_sequence};
use anatomik::lifter::{self, LiftConfig, LiftInit, LiftMode};
use anatomik::losses::LossWeights;
use anatomik::metrics::{self, Alignment, PckConfig};
use anatomik::synth::{self, MotionSpec, NoiseSpec};
use anatomik::temporal::{self, TPNetConfig, TPNetParams, TrainConfig, WindowMode};
use anatomik::{JointId, Pose3D, PoseSequence, Skeleton};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::config::ConfigFile;

#[derive(Parser)]
#[command(name = "anatomik", version, about = "Anatomically constrained 3D pose tools")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skeleton JSON file; the built-in standard skeleton otherwise.
    #[arg(long, global = true, env = "ANATOMIK_SKELETON")]
    skeleton: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with option values, keyed by long flag name.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a legal synthetic motion sequence.
    Synth(SynthArgs),
    /// Add jitter and depth flips to a sequence.
    Corrupt(CorruptArgs),
    /// Recover depths from image-plane joints.
    Lift(LiftArgs),
    /// Train the temporal refinement network.
    TpnetTrain(TrainArgs),
    /// Refine a sequence with a trained network.
    TpnetRefine(RefineArgs),
    /// Rescale bones to target lengths.
    Fit(FitArgs),
    /// Evaluate predictions against ground truth.
    Metrics(MetricsArgs),
    /// Loss surface over a grid of positions for one joint.
    Surface(SurfaceArgs),
    /// Per-offset, per-joint sensitivity of a trained network.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    /// Motion spec JSON; a random spec drawn from `--seed` otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    /// Jitter standard deviation in mm.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    flip_prob: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LiftModeArg {
    Weak,
    Supervised,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum InitArg {
    Zeros,
    Random,
    /// Ground-truth depths plus Gaussian noise of `--init-sigma`.
    Perturbed,
}

#[derive(Args)]
struct LiftArgs {
    /// Sequence whose `gt` (or, without it, `joints`) supplies the 2D input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<LiftModeArg>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    init_sigma: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Lift only this frame.
    #[arg(long)]
    frame: Option<usize>,
    /// CSV of the first lifted frame's optimisation trajectory.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum WindowArg {
    Online,
    SemiOnline,
}

#[derive(Args)]
struct TrainArgs {
    /// Noisy sequence with paired `gt`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<WindowArg>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Extra copies of the training set, each rotated about the vertical
    /// axis by random angles.
    #[arg(long)]
    augment_heading: Option<usize>,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON object of bone name to length in mm; canonical lengths otherwise.
    #[arg(long)]
    lengths: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AlignArg {
    Similarity,
    Rigid,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth sequence; the `gt` field of `--pred` otherwise.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, value_enum)]
    alignment: Option<AlignArg>,
    #[arg(long)]
    pck_threshold: Option<f64>,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Sequence holding the pose (and its `gt`); the built-in bent-elbow
    /// example otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    frame: Option<usize>,
    #[arg(long)]
    joint: Option<String>,
    /// Two of x, y, z, e.g. `xz`.
    #[arg(long)]
    axes: Option<String>,
    #[arg(long)]
    half_extent: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output frame whose window is perturbed.
    #[arg(long)]
    frame: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Corrupt(_) => "corrupt",
            Command::Lift(_) => "lift",
            Command::TpnetTrain(_) => "tpnet-train",
            Command::TpnetRefine(_) => "tpnet-refine",
            Command::Fit(_) => "fit",
            Command::Metrics(_) => "metrics",
            Command::Surface(_) => "surface",
            Command::Sensitivity(_) => "sensitivity",
        }
    }
}

struct RunContext {
    seed: u64,
    skeleton: Skeleton,
    out: Option<PathBuf>,
    config: ConfigFile,
}

impl RunContext {
    fn out(&self) -> Result<&Path> {
        self.out.as_deref().context("this command needs --out")
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(mut summary) => {
            summary["command"] = json!(name);
            summary["status"] = json!("ok");
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            println!("{}", json!({ "command": name, "status": "error", "error": format!("{err:#}") }));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Value> {
    let config = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let threads = config.pick(cli.common.threads, "threads", 0usize)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let skeleton_path = cli.common.skeleton.or(config.get("skeleton")?);
    let skeleton = match &skeleton_path {
        Some(path) => {
            Skeleton::load(path).with_context(|| format!("loading skeleton {}", path.display()))?
        }
        None => Skeleton::standard(),
    };
    let ctx = RunContext {
        seed: config.pick(cli.common.seed, "seed", 0u64)?,
        skeleton,
        out: cli.common.out.or(config.get("out")?),
        config,
    };
    match cli.command {
        Command::Synth(a) => synth_cmd(&ctx, a),
        Command::Corrupt(a) => corrupt_cmd(&ctx, a),
        Command::Lift(a) => lift_cmd(&ctx, a),
        Command::TpnetTrain(a) => train_cmd(&ctx, a),
        Command::TpnetRefine(a) => refine_cmd(&ctx, a),
        Command::Fit(a) => fit_cmd(&ctx, a),
        Command::Metrics(a) => metrics_cmd(&ctx, a),
        Command::Surface(a) => surface_cmd(&ctx, a),
        Command::Sensitivity(a) => sensitivity_cmd(&ctx, a),
    }
}

fn load(path: &Path) -> Result<PoseSequence> {
    load_sequence(path).with_context(|| format!("reading {}", path.display()))
}

fn save(seq: &PoseSequence, path: &Path) -> Result<()> {
    save_sequence(seq, path).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("writing {}", path.display()))?,
    ))
}

fn mean_mpjpe(preds: &[Pose3D], gts: &[Pose3D]) -> f64 {
    preds.iter().zip(gts).map(|(p, g)| metrics::mpjpe(p, g)).sum::<f64>() / preds.len().max(1) as f64
}

fn synth_cmd(ctx: &RunContext, a: SynthArgs) -> Result<Value> {
    let out = ctx.out()?;
    let spec = match a.spec.or(ctx.config.get("spec")?) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut spec: MotionSpec = serde_json::from_str(&text).context("parsing motion spec")?;
            if let Some(frames) = a.frames {
                spec.frames = frames;
            }
            if let Some(fps) = a.fps {
                spec.fps = fps;
            }
            spec
        }
        None => MotionSpec::random(
            ctx.seed,
            ctx.config.pick(a.frames, "frames", 1000)?,
            ctx.config.pick(a.fps, "fps", 50.0)?,
        ),
    };
    let seq = synth::generate_sequence(&ctx.skeleton, &spec)?;
    save(&seq, out)?;
    let validity = metrics::validity_report(seq.frames(), &ctx.skeleton)?;
    Ok(json!({
        "out": out,
        "frames": seq.len(),
        "fps": seq.fps(),
        "illegal_angle_rate": validity.illegal_angle_rate,
        "mean_bone_length_std_mm": validity.mean_bone_length_std_mm,
    }))
}

fn corrupt_cmd(ctx: &RunContext, a: CorruptArgs) -> Result<Value> {
    let out = ctx.out()?;
    let seq = load(&a.input)?;
    let noise = NoiseSpec {
        jitter_sigma: ctx.config.pick(a.sigma, "sigma", 15.0)?,
        depth_flip_prob: ctx.config.pick(a.flip_prob, "flip_prob", 0.05)?,
        seed: ctx.seed,
    };
    let noisy = synth::corrupt_sequence(&seq, &noise)?;
    save(&noisy, out)?;
    Ok(json!({
        "out": out,
        "frames": noisy.len(),
        "jitter_sigma": noise.jitter_sigma,
        "depth_flip_prob": noise.depth_flip_prob,
        "mpjpe_mm": mean_mpjpe(noisy.frames(), seq.frames()),
    }))
}

fn lift_cmd(ctx: &RunContext, a: LiftArgs) -> Result<Value> {
    let out = ctx.out()?;
    let cfg = &ctx.config;
    let seq = load(&a.input)?;
    let source = seq.ground_truth().unwrap_or(seq.frames()).to_vec();
    let mode = match cfg.pick(a.mode, "mode", LiftModeArg::Weak)? {
        LiftModeArg::Weak => LiftMode::Weak,
        LiftModeArg::Supervised => LiftMode::Supervised,
    };
    let init = cfg.pick(a.init, "init", InitArg::Zeros)?;
    let init_sigma = cfg.pick(a.init_sigma, "init_sigma", 50.0)?;
    let defaults = LiftConfig::default();
    let weights = LossWeights {
        lambda_a: cfg.pick(a.lambda_a, "lambda_a", LossWeights::default().lambda_a)?,
        lambda_s: cfg.pick(a.lambda_s, "lambda_s", LossWeights::default().lambda_s)?,
        lambda_g: cfg.pick(a.lambda_g, "lambda_g", LossWeights::default().lambda_g)?,
    };
    let base = LiftConfig {
        mode,
        step_size: cfg.pick(a.step_size, "step_size", defaults.step_size)?,
        max_iters: cfg.pick(a.max_iters, "max_iters", defaults.max_iters)?,
        tol: cfg.pick(a.tol, "tol", defaults.tol)?,
        init: LiftInit::Zeros,
        record_trajectory: false,
    };
    let trajectory_path = a.trajectory.or(cfg.get("trajectory")?);
    let indices: Vec<usize> = match a.frame.or(cfg.get("frame")?) {
        Some(i) if i < source.len() => vec![i],
        Some(i) => bail!("frame {i} is out of range for {} frames", source.len()),
        None => (0..source.len()).collect(),
    };

    let lift_one = |k: usize, i: usize| -> Result<lifter::LiftResult> {
        let gt = &source[i];
        let gt_z = gt.depths();
        let mut config = base.clone();
        config.record_trajectory = k == 0 && trajectory_path.is_some();
        let frame_seed = ctx.seed.wrapping_add(i as u64);
        config.init = match init {
            InitArg::Zeros => LiftInit::Zeros,
            InitArg::Random => LiftInit::Random {
                seed: frame_seed,
                sigma: init_sigma,
            },
            InitArg::Perturbed => {
                let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
                let normal = Normal::new(0.0, init_sigma)?;
                let mut z = gt_z.to_vec();
                z.iter_mut().skip(1).for_each(|v| *v += normal.sample(&mut rng));
                LiftInit::Provided(z)
            }
        };
        Ok(lifter::lift(&synth::project_2d(gt), &ctx.skeleton, &weights, &config, Some(&gt_z))?)
    };
    use rayon::prelude::*;
    let results: Vec<lifter::LiftResult> = indices
        .par_iter()
        .enumerate()
        .map(|(k, &i)| lift_one(k, i))
        .collect::<Result<_>>()?;

    if let Some(path) = &trajectory_path {
        results[0].write_trajectory_csv(create(path)?)?;
    }
    let gts: Vec<Pose3D> = indices.iter().map(|&i| source[i]).collect();
    let lifted = PoseSequence::new(results.iter().map(|r| r.pose).collect(), seq.fps(), Some(gts.clone()))?;
    save(&lifted, out)?;
    let rms: Vec<f64> = results
        .iter()
        .zip(&gts)
        .map(|(r, g)| lifter::depth_rms_up_to_reflection(&r.pose.depths(), &g.depths()))
        .collect();
    let n = results.len() as f64;
    Ok(json!({
        "out": out,
        "frames": results.len(),
        "converged": results.iter().filter(|r| r.converged).count(),
        "mean_iterations": results.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        "mean_final_objective": results.iter().map(|r| r.final_objective).sum::<f64>() / n,
        "mean_depth_rms_mm": rms.iter().sum::<f64>() / n,
        "within_5mm": rms.iter().filter(|r| **r < 5.0).count(),
        "trajectory": trajectory_path,
    }))
}

fn train_cmd(ctx: &RunContext, a: TrainArgs) -> Result<Value> {
    let out = ctx.out()?;
    let cfg = &ctx.config;
    let seq = load(&a.input)?;
    let defaults = TPNetConfig::default();
    let net = TPNetConfig {
        window: cfg.pick(a.window, "window", defaults.window)?,
        mode: match cfg.pick(a.mode, "mode", WindowArg::Online)? {
            WindowArg::Online => WindowMode::Online,
            WindowArg::SemiOnline => WindowMode::SemiOnline,
        },
        hidden: cfg.pick(a.hidden, "hidden", defaults.hidden)?,
    };
    net.validate()?;
    let train_defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: cfg.pick(a.lr, "lr", train_defaults.learning_rate)?,
        epochs: cfg.pick(a.epochs, "epochs", train_defaults.epochs)?,
        batch_size: cfg.pick(a.batch_size, "batch_size", train_defaults.batch_size)?,
        seed: ctx.seed,
        ..train_defaults
    };
    let copies = cfg.pick(a.augment_heading, "augment_heading", 0usize)?;
    let samples = temporal::samples_from_sequence(&seq, &net)?;
    let samples = temporal::augment_heading(&samples, copies, ctx.seed.wrapping_add(1));
    log::info!("training on {} samples", samples.len());
    let report = temporal::tpnet_train(&samples, &train, &net)?;
    report.params.save(out).with_context(|| format!("writing {}", out.display()))?;
    Ok(json!({
        "out": out,
        "samples": samples.len(),
        "parameters": report.params.num_parameters(),
        "config": net,
        "train": train,
        "epoch_losses": report.epoch_losses,
    }))
}

fn refine_cmd(ctx: &RunContext, a: RefineArgs) -> Result<Value> {
    let out = ctx.out()?;
    let params = TPNetParams::load(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let seq = load(&a.input)?;
    let refined = temporal::tpnet_refine_sequence(&params, &seq)?;
    save(&refined, out)?;
    let mut summary = json!({ "out": out, "frames": refined.len(), "config": params.config });
    if let Some(gt) = seq.ground_truth() {
        summary["input_mpjpe_mm"] = json!(mean_mpjpe(seq.frames(), gt));
        summary["refined_mpjpe_mm"] = json!(mean_mpjpe(refined.frames(), gt));
    }
    Ok(summary)
}

fn fit_cmd(ctx: &RunContext, a: FitArgs) -> Result<Value> {
    let out = ctx.out()?;
    let seq = load(&a.input)?;
    let targets = match a.lengths.or(ctx.config.get("lengths")?) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            ctx.skeleton.lengths_from_map(&serde_json::from_str(&text).context("parsing bone lengths")?)?
        }
        None => ctx.skeleton.canonical_lengths().to_vec(),
    };
    let fitted = seq
        .frames()
        .iter()
        .map(|p| fit_skeleton(p, &targets, &ctx.skeleton))
        .collect::<anatomik::Result<Vec<_>>>()?;
    let fitted = seq.with_frames(fitted)?;
    save(&fitted, out)?;
    let before = metrics::validity_report(seq.frames(), &ctx.skeleton)?;
    let after = metrics::validity_report(fitted.frames(), &ctx.skeleton)?;
    Ok(json!({
        "out": out,
        "frames": fitted.len(),
        "mean_pair_l1_mm_before": before.mean_pair_l1_mm,
        "mean_pair_l1_mm_after": after.mean_pair_l1_mm,
        "mean_bone_length_std_mm_before": before.mean_bone_length_std_mm,
        "mean_bone_length_std_mm_after": after.mean_bone_length_std_mm,
    }))
}

fn metrics_cmd(ctx: &RunContext, a: MetricsArgs) -> Result<Value> {
    let pred = load(&a.pred)?;
    let gts = match a.gt.or(ctx.config.get("gt")?) {
        Some(path) => load(&path)?.frames().to_vec(),
        None => pred
            .ground_truth()
            .context("no --gt given and the prediction file has no gt field")?
            .to_vec(),
    };
    if gts.len() != pred.len() {
        bail!("prediction has {} frames but ground truth has {}", pred.len(), gts.len());
    }
    let alignment = match ctx.config.pick(a.alignment, "alignment", AlignArg::Similarity)? {
        AlignArg::Similarity => Alignment::Similarity,
        AlignArg::Rigid => Alignment::Rigid,
    };
    let pck = PckConfig {
        threshold_mm: ctx.config.pick(a.pck_threshold, "pck_threshold", PckConfig::default().threshold_mm)?,
        ..PckConfig::default()
    };
    let report = metrics::evaluate(pred.frames(), &gts, &ctx.skeleton, &pck, alignment)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &ctx.out {
        let mut w = create(out)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.write_all(b"\n")?;
    }
    Ok(json!({ "out": ctx.out, "report": value }))
}

fn parse_axes(text: &str) -> Result<(Coord, Coord)> {
    let coord = |c: char| match c {
        'x' => Ok(Coord::X),
        'y' => Ok(Coord::Y),
        'z' => Ok(Coord::Z),
        other => bail!("unknown axis `{other}`"),
    };
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != 2 {
        bail!("--axes takes two letters such as `xz`, got `{text}`");
    }
    Ok((coord(chars[0])?, coord(chars[1])?))
}

fn surface_cmd(ctx: &RunContext, a: SurfaceArgs) -> Result<Value> {
    let out = ctx.out()?;
    let cfg = &ctx.config;
    let (base, gt) = match a.input.or(cfg.get("input")?) {
        Some(path) => {
            let seq = load(&path)?;
            let i = cfg.pick(a.frame, "frame", 0usize)?;
            let base = *seq.frames().get(i).context("frame out of range")?;
            let gt = seq.ground_truth().map(|g| g[i]).unwrap_or(base);
            (base, gt)
        }
        None => {
            let (legal, _) = analysis::elbow_reflection_example(&ctx.skeleton)?;
            (legal, legal)
        }
    };
    let defaults = GridSpec::default();
    let spec = GridSpec {
        joint: match a.joint.or(cfg.get("joint")?) {
            Some(name) => JointId::from_name(&name)?,
            None => defaults.joint,
        },
        axes: match a.axes.or(cfg.get("axes")?) {
            Some(text) => parse_axes(&text)?,
            None => defaults.axes,
        },
        center: None,
        half_extent: cfg.pick(a.half_extent, "half_extent", defaults.half_extent)?,
        resolution: cfg.pick(a.resolution, "resolution", defaults.resolution)?,
    };
    let weights = LossWeights::default();
    let surface = analysis::loss_surface_grid(&base, &gt, &spec, &ctx.skeleton, &weights)?;
    surface.write_csv(create(out)?)?;
    let best = surface
        .cells
        .iter()
        .min_by(|p, q| p.total_weak.total_cmp(&q.total_weak))
        .expect("grid is non-empty");
    Ok(json!({
        "out": out,
        "rows": surface.cells.len(),
        "joint": spec.joint,
        "axes": [spec.axes.0.name(), spec.axes.1.name()],
        "min_total_weak": { "u": best.u, "v": best.v, "value": best.total_weak },
    }))
}

fn sensitivity_cmd(ctx: &RunContext, a: SensitivityArgs) -> Result<Value> {
    let out = ctx.out()?;
    let cfg = &ctx.config;
    let params = TPNetParams::load(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let seq = load(&a.input)?;
    let frame = cfg.pick(a.frame, "frame", seq.len() / 2)?;
    if frame >= seq.len() {
        bail!("frame {frame} is out of range for {} frames", seq.len());
    }
    let window = temporal::window_at(seq.frames(), frame, &params.config);
    let epsilon = cfg.pick(a.epsilon, "epsilon", 1.0)?;
    let trials = cfg.pick(a.trials, "trials", 20usize)?;
    let map = analysis::sensitivity_map(&params, &window, epsilon, trials, ctx.seed)?;
    map.write_csv(create(out)?)?;
    let per_offset: Vec<Value> = map
        .offsets
        .iter()
        .enumerate()
        .map(|(k, t)| json!({ "t": t, "mean": map.offset_mean(k) }))
        .collect();
    Ok(json!({
        "out": out,
        "frame": frame,
        "epsilon": epsilon,
        "trials": trials,
        "per_offset": per_offset,
    }))
}
