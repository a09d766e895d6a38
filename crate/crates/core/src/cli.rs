//! Commands behind the `normalflow` binary.
//!
//! Each command returns a serializable report and touches the filesystem
//! only through its arguments, so tests drive them without a subprocess.
//! All randomness derives from one run seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, RuntimeStats, SuccessBound};
use crate::icp::{IcpConfig, IcpRegistrar};
use crate::maps::container::{load_frame, save_frame};
use crate::maps::{GridGeometry, TactileFrame};
use crate::se3::{params_to_transform, transform_distance, PoseParams, RigidTransform};
use crate::solver::{ForwardAdditive, RegistrationResult, SolverConfig};
use crate::synth::{
    render_frame, render_sequence, MotionSegment, NoiseSpec, SceneSpec, TrajectorySpec,
};
use crate::tracker::{
    close_loop, correct_pose_log, find_loop_frame, track_naive, track_sequence, KeyframePolicy,
    Registrar,
};

pub const GROUND_TRUTH_CSV: &str = "ground_truth.csv";
pub const CONFIG_ECHO: &str = "config.toml";
pub const DATASET_JSON: &str = "dataset.json";
pub const POSES_CSV: &str = "poses.csv";
pub const CLOSED_POSES_CSV: &str = "poses_loop_closed.csv";
pub const TRACK_JSON: &str = "track.json";
pub const FRAME_EXTENSION: &str = "nflw";

const NOISE_STREAM: u64 = 1;
const SAMPLER_STREAM: u64 = 2;
const POSE_STREAM: u64 = 3;

/// Seed for one component, independent of the others.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.{FRAME_EXTENSION}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Normalflow,
    NormalflowForward,
    Icp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Normalflow => "normalflow",
            Method::NormalflowForward => "normalflow-forward",
            Method::Icp => "icp",
        }
    }
}

/// Registration settings shared by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodOptions {
    pub method: Method,
    /// Points sampled per registration.
    pub n: usize,
    pub seed: u64,
    pub zero_height: bool,
}

impl MethodOptions {
    pub fn new(method: Method, seed: u64) -> Self {
        MethodOptions {
            method,
            n: SolverConfig::default().subsample_n,
            seed,
            zero_height: false,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            subsample_n: self.n,
            rng_seed: derive_seed(self.seed, SAMPLER_STREAM),
            zero_height_mode: self.zero_height,
            ..SolverConfig::default()
        }
    }

    pub fn registrar(&self) -> Result<Box<dyn Registrar + Send + Sync>> {
        let cfg = self.solver_config();
        cfg.validate()?;
        Ok(match self.method {
            Method::Normalflow => Box::new(cfg),
            Method::NormalflowForward => Box::new(ForwardAdditive(cfg)),
            Method::Icp => {
                if self.zero_height {
                    return Err(Error::Config(
                        "zero-height mode applies to normalflow only".into(),
                    ));
                }
                Box::new(IcpRegistrar {
                    config: IcpConfig::default(),
                    subsample_n: self.n,
                    seed: cfg.rng_seed,
                })
            }
        })
    }
}

/// Noise settings as written in a config file; the seed comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub gradient_sigma: f64,
    pub heights_from_noisy_poisson: bool,
}

/// Dataset description read from TOML:
///
/// ```toml
/// seed = 7
/// frame_interval = 0.0333
///
/// [grid]
/// height_px = 240
/// width_px = 320
/// pixel_pitch = 0.0625
///
/// [scene]
/// kind = "textured_sphere"
/// radius = 6.0
/// texture_amplitude = 0.5
/// texture_frequency = 1.8
/// indentation = 1.0
///
/// [noise]
/// gradient_sigma = 0.005
///
/// [[trajectory]]
/// kind = "roll"
/// axis = [0.0, 1.0, 0.0]
/// angle_deg = 360.0
/// steps = 360
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
    #[serde(default)]
    pub grid: GridGeometry,
    pub scene: SceneSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub trajectory: Vec<MotionSegment>,
}

/// Serde ignores unknown keys inside the flattened scene table, so a typo
/// there would otherwise fall back to a default silently.
fn reject_unknown_scene_keys(text: &str, scene: &SceneSpec) -> Result<()> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let known = toml::Table::try_from(scene)
        .map_err(|e| Error::Config(format!("cannot echo scene: {e}")))?;
    if let Some(toml::Value::Table(given)) = raw.get("scene") {
        if let Some(k) = given.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::Config(format!("unknown field `{k}` in [scene]")));
        }
    }
    Ok(())
}

fn default_frame_interval() -> f64 {
    crate::synth::DEFAULT_FRAME_INTERVAL
}

impl SynthConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        reject_unknown_scene_keys(text, &cfg.scene)?;
        GridGeometry::new(cfg.grid.height_px, cfg.grid.width_px, cfg.grid.pixel_pitch)?;
        cfg.scene.validate()?;
        if !(cfg.noise.gradient_sigma >= 0.0) {
            return Err(Error::Config("noise.gradient_sigma must be >= 0".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let cfg =
            Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    /// Command-line seed wins over the file's.
    pub fn resolve_seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.seed).unwrap_or(0)
    }

    pub fn noise_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            gradient_sigma: self.noise.gradient_sigma,
            heights_from_noisy_poisson: self.noise.heights_from_noisy_poisson,
            rng_seed: derive_seed(seed, NOISE_STREAM),
        }
    }

    pub fn trajectory_spec(&self) -> Result<TrajectorySpec> {
        TrajectorySpec::composite(
            RigidTransform::identity(),
            &self.trajectory,
            self.scene.pivot(),
            self.frame_interval,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub frames: usize,
    pub seed: u64,
    pub geometry: GridGeometry,
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
}

/// Renders the configured dataset into `out_dir`: one container per frame,
/// the ground-truth pose log, the config text and a JSON manifest.
pub fn cmd_synth(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<SynthReport> {
    let (cfg, text) = SynthConfig::load(config)?;
    let seed = cfg.resolve_seed(seed);
    let noise = cfg.noise_spec(seed);
    let seq = render_sequence(&cfg.scene, &cfg.trajectory_spec()?, &cfg.grid, &noise)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    for (i, f) in seq.frames.iter().enumerate() {
        save_frame(out_dir.join(frame_file_name(i)), f)?;
    }
    eval::save_pose_csv(out_dir.join(GROUND_TRUTH_CSV), &seq.ground_truth)?;
    let echo = out_dir.join(CONFIG_ECHO);
    fs::write(&echo, text).map_err(|e| Error::file(&echo, e))?;
    let report = SynthReport {
        frames: seq.frames.len(),
        seed,
        geometry: cfg.grid,
        scene: cfg.scene,
        noise,
    };
    write_json(&out_dir.join(DATASET_JSON), &report)?;
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Frame files of a dataset directory, in index order.
pub fn dataset_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        let is_frame = path.extension().is_some_and(|x| x == FRAME_EXTENSION)
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_"));
        if is_frame {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::Format(format!(
            "no frame files in {}",
            dir.display()
        )));
    }
    paths.sort();
    Ok(paths)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<TactileFrame>> {
    dataset_frames(dir)?.iter().map(load_frame).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterReport {
    pub method: Method,
    #[serde(flatten)]
    pub result: RegistrationResult,
}

pub fn cmd_register(
    reference: &Path,
    target: &Path,
    opts: &MethodOptions,
) -> Result<RegisterReport> {
    let reg = opts.registrar()?;
    let (a, b) = (load_frame(reference)?, load_frame(target)?);
    let result = reg.register(&a, &b, &RigidTransform::identity())?;
    Ok(RegisterReport {
        method: opts.method,
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub registration: MethodOptions,
    pub policy: KeyframePolicy,
    /// Compose frame-to-frame estimates instead of keyframing.
    pub naive: bool,
    pub loop_close: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LoopOutcome {
    NotRequested,
    NoCandidate,
    Closed {
        frame: usize,
        /// Frame indices of the loop nodes the error was spread over.
        nodes: Vec<usize>,
        constraint: RigidTransform,
        /// Size of the correction applied at the loop frame.
        correction_deg: f64,
        correction_mm: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackReport {
    pub method: Method,
    pub naive: bool,
    pub frames: usize,
    pub keyframe_indices: Vec<usize>,
    pub lost_frames: Vec<usize>,
    #[serde(rename = "loop")]
    pub loop_outcome: LoopOutcome,
}

/// Tracks every frame of `dataset` and writes the pose log (plus the
/// loop-closed log when requested) and a JSON sidecar into `out_dir`.
pub fn cmd_track(dataset: &Path, out_dir: &Path, opts: &TrackOptions) -> Result<TrackReport> {
    opts.policy.validate()?;
    let reg = opts.registration.registrar()?;
    let frames = load_dataset(dataset)?;

    let (poses, keyframes, lost) = if opts.naive {
        let poses = track_naive(&frames, reg.as_ref())?;
        let all: Vec<usize> = (0..poses.len()).collect();
        (poses, all, Vec::new())
    } else {
        let state = track_sequence(frames.iter().cloned(), &opts.policy, reg.as_ref())?;
        let lost = (0..state.frames_processed())
            .filter(|&i| state.lost_flags()[i])
            .collect();
        (
            state.poses().to_vec(),
            state.keyframe_indices().to_vec(),
            lost,
        )
    };

    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    eval::save_pose_csv(out_dir.join(POSES_CSV), &poses)?;

    let loop_outcome = if !opts.loop_close {
        LoopOutcome::NotRequested
    } else if let Some(c) = find_loop_frame(&poses, &opts.policy) {
        let constraint = reg.register(&frames[0], &frames[c], &poses[c])?;
        let nodes: Vec<usize> = keyframes
            .iter()
            .copied()
            .filter(|&k| k < c)
            .chain([c])
            .collect();
        let node_poses: Vec<RigidTransform> = nodes.iter().map(|&k| poses[k]).collect();
        close_loop(&node_poses, &constraint)?;
        let corrected = correct_pose_log(&poses, &nodes, &constraint.transform)?;
        eval::save_pose_csv(out_dir.join(CLOSED_POSES_CSV), &corrected)?;
        let (correction, shift) = transform_distance(&poses[c], &constraint.transform);
        LoopOutcome::Closed {
            frame: c,
            nodes,
            constraint: constraint.transform,
            correction_deg: correction.to_degrees(),
            correction_mm: shift,
        }
    } else {
        LoopOutcome::NoCandidate
    };

    let report = TrackReport {
        method: opts.registration.method,
        naive: opts.naive,
        frames: poses.len(),
        keyframe_indices: keyframes,
        lost_frames: lost,
        loop_outcome,
    };
    write_json(&out_dir.join(TRACK_JSON), &report)?;
    Ok(report)
}

pub fn cmd_eval(estimate: &Path, truth: &Path, method: &str) -> Result<EvalReport> {
    let est = eval::load_pose_csv(estimate)?;
    let gt = eval::load_pose_csv(truth)?;
    eval::evaluate(method, &est, &gt, SuccessBound::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub registration: MethodOptions,
    /// Half-width of the rotation offsets, degrees.
    pub rot_range: f64,
    /// Half-width of the translation offsets, millimeters.
    pub trans_range: f64,
    pub samples: usize,
    /// Region whose success rate is reported separately.
    pub inner_rot: f64,
    pub inner_trans: f64,
    pub bins: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            registration: MethodOptions::new(Method::Normalflow, 0),
            rot_range: 60.0,
            trans_range: 2.0,
            samples: 2000,
            inner_rot: 15.0,
            inner_trans: 0.5,
            bins: 24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetKind {
    Rotation,
    Translation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSample {
    pub kind: OffsetKind,
    /// 0, 1, 2 for x, y, z.
    pub axis: usize,
    /// Degrees or millimeters, added to the true parameter on `axis`.
    pub offset: f64,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetBin {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub method: Method,
    pub truth: PoseParams,
    pub success_bound: SuccessBound,
    pub success_rate: f64,
    pub inner_success_rate: f64,
    /// Success rate over samples with a nonzero offset.
    pub nontrivial_success_rate: f64,
    /// Largest offset magnitude below which every sample succeeded.
    pub rotation_radius_deg: f64,
    pub translation_radius_mm: f64,
    pub rotation_bins: Vec<OffsetBin>,
    pub translation_bins: Vec<OffsetBin>,
    pub samples: Vec<ConvergenceSample>,
}

fn linspace(half_width: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if n == 1 {
            0.0
        } else {
            -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64
        }
    })
}

fn offsets(opts: &ConvergenceOptions) -> Vec<(OffsetKind, usize, f64)> {
    let n_rot = opts.samples / 2;
    let n_trans = opts.samples - n_rot;
    let rot = linspace(opts.rot_range, n_rot)
        .enumerate()
        .map(|(k, v)| (OffsetKind::Rotation, k % 3, v));
    let trans = linspace(opts.trans_range, n_trans)
        .enumerate()
        .map(|(k, v)| (OffsetKind::Translation, k % 3, v));
    rot.chain(trans).collect()
}

fn bins(
    samples: &[ConvergenceSample],
    kind: OffsetKind,
    half_width: f64,
    count: usize,
) -> Vec<OffsetBin> {
    let width = 2.0 * half_width / count as f64;
    (0..count)
        .map(|b| {
            let lo = -half_width + b as f64 * width;
            let hi = lo + width;
            let last = b + 1 == count;
            let inside: Vec<bool> = samples
                .iter()
                .filter(|s| s.kind == kind && s.offset >= lo && (s.offset < hi || last))
                .map(|s| s.success)
                .collect();
            OffsetBin {
                lo,
                hi,
                samples: inside.len(),
                success_rate: rate(&inside),
            }
        })
        .collect()
}

fn rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&s| s).count() as f64 / flags.len() as f64
}

fn success_radius(samples: &[ConvergenceSample], kind: OffsetKind, half_width: f64) -> f64 {
    let first_failure = samples
        .iter()
        .filter(|s| s.kind == kind && !s.success)
        .map(|s| s.offset.abs())
        .fold(f64::INFINITY, f64::min);
    first_failure.min(half_width)
}

/// Registers one scene pair from many perturbed initial guesses and reports
/// how often each converges to the true motion.
pub fn cmd_convergence(config: &Path, opts: &ConvergenceOptions) -> Result<ConvergenceReport> {
    let (cfg, _) = SynthConfig::load(config)?;
    convergence_sweep(&cfg, opts)
}

pub fn convergence_sweep(
    cfg: &SynthConfig,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    if opts.samples == 0 || opts.bins == 0 {
        return Err(Error::Config("samples and bins must be positive".into()));
    }
    let seed = opts.registration.seed;
    let reg = opts.registration.registrar()?;
    let truth = sample_pose(derive_seed(seed, POSE_STREAM), 5.0, 0.25);
    let truth_t = params_to_transform(&truth);
    let noise = cfg.noise_spec(seed);
    let reference = render_frame(&cfg.scene, &RigidTransform::identity(), &cfg.grid, &noise)?;
    let target = crate::synth::render_indexed(&cfg.scene, &truth_t, &cfg.grid, &noise, 1, 0.0)?;
    let bound = SuccessBound::default();

    let offsets = offsets(opts);
    let run = |&(kind, axis, offset): &(OffsetKind, usize, f64)| {
        let mut p = truth.as_array();
        match kind {
            OffsetKind::Rotation => p[3 + axis] += offset.to_radians(),
            OffsetKind::Translation => p[axis] += offset,
        }
        let init = params_to_transform(&PoseParams::from_array(p));
        let mut sample = ConvergenceSample {
            kind,
            axis,
            offset,
            success: false,
            error_deg: None,
            error_mm: None,
            failure: None,
        };
        match reg.register(&reference, &target, &init) {
            Ok(r) => {
                let (angle, dist) = transform_distance(&r.transform, &truth_t);
                let deg = angle.to_degrees();
                sample.success = deg < bound.rotation_deg && dist < bound.translation_mm;
                sample.error_deg = Some(deg);
                sample.error_mm = Some(dist);
            }
            Err(e) => sample.failure = Some(e.kind().to_owned()),
        }
        sample
    };
    let samples = parallel_map(&offsets, run);

    let flags: Vec<bool> = samples.iter().map(|s| s.success).collect();
    let inner: Vec<bool> = samples
        .iter()
        .filter(|s| match s.kind {
            OffsetKind::Rotation => s.offset.abs() <= opts.inner_rot,
            OffsetKind::Translation => s.offset.abs() <= opts.inner_trans,
        })
        .map(|s| s.success)
        .collect();
    let nontrivial: Vec<bool> = samples
        .iter()
        .filter(|s| s.offset != 0.0)
        .map(|s| s.success)
        .collect();
    Ok(ConvergenceReport {
        method: opts.registration.method,
        truth,
        success_bound: bound,
        success_rate: rate(&flags),
        inner_success_rate: rate(&inner),
        nontrivial_success_rate: rate(&nontrivial),
        rotation_radius_deg: success_radius(&samples, OffsetKind::Rotation, opts.rot_range),
        translation_radius_mm: success_radius(&samples, OffsetKind::Translation, opts.trans_range),
        rotation_bins: bins(&samples, OffsetKind::Rotation, opts.rot_range, opts.bins),
        translation_bins: bins(
            &samples,
            OffsetKind::Translation,
            opts.trans_range,
            opts.bins,
        ),
        samples,
    })
}

/// Uniform pose with each angle in `+-rot_deg` and each translation in
/// `+-trans_mm`.
pub fn sample_pose(seed: u64, rot_deg: f64, trans_mm: f64) -> PoseParams {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = || rng.random_range(-trans_mm..=trans_mm);
    let (x, y, z) = (t(), t(), t());
    let mut r = || rng.random_range(-rot_deg..=rot_deg).to_radians();
    PoseParams::new(x, y, z, r(), r(), r())
}

/// Maps `f` over `items` on all cores, keeping input order.
fn parallel_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(items.len())
        .max(1);
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: Method,
    pub n: usize,
    pub pairs: usize,
    pub failures: usize,
    pub runtime: RuntimeStats,
    pub soft_target_ms: f64,
}

/// Times single-threaded registration of consecutive frame pairs after one
/// untimed warm-up run.
pub fn cmd_bench(dataset: &Path, opts: &MethodOptions, max_pairs: usize) -> Result<BenchReport> {
    let reg = opts.registrar()?;
    let frames = load_dataset(dataset)?;
    if frames.len() < 2 {
        return Err(Error::Format("benchmarking needs at least 2 frames".into()));
    }
    let pairs: Vec<(usize, usize)> = (1..frames.len())
        .map(|i| (i - 1, i))
        .take(max_pairs.max(1))
        .collect();
    let identity = RigidTransform::identity();
    let _ = reg.register(&frames[0], &frames[1], &identity);
    let mut times = Vec::with_capacity(pairs.len());
    let mut failures = 0;
    for &(a, b) in &pairs {
        let start = Instant::now();
        let ok = reg.register(&frames[a], &frames[b], &identity).is_ok();
        times.push(start.elapsed().as_secs_f64() * 1e3);
        failures += !ok as usize;
    }
    Ok(BenchReport {
        method: opts.method,
        n: opts.n,
        pairs: pairs.len(),
        failures,
        runtime: RuntimeStats::from_millis(&times).expect("at least one pair"),
        soft_target_ms: 15.0,
    })
}
