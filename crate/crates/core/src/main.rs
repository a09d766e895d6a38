use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use normalflow::cli::{self, ConvergenceOptions, Method, MethodOptions, TrackOptions};
use normalflow::tracker::KeyframePolicy;
use normalflow::Error;

const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

/// Tactile 6DoF registration and tracking from surface-normal maps.
///
/// Reports go to stdout as JSON. Exit status: 0 success, 2 usage error,
/// 3 data error, 4 the solver found the data unregistrable.
#[derive(Parser)]
#[command(name = "normalflow", version)]
struct Cli {
    /// Run seed; every random choice derives from it.
    #[arg(long, global = true, env = "NORMALFLOW_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset from a TOML config.
    Synth {
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Register a target frame against a reference frame.
    Register {
        reference: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Track every frame of a dataset relative to its first frame.
    Track {
        dataset: PathBuf,
        /// Output directory; defaults to the dataset directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
        /// Keyframe rotation threshold, radians.
        #[arg(long, default_value_t = KeyframePolicy::default().rot_threshold)]
        rot_threshold: f64,
        /// Keyframe translation threshold, millimeters.
        #[arg(long, default_value_t = KeyframePolicy::default().trans_threshold)]
        trans_threshold: f64,
        /// Minimum fraction of keyframe contact shared with the current frame.
        #[arg(long, default_value_t = KeyframePolicy::default().min_overlap)]
        min_overlap: f64,
        /// Compose frame-to-frame estimates instead of keyframing.
        #[arg(long)]
        naive: bool,
        /// Close the loop back to the first frame and write a corrected log.
        #[arg(long)]
        loop_close: bool,
    },
    /// Per-axis mean absolute error of a pose log against ground truth.
    Eval {
        estimate: PathBuf,
        ground_truth: PathBuf,
        /// Label recorded in the report.
        #[arg(long, default_value = "estimate")]
        method: String,
    },
    /// Success rate of registration from perturbed initial guesses.
    Convergence {
        config: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        /// Rotation offsets span +-this many degrees.
        #[arg(long, default_value_t = 60.0)]
        rot_range: f64,
        /// Translation offsets span +-this many millimeters.
        #[arg(long, default_value_t = 2.0)]
        trans_range: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Inner region reported separately, degrees.
        #[arg(long, default_value_t = 15.0)]
        inner_rot: f64,
        /// Inner region reported separately, millimeters.
        #[arg(long, default_value_t = 0.5)]
        inner_trans: f64,
        #[arg(long, default_value_t = 24)]
        bins: usize,
    },
    /// Time registration of consecutive frame pairs.
    Bench {
        dataset: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value_t = Method::Normalflow)]
    method: Method,
    /// Points sampled per registration.
    #[arg(long, short, default_value_t = 5000)]
    n: usize,
    /// Treat the reference surface as flat when warping.
    #[arg(long)]
    zero_height: bool,
}

impl MethodArgs {
    fn options(&self, seed: Option<u64>) -> MethodOptions {
        MethodOptions {
            method: self.method,
            n: self.n,
            seed: seed.unwrap_or(0),
            zero_height: self.zero_height,
        }
    }
}

fn run(cli: Cli) -> normalflow::Result<String> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth { config, out } => json(cli::cmd_synth(&config, &out, seed)?),
        Command::Register {
            reference,
            target,
            method,
        } => json(cli::cmd_register(
            &reference,
            &target,
            &method.options(seed),
        )?),
        Command::Track {
            dataset,
            out,
            method,
            rot_threshold,
            trans_threshold,
            min_overlap,
            naive,
            loop_close,
        } => {
            let opts = TrackOptions {
                registration: method.options(seed),
                policy: KeyframePolicy {
                    rot_threshold,
                    trans_threshold,
                    min_overlap,
                },
                naive,
                loop_close,
            };
            let out = out.unwrap_or_else(|| dataset.clone());
            json(cli::cmd_track(&dataset, &out, &opts)?)
        }
        Command::Eval {
            estimate,
            ground_truth,
            method,
        } => json(cli::cmd_eval(&estimate, &ground_truth, &method)?),
        Command::Convergence {
            config,
            method,
            rot_range,
            trans_range,
            samples,
            inner_rot,
            inner_trans,
            bins,
        } => {
            let opts = ConvergenceOptions {
                registration: method.options(seed),
                rot_range,
                trans_range,
                samples,
                inner_rot,
                inner_trans,
                bins,
            };
            json(cli::cmd_convergence(&config, &opts)?)
        }
        Command::Bench {
            dataset,
            method,
            pairs,
        } => json(cli::cmd_bench(&dataset, &method.options(seed), pairs)?),
    }
}

fn json<T: Serialize>(report: T) -> normalflow::Result<String> {
    serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("cannot serialize report: {e}")))
}

/// Writes one line to stdout; a closed pipe is not an error worth reporting.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            emit(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body =
                serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            emit(&body.to_string());
            eprintln!("normalflow: {e}");
            ExitCode::from(if e.is_degenerate() {
                EXIT_DEGENERATE
            } else {
                EXIT_DATA
            })
        }
    }
}
