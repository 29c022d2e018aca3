//! Command-line front end: target generation, loss verification, metric
//! evaluation, and kernel benchmarking over the laneforge library.
//!
//! Exit codes: 0 success, 1 data errors (malformed inputs, failed checks),
//! 2 usage or IO errors. All randomness flows from the single `--seed`.

mod cmd_eval;
mod cmd_gen_targets;
mod cmd_kernel_bench;
mod cmd_loss_check;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use laneforge::config::{Preset, RunConfig};

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input data or a failed verification: exit 1.
    Data(String),
    /// Bad invocation or IO trouble: exit 2.
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(msg) => write!(f, "{msg}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn io_err(what: &str, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{what}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "laneforge",
    version,
    about = "Lane-detection numerical toolkit"
)]
struct Cli {
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    cmd: Command,
}

/// Flags shared by every subcommand. Each one overrides the preset value.
#[derive(Args)]
struct ConfigFlags {
    /// Dataset preset: culane, tusimple, or custom.
    #[arg(long, global = true, default_value = "culane")]
    preset: String,
    /// Gaussian radius of heat-map supervision, in grid cells.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Heat-map threshold gating the theta map.
    #[arg(long = "t-theta", global = true)]
    t_theta: Option<f64>,
    /// Segment radius of the overlap losses, in pixels.
    #[arg(long = "extend-e", global = true)]
    extend_e: Option<f64>,
    /// Number of anchors to decode.
    #[arg(long = "anchors", global = true)]
    anchors: Option<usize>,
    /// Input canvas as WxH, for example 800x320.
    #[arg(long = "input-size", global = true)]
    input_size: Option<String>,
    /// Seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to the LANEFORGE_JOBS env var.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let preset = Preset::from_name(&self.preset).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut cfg = RunConfig::from_preset(preset);
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.t_theta {
            cfg.t_theta = v;
        }
        if let Some(v) = self.extend_e {
            cfg.e = v;
        }
        if let Some(v) = self.anchors {
            cfg.n_anchors = v;
        }
        if let Some(ref s) = self.input_size {
            let (w, h) = parse_size_2d(s)?;
            cfg.input_w = w;
            cfg.input_h = h;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn jobs(&self) -> Result<Option<usize>, CliError> {
        if let Some(j) = self.jobs {
            return Ok(Some(j));
        }
        match std::env::var("LANEFORGE_JOBS") {
            Ok(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("LANEFORGE_JOBS=\"{s}\" is not a number"))),
            Err(_) => Ok(None),
        }
    }
}

fn parse_size_2d(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Usage(format!("--input-size \"{s}\" is not WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

/// Aggregator variant selector for the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchVariant {
    Baseline,
    A,
    B,
    C,
}

#[derive(Subcommand)]
enum Command {
    /// Generate heat-map, theta-map, and anchor artifacts from annotations.
    GenTargets {
        /// Directory of annotation files (*.lines.txt, *.json, *.jsonl).
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Verify loss gradients against finite differences plus range and
    /// degeneration invariants.
    LossCheck {
        /// Random instances per check; 0 skips everything.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Negative control: perturb the analytic gradient and expect failure.
        #[arg(long, hide = true)]
        break_grad: bool,
    },
    /// Score a prediction directory against a ground-truth directory.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gts: PathBuf,
        /// Matching rule: culane (IoU F1) or tusimple (point accuracy).
        #[arg(long, value_enum, default_value_t = cmd_eval::EvalMode::Culane)]
        mode: cmd_eval::EvalMode,
    },
    /// Time the forward kernels and emit a CSV table.
    KernelBench {
        /// Comma-separated CxHxW sizes, for example 4x40x100.
        #[arg(long, default_value = "4x40x100,8x20x50")]
        sizes: String,
        /// Aggregator variant for the attention rows.
        #[arg(long, value_enum, default_value_t = BenchVariant::C)]
        variant: BenchVariant,
        /// Run the oracle equivalence suite before timing.
        #[arg(long)]
        check_oracle: bool,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.flags.resolve()?;
    if let Some(jobs) = cli.flags.jobs()? {
        // A zero thread count means "let the runtime pick".
        if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        }
    }
    match &cli.cmd {
        Command::GenTargets { annotations } => {
            cmd_gen_targets::run(annotations, cli.flags.out.as_deref(), &cfg)
        }
        Command::LossCheck { trials, break_grad } => {
            cmd_loss_check::run(*trials, *break_grad, &cfg)
        }
        Command::Eval { preds, gts, mode } => {
            cmd_eval::run(preds, gts, *mode, cli.flags.out.as_deref(), &cfg)
        }
        Command::KernelBench {
            sizes,
            variant,
            check_oracle,
        } => cmd_kernel_bench::run(
            sizes,
            *variant,
            *check_oracle,
            cli.flags.out.as_deref(),
            &cfg,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
