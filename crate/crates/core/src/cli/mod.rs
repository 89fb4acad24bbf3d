//! Command-line harness: scenario generation, selection, sweeps and bound
//! reports.

mod sweep;

pub use sweep::{carry_over_select, parse_frames_list, run_sweep, ExperimentConfig, SweepOptions, SweepRecord, TimeScope, CSV_HEADER};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{bound_report, BoundOptions, DEFAULT_EXHAUSTIVE_MAX};
use crate::error::{invalid, Error, Result};
use crate::infomat::{BuildOptions, ProblemInstance};
use crate::scenario::{generate_scenario, ControlInput, Scenario, ScenarioConfig};
use crate::selectors::{run_method, Method, RunOptions, DEFAULT_EXHAUSTIVE_CAP};

pub const THREADS_ENV: &str = "INFOSELECT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "infoselect", version, about = "Information-driven visual feature selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario document.
    ScenarioGen(ScenarioGenArgs),
    /// Run one selector on a scenario.
    Select(SelectArgs),
    /// Sweep methods and budgets; writes CSV.
    Sweep(SweepArgs),
    /// Write a bound report.
    Bounds(BoundsArgs),
    /// Sweep over horizon lengths; writes CSV.
    HorizonSweep(HorizonSweepArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioGenArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub landmarks: usize,
    /// Horizon length T (the scenario has T+1 poses).
    #[arg(long)]
    pub frames: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON list with one control or one per step.
    #[arg(long)]
    pub controls: Option<PathBuf>,
    /// JSON generation parameters; flags above take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Scenario or problem-instance document.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub kappa: usize,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TimeScope::Select)]
    pub time_scope: TimeScope,
    #[arg(long, default_value_t = BuildOptions::default().sigma_bearing)]
    pub sigma_bearing: f64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub exhaustive_cap: u128,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Keep previously selected features that are still visible.
    #[arg(long)]
    pub carry_over: bool,
    /// Horizon lengths, e.g. `1..10,12,15`.
    #[arg(long)]
    pub frames_list: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HorizonSweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub frames_list: String,
    #[arg(long)]
    pub carry_over: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_MAX)]
    pub exhaustive_max: usize,
    #[arg(long)]
    pub kappa: usize,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Element-wise curvature to assume when N exceeds the exhaustive cap.
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub epsilon_taylor: Option<f64>,
    #[arg(long, default_value_t = BuildOptions::default().sigma_bearing)]
    pub sigma_bearing: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::NoTriangulableLandmark { .. }
        | Error::EpsilonOutOfRange { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::CapExceeded { .. } => 3,
        Error::BoundUndefined(_) => 4,
        Error::NotPositiveDefinite(_) | Error::Csv(_) => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Loads either a scenario (built with `opts`) or a serialized problem
/// instance; the latter is recognized by its `omega0` key.
pub fn load_problem(path: &Path, opts: &BuildOptions) -> Result<ProblemInstance> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("omega0").is_some() {
        ProblemInstance::from_json(&text)
    } else {
        let scenario: Scenario = serde_json::from_value(value)?;
        scenario.validate()?;
        ProblemInstance::build(&scenario, opts)
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn cmd_scenario_gen(args: &ScenarioGenArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<ScenarioConfig>(&read(p)?)?,
        None => ScenarioConfig::default(),
    };
    cfg.num_landmarks = args.landmarks;
    cfg.horizon = args.frames;
    if let Some(p) = &args.controls {
        cfg.controls = serde_json::from_str::<Vec<ControlInput>>(&read(p)?)?;
    }
    let scenario = generate_scenario(args.seed, &cfg)?;
    let triangulable = scenario
        .landmarks
        .iter()
        .filter(|l| scenario.visibility(l).iter().filter(|&&v| v).count() >= 2)
        .count();
    let mut text = scenario.to_json()?;
    text.push('\n');
    fs::write(&args.out, text)?;
    println!("landmarks: {}, triangulable: {triangulable}", scenario.landmarks.len());
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let start = Instant::now();
    let problem = load_problem(&args.scenario, &BuildOptions { sigma_bearing: args.sigma_bearing })?;
    let build_s = start.elapsed().as_secs_f64();
    let opts = RunOptions { epsilon: args.epsilon, seed: args.seed, exhaustive_cap: args.exhaustive_cap };
    let mut result = run_method(&problem, args.method, args.kappa, &opts)?;
    if args.time_scope == TimeScope::Total {
        result.elapsed_s += build_s;
    }
    let mut text = result.to_json()?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let problem = load_problem(&args.scenario, &BuildOptions { sigma_bearing: args.sigma_bearing })?;
    let opts = BoundOptions {
        kappa: args.kappa,
        exhaustive_max: args.exhaustive_max,
        epsilon_sample: args.epsilon,
        epsilon_taylor: args.epsilon_taylor,
        alpha_max_assumed: args.alpha_max,
    };
    let report = bound_report(&problem, &opts)?;
    let mut text = report.to_json()?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn cmd_sweep(config: &Path, frames_list: Option<&str>, carry_over: bool, out: Option<&Path>) -> Result<()> {
    let mut cfg: ExperimentConfig = serde_json::from_str(&read(config)?)?;
    if let Some(list) = frames_list {
        cfg.horizons = parse_frames_list(list)?;
    }
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let out = out.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(|p| base_dir.join(p)));
    let opts = SweepOptions { carry_over, base_dir: base_dir.to_path_buf() };
    match out {
        Some(path) => run_sweep(&cfg, &opts, fs::File::create(path)?),
        None => run_sweep(&cfg, &opts, std::io::stdout().lock()),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::ScenarioGen(a) => cmd_scenario_gen(a),
        Command::Select(a) => cmd_select(a),
        Command::Sweep(a) => cmd_sweep(&a.config, a.frames_list.as_deref(), a.carry_over, a.out.as_deref()),
        Command::HorizonSweep(a) => cmd_sweep(&a.config, Some(&a.frames_list), a.carry_over, a.out.as_deref()),
        Command::Bounds(a) => cmd_bounds(a),
    }
}

/// Entry point for the binary: parses arguments and maps errors to exit codes.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
