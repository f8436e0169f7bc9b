use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use memgate::config::RunConfig;
use memgate::gating::format_trace;
use memgate::membank::MemoryBank;
use memgate::metrics::{compare, evaluate, pair_revisits, DEFAULT_TOLERANCE};
use memgate::simworld::{run_episode, EpisodeRecord};
use memgate::trajectory::{
    apply_history_dropout, export_re10k, gen_pattern, import_re10k, synth_pseudo_loop, LoopKind,
    PatternKind, PatternSpec, Trajectory,
};

/// Relative output paths are resolved against this directory when it is set.
const OUT_DIR_ENV: &str = "MEMGATE_OUT_DIR";

#[derive(Parser)]
#[command(name = "memgate", version, about = "Camera-aware memory gating pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, import and export camera trajectories.
    #[command(subcommand)]
    Traj(TrajCommand),
    /// Gate decisions for a trajectory against a memory bank.
    #[command(subcommand)]
    Gates(GatesCommand),
    /// Training-pair synthesis.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Simulated episodes.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Revisit-consistency evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Paired-run reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Run configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand)]
enum TrajCommand {
    /// Generate a stress-test trajectory.
    Gen(TrajGen),
    /// Convert a RealEstate10K camera file to the native format.
    ImportRe10k {
        input: PathBuf,
        #[arg(long, default_value_t = 854)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a trajectory as a RealEstate10K camera file.
    ExportRe10k {
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrajGen {
    #[arg(long, value_parser = parse_kind)]
    kind: PatternKind,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Revisit cycles.
    #[arg(long)]
    cycles: Option<usize>,
    /// Revisit yaw amplitude, degrees.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Lateral offset of the return path.
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum GatesCommand {
    Compute {
        #[arg(long)]
        traj: PathBuf,
        /// Memory bank directory; empty history when omitted.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Forward-backward pseudo-loop with strided history references.
    PseudoLoop {
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        stride: usize,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    Run {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Force every gate closed.
        #[arg(long)]
        no_memory: bool,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    Consistency {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// JSON report; a text table goes to standard output either way.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Per-pair CSV rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Per-revisit deltas between two episodes of the same trajectory (a − b).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Defaults to standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the default configuration.
    Defaults,
}

fn parse_kind(s: &str) -> Result<PatternKind, String> {
    s.parse()
}

/// Failure class, mapped to the exit code.
enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn compute(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn compute(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Compute(e.into()))
    }
}

fn out_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .usage()
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    let path = out_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))
            .compute()?;
    }
    fs::write(&path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .compute()
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => write_output(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::from_json(&read_input(p)?)
            .with_context(|| format!("config {}", p.display()))
            .usage(),
    }
}

fn load_trajectory(path: &Path) -> Result<Trajectory, Failure> {
    Trajectory::from_json(&read_input(path)?)
        .with_context(|| format!("trajectory {}", path.display()))
        .usage()
}

fn load_episode(dir: &Path) -> Result<EpisodeRecord, Failure> {
    if !dir.join("episode.json").is_file() {
        return Err(Failure::Usage(anyhow!("{} is not an episode directory", dir.display())));
    }
    EpisodeRecord::load(dir)
        .with_context(|| format!("episode {}", dir.display()))
        .compute()
}

fn traj_gen(args: TrajGen) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let mut spec = PatternSpec::defaults(args.kind, args.frames);
    match &mut spec {
        PatternSpec::Revisit {
            cycles,
            amplitude_deg,
            ..
        } => {
            *cycles = args.cycles.unwrap_or(*cycles);
            *amplitude_deg = args.amplitude.unwrap_or(*amplitude_deg);
        }
        PatternSpec::Offset { offset, .. } => *offset = args.offset.unwrap_or(*offset),
        _ => {}
    }
    let traj = gen_pattern(&spec, args.seed, &cfg.rig())
        .and_then(|t| t.with_segment_length(cfg.segment_length))
        .usage()?;
    write_output(&args.output, &traj.to_json())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Traj(TrajCommand::Gen(args)) => traj_gen(args),
        Command::Traj(TrajCommand::ImportRe10k {
            input,
            width,
            height,
            output,
        }) => {
            let traj = import_re10k(&read_input(&input)?, width, height)
                .with_context(|| format!("{}", input.display()))
                .usage()?;
            write_output(&output, &traj.to_json())
        }
        Command::Traj(TrajCommand::ExportRe10k { input, output }) => {
            let traj = load_trajectory(&input)?;
            emit(output.as_deref(), &export_re10k(&traj))
        }
        Command::Gates(GatesCommand::Compute {
            traj,
            history,
            config,
            output,
        }) => {
            let cfg = load_config(config.as_deref())?;
            let traj = load_trajectory(&traj)?;
            let bank = match history {
                Some(dir) => MemoryBank::load(&dir)
                    .with_context(|| format!("memory bank {}", dir.display()))
                    .usage()?,
                None => MemoryBank::new(),
            };
            let decisions = bank.gate(traj.poses(), &cfg.gating());
            emit(output.as_deref(), &format_trace(&decisions))
        }
        Command::Synth(SynthCommand::PseudoLoop {
            frames,
            stride,
            dropout,
            seed,
            output,
        }) => {
            let mut pl = synth_pseudo_loop(frames, stride, LoopKind::ForwardBackward).usage()?;
            pl.pairs = apply_history_dropout(&pl.pairs, dropout, seed).usage()?;
            let text = serde_json::to_string_pretty(&pl).compute()?;
            write_output(&output, &(text + "\n"))
        }
        Command::Sim(SimCommand::Run {
            traj,
            config,
            seed,
            out,
            no_memory,
        }) => {
            let run_cfg = load_config(config.as_deref())?;
            let traj = load_trajectory(&traj)?
                .with_segment_length(run_cfg.segment_length)
                .usage()?;
            let mut cfg = run_cfg.episode();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.memory = !no_memory;
            let episode = run_episode(&traj, &cfg).compute()?;
            let dir = out_path(&out);
            episode
                .save(&dir)
                .with_context(|| format!("writing {}", dir.display()))
                .compute()?;
            let active = episode.frames.iter().filter(|f| f.decision.gate).count();
            println!(
                "{} frames, {} segments, {} gated -> {}",
                episode.frames.len(),
                episode.segments.len(),
                active,
                dir.display()
            );
            Ok(())
        }
        Command::Eval(EvalCommand::Consistency {
            episode,
            tolerance,
            output,
            csv,
        }) => {
            let record = load_episode(&episode)?;
            let pairing = pair_revisits(&record.trajectory, tolerance);
            let report = evaluate(&record, &pairing, &episode.display().to_string()).compute()?;
            if let Some(p) = output {
                write_output(&p, &(report.to_json() + "\n"))?;
            }
            if let Some(p) = csv {
                write_output(&p, &report.to_csv())?;
            }
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Report(ReportCommand::Compare {
            a,
            b,
            tolerance,
            output,
        }) => {
            let ea = load_episode(&a)?;
            let eb = load_episode(&b)?;
            if ea.trajectory.len() != eb.trajectory.len() {
                return Err(Failure::Usage(anyhow!(
                    "episodes cover different trajectories ({} vs {} frames)",
                    ea.trajectory.len(),
                    eb.trajectory.len()
                )));
            }
            let pairing = pair_revisits(&ea.trajectory, tolerance);
            let ra = evaluate(&ea, &pairing, &a.display().to_string()).compute()?;
            let rb = evaluate(&eb, &pairing, &b.display().to_string()).compute()?;
            let table = compare(&ra, &rb).compute()?.to_table();
            emit(output.as_deref(), &table)
        }
        Command::Config(ConfigCommand::Defaults) => {
            println!("{}", RunConfig::default().to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("memgate: error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("memgate: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
