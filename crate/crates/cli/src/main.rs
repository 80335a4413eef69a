//! `patchlearn` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchlearn::experiment::run::{run_stages, Layout, STAGES};
use patchlearn::experiment::{ExperimentConfig, Problem, SimulationMode};
use patchlearn::learner::Architecture;
use patchlearn::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "patchlearn", version, about = "Learn macroscopic PDE right-hand sides from patch-dynamics data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effective coefficients from the cell problems.
    Oracle(Opts),
    /// Simulate training and test trajectories.
    Generate(Opts),
    /// Train the right-hand-side models.
    Train(Opts),
    /// Score right-hand-side predictions on the test set.
    Evaluate(Opts),
    /// Integrate learned models and compare with the homogenized solution.
    Rollout(Opts),
    /// Collect stage summaries into report.json.
    Report(Opts),
    /// Every stage in order.
    Run(Opts),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    #[value(name = "1d")]
    Line,
    #[value(name = "2d")]
    Lattice,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArchArg {
    Mlp,
    Stencil,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    GapTooth,
    PatchDynamics,
}

#[derive(Args, Debug)]
struct Opts {
    /// TOML configuration; overrides the built-in presets.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem when no config file is given.
    #[arg(long, value_enum, default_value = "1d")]
    problem: ProblemArg,
    /// Reduced preset for quick checks.
    #[arg(long)]
    smoke: bool,
    /// Full-resolution 1D preset (slow).
    #[arg(long)]
    paper_scale: bool,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "artifacts")]
    out: PathBuf,
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    /// 1D data generator.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.problem) {
            (Some(path), _) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
            (None, ProblemArg::Line) if self.paper_scale => ExperimentConfig::full_scale_1d(),
            (None, ProblemArg::Line) if self.smoke => ExperimentConfig::smoke_1d(),
            (None, ProblemArg::Line) => ExperimentConfig::default_1d(),
            (None, ProblemArg::Lattice) if self.paper_scale => {
                return Err(Error::Config("--paper-scale applies to the 1D problem".into()))
            }
            (None, ProblemArg::Lattice) if self.smoke => ExperimentConfig::smoke_2d(),
            (None, ProblemArg::Lattice) => ExperimentConfig::default_2d(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(arch) = self.arch {
            cfg.architectures = match arch {
                ArchArg::Mlp => vec![Architecture::Mlp],
                ArchArg::Stencil => vec![Architecture::Stencil],
                ArchArg::Both => vec![Architecture::Mlp, Architecture::Stencil],
            };
        }
        if let Some(mode) = self.mode {
            match &mut cfg.problem {
                Problem::Hetero1d(p) => {
                    p.mode = match mode {
                        ModeArg::GapTooth => SimulationMode::GapTooth,
                        ModeArg::PatchDynamics => SimulationMode::PatchDynamics,
                    }
                }
                Problem::Lattice2d(_) => {
                    if matches!(mode, ModeArg::PatchDynamics) {
                        return Err(Error::Config("the 2D problem only supports --mode gap-tooth".into()));
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (opts, stages): (Opts, Vec<&str>) = match cli.command {
        Command::Oracle(o) => (o, vec!["oracle"]),
        Command::Generate(o) => (o, vec!["generate"]),
        Command::Train(o) => (o, vec!["train"]),
        Command::Evaluate(o) => (o, vec!["evaluate"]),
        Command::Rollout(o) => (o, vec!["rollout"]),
        Command::Report(o) => (o, vec!["report"]),
        Command::Run(o) => (o, STAGES.to_vec()),
    };
    let cfg = opts.config()?;
    let layout = Layout::new(&opts.out);
    let manifest = run_stages(&cfg, &layout, &stages)?;
    for s in &manifest.stages {
        eprintln!("{}: {:?}", s.stage, s.status);
    }
    println!("{}", layout.root.join(patchlearn::experiment::manifest::MANIFEST_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
