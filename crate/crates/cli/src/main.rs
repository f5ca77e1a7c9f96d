use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use headcam_cli::commands::{self, FixtureKind};
use headcam_cli::config::{parse_assignment, resolve, RunConfig};
use headcam_cli::plot;
use headcam_core::probe::SplitKind;
use headcam_core::ssl::Objective;
use headcam_core::{Error, Result};
use serde::Serialize;
use toml::Value;

#[derive(Parser)]
#[command(name = "headcam", version, about = "Self-supervised learning from egocentric video")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set train.lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Episodic,
    Shapes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Trunk,
    Random,
    Hog,
}

#[derive(Subcommand)]
enum Command {
    /// Decode, sample and preprocess the configured recordings into a dataset.
    Ingest {
        #[arg(long)]
        fps: Option<f64>,
        /// Temporal-class segment length in seconds.
        #[arg(long)]
        segment_length: Option<f64>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(value_enum)]
        fixture: Fixture,
    },
    /// Train a trunk with a self-supervised objective.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// temporal_classification, static_contrastive or temporal_contrastive.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long)]
        segment_length: Option<f64>,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Fit and score a linear probe on frozen features.
    Probe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        features: Option<Features>,
        /// iid, subsample or exemplar.
        #[arg(long)]
        split: Option<String>,
        /// Subsampling stride for the subsample split.
        #[arg(long)]
        factor: Option<usize>,
    },
    /// Selectivity, top-activating frames, PCA and attention maps.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        features: Option<Features>,
    },
    /// Train and probe over the configured grid of fps, segment length and augmentation.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        probe_data: PathBuf,
    },
    /// Draw figures for a run directory.
    Report {
        /// Run directory; the output directory when omitted.
        #[arg(long)]
        run: Option<PathBuf>,
    },
}

fn push<V: Into<Value>>(out: &mut Vec<(String, Value)>, key: &str, value: Option<V>) {
    if let Some(v) = value {
        out.push((key.to_owned(), v.into()));
    }
}

fn features_name(f: Features) -> &'static str {
    match f {
        Features::Trunk => "trunk",
        Features::Random => "random",
        Features::Hog => "hog",
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>> {
    let c = &cli.common;
    let mut out = c.set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    push(&mut out, "output_dir", c.output_dir.as_ref().map(|p| p.display().to_string()));
    push(&mut out, "seed", c.seed.map(|s| s as i64));
    push(&mut out, "workers", c.workers.map(|w| w as i64));
    match &cli.command {
        Command::Ingest { fps, segment_length } => {
            push(&mut out, "data.fps", *fps);
            push(&mut out, "train.segment_length_s", *segment_length);
        }
        Command::Train { objective, lr, epochs, fps, segment_length, .. } => {
            let objective = objective.as_deref().map(str::parse::<Objective>).transpose()?;
            push(&mut out, "train.objective", objective.map(|o| o.name()));
            push(&mut out, "train.lr", *lr);
            push(&mut out, "train.epochs", epochs.map(|e| e as i64));
            push(&mut out, "train.fps", *fps);
            push(&mut out, "train.segment_length_s", *segment_length);
        }
        Command::Probe { features, split, factor, .. } => {
            push(&mut out, "probe.features", features.map(features_name));
            let split = split.as_deref().map(str::parse::<SplitKind>).transpose()?;
            push(&mut out, "probe.split.kind", split.map(SplitKind::name));
            push(&mut out, "probe.split.subsample_factor", factor.map(|f| f as i64));
        }
        Command::Analyze { features, .. } => push(&mut out, "probe.features", features.map(features_name)),
        Command::Synth { .. } | Command::Sweep { .. } | Command::Report { .. } => {}
    }
    Ok(out)
}

fn print<S: Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg: RunConfig = resolve(cli.common.config.as_deref(), &overrides(&cli)?)?;
    commands::init_workers(cfg.workers);
    match &cli.command {
        Command::Ingest { .. } => print(&commands::ingest(&cfg)?),
        Command::Synth { fixture } => {
            let kind = match fixture {
                Fixture::Episodic => FixtureKind::Episodic,
                Fixture::Shapes => FixtureKind::Shapes,
            };
            print(&commands::synth(&cfg, kind)?)
        }
        Command::Train { data, resume, .. } => print(&commands::train_cmd(&cfg, data, resume.as_deref())?),
        Command::Probe { data, model, .. } => print(&commands::probe_cmd(&cfg, data, model.as_deref())?),
        Command::Analyze { data, model, .. } => print(&commands::analyze_cmd(&cfg, data, model.as_deref())?),
        Command::Sweep { data, probe_data } => print(&commands::sweep_cmd(&cfg, data, probe_data)?),
        Command::Report { run } => {
            let dir = match run {
                Some(d) => d.clone(),
                None => cfg.output_dir()?.to_path_buf(),
            };
            if !dir.is_dir() {
                return Err(Error::Config(format!("run directory {} does not exist", dir.display())));
            }
            for p in plot::report(&dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("headcam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
