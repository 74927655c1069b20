use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qttt_cli::config::OUT_ENV;
use qttt_cli::service::{load_checkpoints, serve, AppState};
use qttt_cli::{plots, run, Command, Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "qttt", version, about = "Train, rate and serve tic-tac-toe engines")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $QTTT_OUT/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train engines and write checkpoints and training logs.
    Train(Common),
    /// Train engines, play a round robin and write ratings.
    Tournament(Common),
    /// Noise patterns A/B/C at a fixed distance.
    QiFixed(Common),
    /// Pattern-B ratings over a range of distances.
    QiSweep(Common),
    /// Serve checkpoints over HTTP for interactive play.
    Serve(Common),
    /// Write plot-data files from a results directory.
    EmitPlots {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (command, common) = match cli.command {
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Tournament(c) => (Command::Tournament, c),
        Cmd::QiFixed(c) => (Command::QiFixed, c),
        Cmd::QiSweep(c) => (Command::QiSweep, c),
        Cmd::Serve(c) => {
            let cfg = load(&c)?;
            cfg.validate(Command::Serve)?;
            let dir = match &cfg.serve.checkpoints {
                Some(d) => d.clone(),
                None => cfg.output_dir(Command::Train, c.out.as_deref()).join("checkpoints"),
            };
            let engines = load_checkpoints(&dir, cfg.serve.shots)?;
            let state = Arc::new(AppState::new(engines, cfg.seed));
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io(dir.clone(), e))?;
            return rt.block_on(serve(state, &cfg.serve.addr, cfg.serve.static_dir.as_deref()));
        }
        Cmd::EmitPlots { config, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let dir = match out.or(cfg.output.clone()) {
                Some(d) => d,
                None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs")),
            };
            for path in plots::emit_plots(&dir)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
    };
    let cfg = load(&common)?;
    let out = cfg.output_dir(command, common.out.as_deref());
    let files = run::run(command, &cfg, &out)?;
    println!("{} artifacts in {}", files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
