use std::fmt;
use std::path::{Path, PathBuf};

use qttt_core::arena::ArenaConfig;
use qttt_core::channel::{ChannelConfig, NoiseModel, Pattern, DEFAULT_ATTENUATION_DB_PER_KM};
use qttt_core::engines::EngineSpec;
use qttt_core::qsim::Sampling;
use qttt_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "QTTT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Train,
    Tournament,
    QiFixed,
    QiSweep,
    Serve,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Train => "train",
            Command::Tournament => "tournament",
            Command::QiFixed => "qi-fixed",
            Command::QiSweep => "qi-sweep",
            Command::Serve => "serve",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelBlock {
    pub models: Vec<NoiseModel>,
    pub distance_km: f64,
    pub attenuation_db_per_km: f64,
    /// Distances for `qi-sweep`.
    pub distances: Vec<f64>,
    /// Games per rated evaluation against the random mover.
    pub evaluation_games: usize,
    /// Independently trained copies per engine in `qi-sweep`.
    pub replicates: usize,
}

impl Default for ChannelBlock {
    fn default() -> Self {
        ChannelBlock {
            models: vec![NoiseModel::One, NoiseModel::Two],
            distance_km: 100.0,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            distances: vec![0.01, 0.1, 1.0, 10.0],
            evaluation_games: 10_000,
            replicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeBlock {
    pub addr: String,
    /// Directory of checkpoint files; defaults to `<out>/checkpoints`.
    pub checkpoints: Option<PathBuf>,
    /// Static UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Shots per engine evaluation; 0 selects exact expectations.
    pub shots: u32,
}

impl Default for ServeBlock {
    fn default() -> Self {
        ServeBlock {
            addr: "127.0.0.1:8080".into(),
            checkpoints: None,
            static_dir: None,
            shots: 1024,
        }
    }
}

/// One run, as read from a JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub engines: Vec<String>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Shots per circuit evaluation during rated play; 0 selects exact
    /// expectations. Training always uses exact expectations.
    pub evaluation_shots: u32,
    pub train: TrainConfig,
    pub arena: ArenaConfig,
    pub channel: ChannelBlock,
    pub serve: ServeBlock,
}

impl ExperimentConfig {
    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let value = match value.get("manifest_version") {
            Some(_) => value.get("config").cloned().ok_or_else(|| Error::Config("manifest without config".into()))?,
            None => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Engine specs with seeds `seed + index`.
    pub fn specs(&self) -> Result<Vec<EngineSpec>, Error> {
        self.engines
            .iter()
            .enumerate()
            .map(|(i, key)| EngineSpec::parse(key, self.seed + i as u64).map_err(|e| Error::Config(format!("{key}: {e}"))))
            .collect()
    }

    pub fn train_config(&self, index: usize) -> TrainConfig {
        TrainConfig { seed: self.seed + index as u64, ..self.train }
    }

    pub fn evaluation_sampling(&self) -> Sampling {
        match self.evaluation_shots {
            0 => Sampling::Exact,
            n => Sampling::Shots(n),
        }
    }

    pub fn arena_config(&self) -> ArenaConfig {
        ArenaConfig { seed: self.seed, ..self.arena }
    }

    pub fn channel_config(&self, model: NoiseModel, distance_km: f64, pattern: Pattern) -> ChannelConfig {
        ChannelConfig {
            attenuation_db_per_km: self.channel.attenuation_db_per_km,
            ..ChannelConfig::new(model, distance_km, pattern)
        }
    }

    pub fn validate(&self, command: Command) -> Result<(), Error> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::Config(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let specs = self.specs()?;
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        match command {
            Command::Train => need(!specs.is_empty(), "no engines listed")?,
            Command::Tournament => need(specs.len() >= 2, "a tournament needs at least two engines")?,
            Command::QiFixed | Command::QiSweep => {
                need(!specs.is_empty(), "no engines listed")?;
                need(!self.channel.models.is_empty(), "no noise models listed")?;
                need(
                    specs.iter().all(|s| !matches!(s.family, qttt_core::engines::Family::Classical(_))),
                    "noise experiments need engines with a quantum layer",
                )?;
                if command == Command::QiSweep {
                    need(!self.channel.distances.is_empty(), "no sweep distances")?;
                }
                for &d in self.channel.distances.iter().chain([&self.channel.distance_km]) {
                    self.channel_config(NoiseModel::One, d, Pattern::B)
                        .validate()
                        .map_err(|e| Error::Config(e.to_string()))?;
                }
            }
            Command::Serve => {}
        }
        if command != Command::Serve {
            self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
            need(self.arena.games_per_block > 0, "games_per_block must be positive")?;
        }
        Ok(())
    }

    /// `--out`, then the config's `output`, then `$QTTT_OUT/<command>`, then
    /// `runs/<command>`.
    pub fn output_dir(&self, command: Command, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag.or(self.output.as_deref()) {
            return p.to_path_buf();
        }
        let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        root.join(command.to_string())
    }
}
