//! Batch pipelines. Every artifact is derived from the config and its seeds
//! alone, so a rerun from `manifest.json` reproduces the files byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use qttt_core::arena::{round_robin, Agent, RatingTable};
use qttt_core::channel::{distance_sweep, evaluate_engine, run_pattern_experiment, write_sweep_csv, EvalConfig, Pattern};
use qttt_core::engines::EngineSpec;
use qttt_core::{build_engine, train, Engine, TrainConfig};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, ExperimentConfig};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Seed of replicate `r` of the `i`-th listed engine.
pub fn replicate_seed(base: u64, index: usize, replicate: usize) -> u64 {
    base + index as u64 + 1000 * replicate as u64
}

/// Files written under one output directory, tracked for the manifest.
struct Artifacts {
    dir: PathBuf,
    files: BTreeSet<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(dir.to_path_buf(), e))?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: BTreeSet::new() })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io(parent.to_path_buf(), e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::Io(path, e))?;
        self.files.insert(rel.to_string());
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    command: Command,
    config: &'a ExperimentConfig,
    seeds: &'a BTreeMap<String, u64>,
    versions: BTreeMap<&'static str, &'static str>,
    artifacts: Vec<&'a str>,
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    engine_id: &'a str,
    games_played: usize,
    rating: f64,
}

fn history_rows<'a>(series: &'a str, table: &'a RatingTable, entry: usize) -> impl Iterator<Item = HistoryRow<'a>> {
    table.entries[entry].history.iter().map(move |h| HistoryRow {
        engine_id: series,
        games_played: h.games_played,
        rating: h.rating,
    })
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn checkpoint(engine: &Engine, train: &TrainConfig, extra: Value) -> Vec<u8> {
    let mut meta = Map::new();
    meta.insert("episodes".into(), json!(train.episodes));
    meta.insert("train_seed".into(), json!(train.seed));
    if let Value::Object(m) = extra {
        meta.extend(m);
    }
    engine.checkpoint_save(meta).into_bytes()
}

fn train_one(spec: EngineSpec, cfg: &TrainConfig, art: &mut Artifacts, stem: &str) -> Result<Engine> {
    let mut engine = build_engine(spec)?;
    let log = train(&mut engine, cfg)?;
    let mut buf = Vec::new();
    log.write_csv(&mut buf)?;
    art.write(&format!("train/{stem}.csv"), &buf)?;
    Ok(engine)
}

/// Runs a batch command into `out`. Returns the artifact list, manifest
/// included.
pub fn run(command: Command, config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    config.validate(command)?;
    let mut art = Artifacts::new(out)?;
    let mut seeds = BTreeMap::new();
    let specs = config.specs()?;
    match command {
        Command::Train => {
            for (i, spec) in specs.iter().enumerate() {
                let cfg = config.train_config(i);
                let id = spec.key();
                seeds.insert(id.clone(), spec.seed);
                let engine = train_one(*spec, &cfg, &mut art, &id)?;
                art.write(&format!("checkpoints/{id}.json"), &checkpoint(&engine, &cfg, json!({})))?;
            }
        }
        Command::Tournament => {
            let mut engines = Vec::new();
            for (i, spec) in specs.iter().enumerate() {
                seeds.insert(spec.key(), spec.seed);
                engines.push(train_one(*spec, &config.train_config(i), &mut art, &spec.key())?);
            }
            let players: Vec<Engine> = engines.iter().map(|e| e.clone().with_sampling(config.evaluation_sampling())).collect();
            let ids: Vec<String> = engines.iter().map(Engine::id).collect();
            let entrants: Vec<(&str, &dyn Agent)> = ids.iter().zip(&players).map(|(id, e)| (id.as_str(), e as &dyn Agent)).collect();
            let arena = config.arena_config();
            seeds.insert("arena".into(), arena.seed);
            let t = round_robin(&entrants, &arena)?;
            #[derive(Serialize)]
            struct Final<'a> {
                engine_id: &'a str,
                rating: f64,
                games_played: usize,
            }
            let finals = t.table.entries.iter().map(|e| Final { engine_id: &e.id, rating: e.rating, games_played: e.games_played });
            art.write("ratings.csv", &csv_bytes(finals)?)?;
            let mut buf = Vec::new();
            t.table.write_history_csv(&mut buf)?;
            art.write("history.csv", &buf)?;
            let mut buf = Vec::new();
            t.write_log(&mut buf)?;
            art.write("games.jsonl", &buf)?;
            for (i, (engine, entry)) in engines.iter().zip(&t.table.entries).enumerate() {
                let extra = json!({ "rating": entry.rating, "games_played": entry.games_played });
                art.write(&format!("checkpoints/{}.json", entry.id), &checkpoint(engine, &config.train_config(i), extra))?;
            }
        }
        Command::QiFixed => {
            #[derive(Serialize)]
            struct Row<'a> {
                engine_id: &'a str,
                model: u8,
                pattern: Pattern,
                distance_km: f64,
                sigma: f64,
                final_rating: f64,
                seed: u64,
            }
            let mut rows = Vec::new();
            let mut history = Vec::new();
            for (i, spec) in specs.iter().enumerate() {
                for (m, &model) in config.channel.models.iter().enumerate() {
                    let seed = replicate_seed(config.seed, i, m);
                    let series = format!("{}/m{}", spec.key(), model.number());
                    seeds.insert(series.clone(), seed);
                    let spec = EngineSpec { seed, ..*spec };
                    let train_cfg = TrainConfig { seed, ..config.train };
                    let eval = EvalConfig {
                        games: config.channel.evaluation_games,
                        arena: qttt_core::ArenaConfig { seed, ..config.arena },
                        sampling: config.evaluation_sampling(),
                    };
                    // A and B share one noiseless training run.
                    let clean = train_one(spec, &train_cfg, &mut art, &format!("{}-m{}", spec.key(), model.number()))?;
                    let mut runs = Vec::new();
                    for pattern in [Pattern::A, Pattern::B] {
                        let cfg = config.channel_config(model, config.channel.distance_km, pattern);
                        let noisy = pattern.noisy_evaluation().then_some(&cfg);
                        runs.push((cfg, evaluate_engine(&clean, noisy, &eval)?));
                    }
                    let cfg = config.channel_config(model, config.channel.distance_km, Pattern::C);
                    runs.push((cfg, run_pattern_experiment(spec, &cfg, &train_cfg, &eval)?.tournament));
                    for (cfg, t) in runs {
                        let name = format!("{series}/{:?}", cfg.pattern);
                        rows.push((spec.key(), model.number(), cfg.pattern, cfg.distance_km, cfg.sigma(), t.table.entries[0].rating, seed));
                        history.push((name, t.table));
                    }
                }
            }
            let out_rows = rows.iter().map(|r| Row {
                engine_id: &r.0,
                model: r.1,
                pattern: r.2,
                distance_km: r.3,
                sigma: r.4,
                final_rating: r.5,
                seed: r.6,
            });
            art.write("qi_fixed.csv", &csv_bytes(out_rows)?)?;
            let hist = history.iter().flat_map(|(name, table)| history_rows(name, table, 0));
            art.write("history.csv", &csv_bytes(hist)?)?;
        }
        Command::QiSweep => {
            for (i, spec) in specs.iter().enumerate() {
                let mut points = Vec::new();
                for r in 0..config.channel.replicates.max(1) {
                    let seed = replicate_seed(config.seed, i, r);
                    seeds.insert(format!("{}/r{r}", spec.key()), seed);
                    let spec = EngineSpec { seed, ..*spec };
                    let train_cfg = TrainConfig { seed, ..config.train };
                    let engine = train_one(spec, &train_cfg, &mut art, &format!("{}-r{r}", spec.key()))?;
                    art.write(&format!("checkpoints/{}-r{r}.json", spec.key()), &checkpoint(&engine, &train_cfg, json!({})))?;
                    let eval = EvalConfig {
                        games: config.channel.evaluation_games,
                        arena: qttt_core::ArenaConfig { seed, ..config.arena },
                        sampling: config.evaluation_sampling(),
                    };
                    for &model in &config.channel.models {
                        let template = config.channel_config(model, 0.0, Pattern::B);
                        let sweep = distance_sweep(&engine, &template, &config.channel.distances, &eval)?;
                        points.extend(sweep);
                    }
                }
                let mut buf = Vec::new();
                write_sweep_csv(&points, &mut buf)?;
                art.write(&format!("sweep/{}.csv", spec.key()), &buf)?;
            }
        }
        Command::Serve => return Err(Error::Config("`serve` is not a batch command".into())),
    }

    let config = ExperimentConfig { command: Some(command), output: None, ..config.clone() };
    let files: Vec<&str> = art.files.iter().map(String::as_str).collect();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        command,
        config: &config,
        seeds: &seeds,
        versions: BTreeMap::from([("qttt-cli", env!("CARGO_PKG_VERSION")), ("checkpoint-format", "1")]),
        artifacts: files,
    };
    let bytes = serde_json::to_vec_pretty(&manifest)?;
    art.write(MANIFEST, &bytes)?;
    Ok(art.files.into_iter().collect())
}
