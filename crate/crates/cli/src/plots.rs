//! Tidy plot-data files from a results directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PROGRESSION: &str = "plots/rating_progression.csv";
pub const DISTANCE: &str = "plots/rating_vs_distance.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub engine_id: String,
    pub games_played: usize,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct SweepRow {
    model: u8,
    distance_km: f64,
    sigma: f64,
    final_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub series: String,
    pub model: u8,
    pub distance_km: f64,
    pub sigma: f64,
    pub mean_rating: f64,
    pub replicates: usize,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn sweep_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let sweep = dir.join("sweep");
    if !sweep.is_dir() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&sweep).map_err(|e| Error::Io(sweep.clone(), e))? {
        let path = entry.map_err(|e| Error::Io(sweep.clone(), e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Writes `plots/rating_progression.csv` from `history.csv` (one series per
/// engine, one point per block) and `plots/rating_vs_distance.csv` from
/// `sweep/*.csv` (one series per engine and noise model, averaged over
/// replicates). Returns the files written.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let history = dir.join("history.csv");
    let sweeps = sweep_files(dir)?;
    if !history.is_file() && sweeps.is_empty() {
        return Err(Error::MissingData(dir.to_path_buf()));
    }
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::Io(plots.clone(), e))?;
    let mut written = Vec::new();

    if history.is_file() {
        let mut rows: Vec<HistoryRow> = read_csv(&history)?;
        rows.sort_by(|a, b| a.engine_id.cmp(&b.engine_id).then(a.games_played.cmp(&b.games_played)));
        let out = dir.join(PROGRESSION);
        let mut w = csv::Writer::from_path(&out)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Io(out.clone(), e))?;
        written.push(out);
    }

    if !sweeps.is_empty() {
        // (series, model, distance bits) -> (sigma, sum, count)
        let mut cells: BTreeMap<(String, u8, u64), (f64, f64, usize)> = BTreeMap::new();
        for path in &sweeps {
            let engine = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            for r in read_csv::<SweepRow>(path)? {
                let c = cells.entry((engine.clone(), r.model, r.distance_km.to_bits())).or_insert((r.sigma, 0.0, 0));
                c.1 += r.final_rating;
                c.2 += 1;
            }
        }
        let mut rows: Vec<DistanceRow> = cells
            .into_iter()
            .map(|((series, model, d), (sigma, sum, n))| DistanceRow {
                series,
                model,
                distance_km: f64::from_bits(d),
                sigma,
                mean_rating: sum / n as f64,
                replicates: n,
            })
            .collect();
        rows.sort_by(|a, b| (&a.series, a.model).cmp(&(&b.series, b.model)).then(a.distance_km.total_cmp(&b.distance_km)));
        let out = dir.join(DISTANCE);
        let mut w = csv::Writer::from_path(&out)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Io(out.clone(), e))?;
        written.push(out);
    }
    Ok(written)
}
