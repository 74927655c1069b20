//! HTTP play service: human-vs-engine sessions over frozen checkpoints.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qttt_core::engines::{argmax_legal, Checkpoint};
use qttt_core::{Board, Engine, Outcome, Player, QFunction, Sampling};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub struct ServedEngine {
    pub id: String,
    pub spec: String,
    pub rating: Option<f64>,
    engine: Engine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Human,
    Engine,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoveRecord {
    pub cell: usize,
    pub player: Player,
    pub by: Actor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InProgress,
    OWon,
    XWon,
    Draw,
}

impl From<Outcome> for Status {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Ongoing => Status::InProgress,
            Outcome::OWins => Status::OWon,
            Outcome::XWins => Status::XWon,
            Outcome::Draw => Status::Draw,
        }
    }
}

pub struct GameSession {
    id: String,
    engine_id: String,
    human_seat: Player,
    board: Board,
    moves: Vec<MoveRecord>,
    /// Action values behind the engine's latest move.
    engine_values: Option<[f64; 9]>,
    rng: ChaCha8Rng,
}

impl GameSession {
    fn status(&self) -> Status {
        self.board.outcome().into()
    }

    fn view(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "engine_id": self.engine_id,
            "human_seat": self.human_seat,
            "board": self.board.to_string()[..9],
            "to_move": self.board.to_move(),
            "status": self.status(),
            "legal_moves": if self.status() == Status::InProgress { self.board.legal_moves() } else { Vec::new() },
            "moves": self.moves,
            "engine_values": self.engine_values,
        })
    }

    fn engine_reply(&mut self, engine: &Engine) {
        if self.status() != Status::InProgress || self.board.to_move() == self.human_seat {
            return;
        }
        let values = engine.q_values(&self.board, &mut self.rng);
        let cell = argmax_legal(&values, &self.board.legal_moves()).expect("live board has legal moves");
        self.moves.push(MoveRecord { cell, player: self.board.to_move(), by: Actor::Engine });
        self.board = self.board.apply_move(cell).expect("argmax over legal cells");
        self.engine_values = Some(values);
    }
}

pub struct AppState {
    engines: BTreeMap<String, ServedEngine>,
    sessions: Mutex<HashMap<String, Arc<Mutex<GameSession>>>>,
    next_id: AtomicU64,
    seed: u64,
}

impl AppState {
    pub fn new(engines: Vec<ServedEngine>, seed: u64) -> Self {
        AppState {
            engines: engines.into_iter().map(|e| (e.id.clone(), e)).collect(),
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            seed,
        }
    }

    pub fn engine_ids(&self) -> Vec<&str> {
        self.engines.keys().map(String::as_str).collect()
    }
}

/// Loads every `*.json` checkpoint in `dir`, named by file stem. `shots` of 0
/// keeps exact expectations.
pub fn load_checkpoints(dir: &Path, shots: u32) -> Result<Vec<ServedEngine>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NoCheckpoints(dir.to_path_buf())),
        Err(e) => return Err(Error::Io(dir.to_path_buf(), e)),
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let sampling = if shots == 0 { Sampling::Exact } else { Sampling::Shots(shots) };
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(path.clone(), e))?;
        let cp: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Engine(qttt_core::EngineError::CorruptCheckpoint(format!("{}: {e}", path.display()))))?;
        let engine = Engine::from_checkpoint(&cp, None)?.with_sampling(sampling);
        out.push(ServedEngine {
            id: path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            spec: cp.spec.clone(),
            rating: cp.metadata.get("rating").and_then(Value::as_f64),
            engine,
        });
    }
    if out.is_empty() {
        return Err(Error::NoCheckpoints(dir.to_path_buf()));
    }
    Ok(out)
}

struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.1, "message": self.2 },
        });
        (self.0, Json(body)).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

fn find(state: &AppState, id: &str) -> Result<Arc<Mutex<GameSession>>, ApiError> {
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "unknown_game", format!("no game {id}")))
}

async fn list_engines(State(state): State<Arc<AppState>>) -> Json<Value> {
    let engines: Vec<Value> = state
        .engines
        .values()
        .map(|e| json!({ "id": e.id, "spec": e.spec, "rating": e.rating }))
        .collect();
    Json(json!({ "schema_version": SCHEMA_VERSION, "engines": engines }))
}

#[derive(Deserialize)]
struct CreateGame {
    engine_id: String,
    human_seat: Player,
}

async fn create_game(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateGame = parse_body(&body)?;
    let served = state
        .engines
        .get(&req.engine_id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "unknown_engine", format!("no engine {}", req.engine_id)))?;
    let n = state.next_id.fetch_add(1, Ordering::Relaxed);
    let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
    rng.set_stream(n);
    let mut session = GameSession {
        id: n.to_string(),
        engine_id: served.id.clone(),
        human_seat: req.human_seat,
        board: Board::new(),
        moves: Vec::new(),
        engine_values: None,
        rng,
    };
    session.engine_reply(&served.engine);
    let view = session.view();
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_game(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let session = find(&state, &id)?;
    let view = session.lock().expect("session poisoned").view();
    Ok(Json(view))
}

#[derive(Deserialize)]
struct PlayMove {
    cell: usize,
}

async fn play_move(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let session = find(&state, &id)?;
    let req: PlayMove = parse_body(&body)?;
    let mut s = session.lock().expect("session poisoned");
    if req.cell > 8 {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "invalid_cell", format!("cell {} is off the board", req.cell)));
    }
    if s.status() != Status::InProgress {
        return Err(ApiError(StatusCode::CONFLICT, "game_over", "the game has finished".into()));
    }
    if !s.board.is_legal(req.cell) {
        return Err(ApiError(StatusCode::CONFLICT, "occupied", format!("cell {} is taken", req.cell)));
    }
    let player = s.board.to_move();
    s.board = s.board.apply_move(req.cell).expect("checked legal");
    s.moves.push(MoveRecord { cell: req.cell, player, by: Actor::Human });
    let engine = &state.engines[&s.engine_id].engine;
    s.engine_reply(engine);
    Ok(Json(s.view()))
}

/// API routes, plus the static bundle at `/` when given.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/engines", get(list_engines))
        .route("/api/games", post(create_game))
        .route("/api/games/{id}", get(get_game))
        .route("/api/games/{id}/moves", post(play_move))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: &str, static_dir: Option<&Path>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => Error::PortInUse(addr.to_string()),
        _ => Error::Io(addr.into(), e),
    })?;
    eprintln!("serving {} engine(s) on http://{}", state.engines.len(), addr);
    axum::serve(listener, router(state, static_dir))
        .await
        .map_err(|e| Error::Io(addr.into(), e))
}
