//! HTTP endpoints for a grading session.
//!
//! - `GET /session`: manifest with image URLs
//! - `GET /image/{id}`: PNG rendering of `{id}.pgm`
//! - `POST /grade`: `{observer, pair, grade}`, 204 on success
//! - `GET /mos`: per-pair MOS and grade counts

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pcaanon_core::imaging::{load_image, GrayImage};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::mos::{Grade, GradeError, GradeStore, Manifest, PairMos};

pub struct AppState {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub store: GradeStore,
}

impl AppState {
    pub fn open(dir: impl Into<PathBuf>) -> CliResult<Self> {
        let dir = dir.into();
        let manifest = Manifest::load(&dir)?;
        let store = GradeStore::open(&dir, manifest.clone())?;
        Ok(AppState {
            dir,
            manifest,
            store,
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", get(session))
        .route("/image/{id}", get(image))
        .route("/grade", post(grade))
        .route("/mos", get(mos))
        .with_state(state)
}

pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(img.pixels()).expect("in-memory PNG data");
    }
    out
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    #[derive(Serialize)]
    struct Body {
        error: String,
    }
    (
        status,
        Json(Body {
            error: message.into(),
        }),
    )
        .into_response()
}

#[derive(Serialize)]
struct SessionPair<'a> {
    id: &'a str,
    reference: &'a str,
    test: &'a str,
    k: usize,
    reference_url: String,
    test_url: String,
}

#[derive(Serialize)]
struct SessionBody<'a> {
    session: &'a str,
    pairs: Vec<SessionPair<'a>>,
}

async fn session(State(state): State<Arc<AppState>>) -> Response {
    let m = &state.manifest;
    Json(SessionBody {
        session: &m.session,
        pairs: m
            .pairs
            .iter()
            .map(|p| SessionPair {
                id: &p.id,
                reference: &p.reference,
                test: &p.test,
                k: p.k,
                reference_url: format!("/image/{}", p.reference),
                test_url: format!("/image/{}", p.test),
            })
            .collect(),
    })
    .into_response()
}

async fn image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    if !state.manifest.has_image(&id) {
        return error(StatusCode::NOT_FOUND, format!("unknown image {id:?}"));
    }
    let path = state.dir.join(format!("{id}.pgm"));
    match tokio::task::spawn_blocking(move || load_image(&path).map(|img| encode_png(&img))).await
    {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Ok(Err(e)) => {
            log::warn!("image {id}: {e}");
            error(StatusCode::NOT_FOUND, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn grade(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let g: Grade = match serde_json::from_slice(&body) {
        Ok(g) => g,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid grade: {e}")),
    };
    let st = state.clone();
    let outcome = tokio::task::spawn_blocking(move || st.store.record(g)).await;
    match outcome {
        Ok(Ok(Ok(()))) => StatusCode::NO_CONTENT.into_response(),
        Ok(Ok(Err(e @ GradeError::UnknownPair(_)))) => error(StatusCode::NOT_FOUND, e.to_string()),
        Ok(Ok(Err(e))) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Ok(Err(e)) => {
            log::error!("cannot append to {}: {e}", state.store.path().display());
            error(StatusCode::INTERNAL_SERVER_ERROR, "grade not stored")
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Serialize)]
struct MosBody<'a> {
    session: &'a str,
    pairs: Vec<PairMos>,
}

async fn mos(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.store.snapshot();
    Json(MosBody {
        session: &state.manifest.session,
        pairs: snap.mos(),
    })
    .into_response()
}

/// Serves `dir` until Ctrl-C.
pub async fn serve(dir: &Path, addr: SocketAddr) -> CliResult<()> {
    let state = Arc::new(AppState::open(dir)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::config(format!("cannot bind {addr}: {e}")))?;
    log::info!("serving {} on http://{addr}", dir.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::data(format!("server failed: {e}")))
}
