//! HTTP mode: `POST /locate` with a JSON body
//! `{"image_ppm_b64": "...", "scan": [{"ap": "...", "rss": -60.0}], "seed": 7}`.
//!
//! The response body is the same document `locate` prints. Degraded
//! results are still 200; only unreadable requests get a 400.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use base64::Engine;
use hallway_loc::fuse::{locate, FloorPlan};
use hallway_loc::imgcore::{decode_ppm, RgbImage};
use hallway_loc::wlan::{FingerprintDb, RssScan};
use serde::Deserialize;

use crate::commands::ServeArgs;
use crate::config::Config;
use crate::error::CliError;
use crate::io::{pick, read_db, read_plan};

/// Immutable state shared by every request.
#[derive(Debug)]
pub struct Service {
    pub config: Config,
    pub plan: FloorPlan,
    pub db: FingerprintDb,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Reading {
    ap: String,
    rss: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocateRequest {
    image_ppm_b64: String,
    scan: Vec<Reading>,
    seed: Option<u64>,
}

/// A request that passed validation.
#[derive(Debug)]
pub struct Parsed {
    pub image: RgbImage,
    pub scan: RssScan,
    pub seed: Option<u64>,
}

pub fn parse_request(body: &[u8]) -> Result<Parsed, String> {
    if body.is_empty() {
        return Err("empty request body".into());
    }
    let req: LocateRequest = serde_json::from_slice(body).map_err(|e| format!("invalid request: {e}"))?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(req.image_ppm_b64.trim())
        .map_err(|e| format!("image_ppm_b64: {e}"))?;
    let image = decode_ppm(&bytes).map_err(|e| format!("image_ppm_b64: {e}"))?;
    let scan = RssScan::from_pairs(req.scan.into_iter().map(|r| (r.ap, r.rss))).map_err(|e| format!("scan: {e}"))?;
    Ok(Parsed {
        image,
        scan,
        seed: req.seed,
    })
}

fn bad_request(reason: String) -> Response {
    let body = serde_json::json!({ "error": reason }).to_string();
    (StatusCode::BAD_REQUEST, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn handle_locate(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req = match parse_request(&body) {
        Ok(r) => r,
        Err(reason) => return bad_request(reason),
    };
    let cfg = match svc.config.pipeline(req.seed) {
        Ok(c) => c,
        Err(e) => return bad_request(e.to_string()),
    };
    let svc2 = svc.clone();
    let run = tokio::task::spawn_blocking(move || locate(&req.image, &req.scan, &svc2.db, &svc2.plan, &cfg).to_json());
    match run.await {
        Ok(doc) => (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], doc).into_response(),
        Err(e) => {
            tracing::error!("pipeline task failed: {e}");
            (StatusCode::INTERNAL_SERVER_ERROR, "pipeline task failed").into_response()
        }
    }
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new().route("/locate", post(handle_locate)).with_state(svc)
}

pub fn serve_blocking(cfg: &Config, a: ServeArgs) -> Result<u8, CliError> {
    let plan = read_plan(&pick(a.plan.as_ref(), cfg.paths.plan.as_ref(), "plan")?)?;
    let db = read_db(&pick(a.fingerprints.as_ref(), cfg.paths.fingerprints.as_ref(), "fingerprints")?)?;
    let svc = Arc::new(Service {
        config: cfg.clone(),
        plan,
        db,
    });
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        tracing::info!("listening on {addr}");
        eprintln!("listening on {addr}");
        axum::serve(listener, router(svc))
            .await
            .map_err(|e| CliError::Usage(format!("server stopped: {e}")))
    })?;
    Ok(0)
}
