use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::live::{LiveSim, StateFrame};
use super::{ResolvedService, ServiceError};
use crate::params::{ControlDto, ControlInput};
use crate::scenario::{grab_pour_script_for, run_scenario, BottleFile, BottleSpec, ScenarioReport};
use crate::units::{mm_to_m, vec_to_m};

#[derive(Clone)]
pub struct AppState {
    pub sim: Arc<LiveSim>,
    /// Scenario reports are written here when set.
    pub storage_root: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ControlAck {
    pub request_id: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioRequest {
    bottle: Option<BottleFile>,
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn get_state(State(app): State<AppState>) -> Json<StateFrame> {
    Json(app.sim.snapshot())
}

async fn post_control(State(app): State<AppState>, body: Result<Json<ControlDto>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(dto) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()),
    };
    match app.sim.apply_control(ControlInput::from(dto)) {
        Ok(request_id) => (StatusCode::ACCEPTED, Json(ControlAck { request_id })).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

async fn post_scenario(State(app): State<AppState>, body: axum::body::Bytes) -> Response {
    let req: ScenarioRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ScenarioRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
        }
    };
    let ctx = *app.sim.context();
    let bottle = match req.bottle {
        Some(b) => match BottleSpec::new(vec_to_m(b.base_mm), b.axis, mm_to_m(b.height_mm), mm_to_m(b.diameter_mm)) {
            Ok(b) => b,
            Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
        },
        None => BottleSpec::calibrated(),
    };
    let job = tokio::task::spawn_blocking(move || {
        run_scenario(&grab_pour_script_for(&ctx.params), &bottle, &ctx)
    });
    let report: ScenarioReport = match job.await {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
    };
    if let Some(root) = &app.storage_root {
        save_report(root, &report);
    }
    let passed = report.passed();
    Json(json!({ "passed": passed, "report": report })).into_response()
}

fn save_report(root: &std::path::Path, report: &ScenarioReport) {
    let dir = root.join("scenarios");
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let path = dir.join(format!("{stamp}-{}.json", std::process::id()));
    let result = std::fs::create_dir_all(&dir).and_then(|_| {
        let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
        std::fs::write(&path, text)
    });
    if let Err(e) = result {
        log::warn!("cannot save scenario report {}: {e}", path.display());
    }
}

async fn ws_upgrade(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_state(socket, app))
}

/// Send the current frame, then every new one. Text messages from the
/// client are treated as control submissions and answered in place.
async fn stream_state(mut socket: WebSocket, app: AppState) {
    let mut rx = app.sim.subscribe();
    let mut last_seq = None;
    loop {
        let frame = rx.borrow_and_update().clone();
        if last_seq.is_none_or(|s| frame.seq > s) {
            last_seq = Some(frame.seq);
            let text = serde_json::to_string(&frame).expect("frame serializes");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        tokio::select! {
            changed = rx.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(t))) => {
                    let reply = match serde_json::from_str::<ControlDto>(&t) {
                        Ok(dto) => match app.sim.apply_control(dto.into()) {
                            Ok(id) => json!({ "ack": { "request_id": id } }),
                            Err(e) => json!({ "error": e.to_string() }),
                        },
                        Err(e) => json!({ "error": e.to_string() }),
                    };
                    if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/control", post(post_control))
        .route("/scenario/run", post(post_scenario))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}

/// Start the live simulation and serve until the process is stopped.
pub async fn serve(config: ResolvedService) -> Result<(), ServiceError> {
    let root = config.storage_root.clone();
    let ctx = config.context;
    let sim = tokio::task::spawn_blocking(move || LiveSim::start(ctx, Some(&root)))
        .await
        .map_err(|e| ServiceError::io("solver startup", std::io::Error::other(e)))??;
    let app = router(AppState {
        sim: Arc::new(sim),
        storage_root: Some(config.storage_root),
    });
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| ServiceError::io(format!("cannot bind {}", config.listen), e))?;
    log::info!("listening on {}", config.listen);
    axum::serve(listener, app)
        .await
        .map_err(|e| ServiceError::io("server", e))
}
