use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures_util::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

use trunk_core::config::SimContext;
use trunk_core::model::c_bend_tip;
use trunk_core::params::{ControlDto, ControlInput};
use trunk_core::rod::{MaterialParams, SolverOptions};
use trunk_core::service::{read_run, router, AppState, FrameStatus, LiveSim, StateFrame};

fn matched_context(segments: usize) -> SimContext {
    let mut ctx = SimContext::default();
    ctx.material = MaterialParams::matched_to_spring_constant(&ctx.params, 200.6);
    ctx.options = SolverOptions::default().with_segments(segments).without_gravity();
    ctx
}

fn app(ctx: SimContext, root: Option<&std::path::Path>) -> (axum::Router, Arc<LiveSim>) {
    let sim = Arc::new(LiveSim::start(ctx, root).unwrap());
    let router = router(AppState {
        sim: sim.clone(),
        storage_root: root.map(|p| p.to_path_buf()),
    });
    (router, sim)
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, serde_json::Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn c_control(ctx: &SimContext, p_mpa: f64) -> ControlDto {
    ControlInput::relaxed(&ctx.params)
        .with_pressures(p_mpa * 1e6, p_mpa * 1e6)
        .into()
}

async fn wait_done(app: &axum::Router, id: u64) -> StateFrame {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let (_, v) = call(app, "GET", "/state", None).await;
        let f: StateFrame = serde_json::from_value(v).unwrap();
        if f.request_id == id && f.status != FrameStatus::Solving {
            return f;
        }
        assert!(Instant::now() < deadline, "solve did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn c_control_reaches_closed_form_tip() {
    let ctx = matched_context(30);
    let dir = tempfile::tempdir().unwrap();
    let (app, _sim) = app(ctx, Some(dir.path()));
    let body = serde_json::to_string(&c_control(&ctx, 0.1)).unwrap();
    let (status, ack) = call(&app, "POST", "/control", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = ack["request_id"].as_u64().unwrap();
    let f = wait_done(&app, id).await;
    assert!(f.converged);
    assert_eq!(f.pattern, "C-shaped");
    let analytic = c_bend_tip(0.1e6, 200.6, &ctx.params).unwrap().as_array().map(|v| v * 1e3);
    let err = (0..3).map(|k| (f.tip_mm[k] - analytic[k]).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 0.1 * 290.0, "tip {:?} vs {:?}", f.tip_mm, analytic);

    let run = std::fs::read_dir(dir.path().join("runs")).unwrap().next().unwrap().unwrap().path();
    let log = read_run(&run).unwrap();
    assert_eq!(log.records.len(), 1);
    assert_eq!(log.records[0].request_id, id);
    assert_eq!(log.records[0].tip_mm, f.tip_mm);
    assert!(log.records[0].converged);
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_control_is_rejected_without_change() {
    let ctx = matched_context(12);
    let (app, _sim) = app(ctx, None);
    let (_, before) = call(&app, "GET", "/state", None).await;
    let mut bad = c_control(&ctx, 0.1);
    bad.p_left_mpa = -0.1;
    let (status, err) = call(&app, "POST", "/control", Some(serde_json::to_string(&bad).unwrap())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"].as_str().unwrap().contains("pressure"));
    let (status, _) = call(&app, "POST", "/control", Some("{\"theta_left_deg\": 1}".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (_, after) = call(&app, "GET", "/state", None).await;
    assert_eq!(before, after);
}

#[tokio::test(flavor = "multi_thread")]
async fn last_writer_wins() {
    let ctx = matched_context(30);
    let (app, _sim) = app(ctx, None);
    let first = serde_json::to_string(&c_control(&ctx, 0.2)).unwrap();
    let second = serde_json::to_string(&c_control(&ctx, 0.05)).unwrap();
    let (_, a) = call(&app, "POST", "/control", Some(first)).await;
    let (_, b) = call(&app, "POST", "/control", Some(second)).await;
    let (a, b) = (a["request_id"].as_u64().unwrap(), b["request_id"].as_u64().unwrap());
    assert!(b > a);
    let f = wait_done(&app, b).await;
    assert!(f.converged);
    assert!((f.control.p_left_mpa - 0.05).abs() < 1e-12);
    assert!((f.target.p_right_mpa - 0.05).abs() < 1e-12);
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (_, v) = call(&app, "GET", "/state", None).await;
    assert_eq!(v["request_id"].as_u64(), Some(b));
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_stream() {
    let ctx = matched_context(60);
    let (app, _sim) = app(ctx, None);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();

    let first: StateFrame = match ws.next().await.unwrap().unwrap() {
        Message::Text(t) => serde_json::from_str(&t).unwrap(),
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(first.status, FrameStatus::Idle);
    assert_eq!(first.request_id, 0);

    let control = serde_json::to_string(&c_control(&ctx, 0.15)).unwrap();
    ws.send(Message::Text(control.into())).await.unwrap();
    let mut id = None;
    let mut frames: Vec<(Instant, StateFrame)> = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(120);
    while Instant::now() < deadline {
        let Message::Text(t) = ws.next().await.unwrap().unwrap() else { continue };
        let v: serde_json::Value = serde_json::from_str(&t).unwrap();
        if let Some(ack) = v.get("ack") {
            id = ack["request_id"].as_u64();
            continue;
        }
        let f: StateFrame = serde_json::from_value(v).unwrap();
        let done = Some(f.request_id) == id && f.status == FrameStatus::Idle;
        frames.push((Instant::now(), f));
        if done {
            break;
        }
    }
    let last = &frames.last().unwrap().1;
    assert_eq!(last.status, FrameStatus::Idle);
    assert!(last.converged);
    let mut seq = first.seq;
    for (_, f) in &frames {
        assert!(f.seq > seq, "sequence must increase");
        seq = f.seq;
    }
    let solving: Vec<&Instant> = frames.iter().filter(|(_, f)| f.status == FrameStatus::Solving).map(|(t, _)| t).collect();
    let span = frames.last().unwrap().0 - *solving[0];
    assert!(span > Duration::from_millis(300), "solve too short to measure the rate: {span:?}");
    let rate = solving.len() as f64 / span.as_secs_f64();
    assert!(rate >= 10.0, "{rate} frames/s over {span:?}");
    for w in solving.windows(2) {
        assert!(*w[1] - *w[0] <= Duration::from_millis(250), "gap {:?}", *w[1] - *w[0]);
    }

    ws.send(Message::Text("{\"nope\": 1}".into())).await.unwrap();
    let Message::Text(t) = ws.next().await.unwrap().unwrap() else { panic!() };
    assert!(t.contains("error"));
}

#[tokio::test(flavor = "multi_thread")]
async fn scenario_endpoint_runs_the_script() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _sim) = app(SimContext::default(), Some(dir.path()));
    let (status, v) = call(&app, "POST", "/scenario/run", None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["passed"], true);
    assert_eq!(v["report"]["steps"].as_array().unwrap().len(), 6);
    assert!(v["report"]["steps"][3]["wrap_deg"].as_f64().unwrap() >= 180.0);
    assert_eq!(std::fs::read_dir(dir.path().join("scenarios")).unwrap().count(), 1);

    let (status, v) = call(&app, "POST", "/scenario/run", Some("{\"bottle\": {\"base_mm\": [0,0,0], \"axis\": [0,0,0]}}".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}
