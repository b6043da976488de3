mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use common::session_in;
use http_body_util::BodyExt;
use maser_bench::service::{router, AppState, BenchEvent, StateView};
use maser_bench::ShotRecord;
use serde_json::{json, Value};
use std::time::Duration;
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> (Router, AppState) {
    let state = AppState::new(session_in(dir, 17));
    (router(state.clone()), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b, _) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

#[tokio::test]
async fn state_tune_and_s11() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (s, v) = call_json(&app, "GET", "/state", None).await;
    assert_eq!(s, StatusCode::OK);
    let st: StateView = serde_json::from_value(v).unwrap();
    assert_eq!(st.detuning_hz, 0.0);
    assert!(!st.busy && st.shot_count == 0);

    let (s, v) = call_json(&app, "POST", "/tune", Some(json!({ "step_hz": 5e5 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["state"]["detuning_hz"].as_f64().unwrap() - 5e5).abs() < 1.0);
    let q = v["s11"]["q"]["q_loaded"].as_f64().unwrap();
    assert!((q - 2042.0).abs() < 2.0, "{q}");

    let (s, v) = call_json(&app, "GET", "/s11?span_hz=4e6&points=201", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["freq_hz"].as_array().unwrap().len(), 201);

    let (s, v) = call_json(&app, "POST", "/tune", Some(json!({ "f_target_hz": 2.0e9 }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("tuning range"));
    let (s, _) = call_json(&app, "POST", "/tune", Some(json!({ "height_mm": 9.0, "step_hz": 1.0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, "POST", "/tune", Some(json!({ "height_cm": 1.0 }))).await;
    assert!(s.is_client_error());
    let (s, v) = call_json(&app, "GET", "/state", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["detuning_hz"].as_f64().unwrap() - 5e5).abs() < 1.0);
}

#[tokio::test]
async fn fire_and_fetch_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/fire", Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    let rec: ShotRecord = serde_json::from_value(v).unwrap();
    assert!(rec.mased);

    let (_, v) = call_json(&app, "GET", "/shots", None).await;
    let shots: Vec<ShotRecord> = serde_json::from_value(v).unwrap();
    assert_eq!(shots, vec![rec.clone()]);

    let (s, v) = call_json(&app, "GET", &format!("/shots/{}/metrics", rec.id), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_value::<maser_core::pulse::PulseMetrics>(v).ok(), rec.metrics);

    let (s, v) = call_json(&app, "GET", "/shots/1/trace?t_start_s=2e-6&t_stop_s=5e-6&max_points=1000", None).await;
    assert_eq!(s, StatusCode::OK);
    let t = v["t_s"].as_array().unwrap();
    assert!(t.len() <= 1000 && t.len() > 500);
    assert!(t[0].as_f64().unwrap() >= 2e-6 && t[t.len() - 1].as_f64().unwrap() <= 5e-6);

    let (s, body, ctype) = call(&app, "GET", "/shots/1/trace?format=csv", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype, "text/csv");
    assert!(body.starts_with(b"t_s,v_volts\n"));

    let (s, v) = call_json(&app, "GET", "/shots/1/envelope?max_points=500", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["p_out_w"].as_array().unwrap().len() <= 500);

    let (s, v) = call_json(&app, "GET", "/shots/1/spectrum", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(!v["peaks"].as_array().unwrap().is_empty());
    assert_eq!(v["freq_hz"].as_array().unwrap().len(), v["psd_norm"].as_array().unwrap().len());

    assert_eq!(call(&app, "GET", "/shots/9/metrics", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/shots/1/bogus", None).await.0, StatusCode::NOT_FOUND);

    let (s, v) = call_json(&app, "POST", "/fire", Some(json!({ "energy_mj": 5.0 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["mased"], false);
    assert_eq!(v["id"], 2);
    let (s, _) = call_json(&app, "POST", "/fire", Some(json!({ "energy_mj": -1.0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    // A body is optional.
    assert_eq!(call(&app, "POST", "/fire", None).await.0, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_commit_in_order_and_reads_stay_live() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let fires: Vec<_> = (0..3)
        .map(|_| {
            let a = app.clone();
            tokio::spawn(async move { call_json(&a, "POST", "/fire", None).await })
        })
        .collect();
    // Reads answer while shots are being simulated.
    for _ in 0..5 {
        let (s, _) = tokio::time::timeout(Duration::from_millis(500), call_json(&app, "GET", "/state", None))
            .await
            .expect("state read blocked");
        assert_eq!(s, StatusCode::OK);
    }
    let mut ids = Vec::new();
    for f in fires {
        let (s, v) = f.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        ids.push(v["id"].as_u64().unwrap());
    }
    ids.sort_unstable();
    assert_eq!(ids, vec![1, 2, 3]);
    let st = state.state();
    assert_eq!((st.shot_count, st.last_shot_id, st.busy), (3, Some(3), false));
}

#[tokio::test]
async fn events_stream_pushes_shots_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let resp = app
        .clone()
        .oneshot(Request::get("/events").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[header::CONTENT_TYPE], "text/event-stream");
    let mut body = resp.into_body();

    call_json(&app, "POST", "/tune", Some(json!({ "step_hz": -2.5e5 }))).await;
    call_json(&app, "POST", "/fire", None).await;

    let mut text = String::new();
    while !(text.contains("event: s11-updated") && text.contains("event: shot-completed")) {
        let frame = tokio::time::timeout(Duration::from_secs(10), body.frame())
            .await
            .expect("no event")
            .unwrap()
            .unwrap();
        if let Ok(data) = frame.into_data() {
            text.push_str(std::str::from_utf8(&data).unwrap());
        }
    }
    let shot_line = text
        .lines()
        .skip_while(|l| *l != "event: shot-completed")
        .find(|l| l.starts_with("data: "))
        .unwrap();
    let ev: BenchEvent = serde_json::from_str(&shot_line["data: ".len()..]).unwrap();
    match ev {
        BenchEvent::ShotCompleted(r) => assert_eq!(r.id, 1),
        other => panic!("{other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn autofire_runs_at_the_requested_rate_until_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let (s, _) = call_json(&app, "POST", "/autofire", Some(json!({ "enabled": true, "rate_hz": 20.0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, "POST", "/autofire", Some(json!({ "enabled": true }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut rx = state.subscribe();
    let (s, v) = call_json(&app, "POST", "/autofire", Some(json!({ "enabled": true, "rate_hz": 10.0 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["enabled"], true);
    assert_eq!(state.state().autofire.rate_hz, Some(10.0));
    let mut seen = 0;
    while seen < 2 {
        if let BenchEvent::ShotCompleted(_) = tokio::time::timeout(Duration::from_secs(20), rx.recv()).await.unwrap().unwrap() {
            seen += 1;
        }
    }
    let (s, v) = call_json(&app, "POST", "/autofire", Some(json!({ "enabled": false }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["enabled"], false);
    // Let an in-flight shot finish, then the count must stay put.
    tokio::time::sleep(Duration::from_millis(1500)).await;
    let n = state.state().shot_count;
    tokio::time::sleep(Duration::from_millis(400)).await;
    assert_eq!(state.state().shot_count, n);
    assert!(n >= 2);
}

#[tokio::test]
async fn pump_energy_is_settable() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/pump", Some(json!({ "energy_mj": 12.5 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["pump_energy_mj"], 12.5);
    let (_, v) = call_json(&app, "POST", "/fire", None).await;
    assert_eq!(v["pump_energy_j"], 0.0125);
}
