use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fovnoise::scenes;
use fovnoise_calib::api::{PREVIEW_KEY_HEADER, PREVIEW_STATE_HEADER};
use fovnoise_calib::{router, AppState, Corpus, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    app_with(640, 360, 320)
}

fn app_with(w: usize, h: usize, preview_width: usize) -> Router {
    let corpus = Corpus::from_frames([
        ("forest".to_owned(), scenes::natural_scene(w, h, 1)),
        ("city".to_owned(), scenes::natural_scene(w, h, 2)),
    ]);
    let config = ServiceConfig {
        preview_width,
        ..ServiceConfig::default()
    };
    router(Arc::new(AppState::new(corpus, config)))
}

/// 720 px across 39 deg: fine enough that the display passes part of the
/// aliasing band, so noise parameters show up in the preview.
fn fine_setup() -> Value {
    json!({ "resolution": [720, 360], "size_m": [0.5, 0.25], "distance_m": 0.715, "gaze": [0.0, 0.0] })
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }

    fn header(&self, name: &str) -> &str {
        self.headers[name].to_str().unwrap()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn create(app: &Router, stimulus: &str, mode: &str, blur_rate: f64) -> Value {
    create_with(app, json!({ "stimulus": stimulus, "mode": mode, "blur_rate": blur_rate })).await
}

async fn create_with(app: &Router, body: Value) -> Value {
    let r = call(app, "POST", "/v1/sessions", Some(body)).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.json()
}

async fn set(app: &Router, id: &str, body: Value) -> Reply {
    call(app, "POST", &format!("/v1/sessions/{id}/param"), Some(body)).await
}

#[tokio::test]
async fn sessions_start_from_calibrated_defaults() {
    let app = app();
    let s = create(&app, "forest", "f_e", 0.34).await;
    assert_eq!(s["value"], 0.23);
    assert_eq!(s["mode"], "f_e");
    let s = create(&app, "forest", "s_k", 0.11).await;
    assert_eq!(s["value"], 22.4);
    assert_eq!(s["history_len"], 0);
    assert!(s["preview_url"].as_str().unwrap().ends_with("/preview.png"));
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    let r = call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "stimulus": "nope", "mode": "f_e", "blur_rate": 0.34 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["kind"], "not_found");
    assert_eq!(set(&app, "s999", json!({ "delta": 1 })).await.status, StatusCode::NOT_FOUND);
    let r = call(&app, "GET", "/v1/sessions/s999/preview.png", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let app = app();
    let r = call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "stimulus": "forest", "mode": "gain", "blur_rate": 0.34 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["kind"], "bad_request");
    let r = call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "stimulus": "forest", "mode": "s_k", "blur_rate": 3.0 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let s = create(&app, "forest", "s_k", 0.57).await;
    let r = set(&app, s["id"].as_str().unwrap(), json!({ "step": 1 })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn param_updates_clamp_and_append_history() {
    let app = app();
    let s = create(&app, "city", "f_e", 0.34).await;
    let id = s["id"].as_str().unwrap();

    let r = set(&app, id, json!({ "delta": 0.0 })).await;
    assert_eq!(r.status, StatusCode::OK);
    let mut unchanged = r.json();
    assert_eq!(unchanged["history_len"], 1);
    unchanged["history_len"] = s["history_len"].clone();
    assert_eq!(unchanged, s);

    assert_eq!(set(&app, id, json!({ "value": 0.9 })).await.json()["value"], 0.4);
    assert_eq!(set(&app, id, json!({ "delta": -5 })).await.json()["value"], 0.0);
    let v = set(&app, id, json!({ "value": 0.1 })).await.json();
    assert_eq!(v["value"], 0.1);
    assert_eq!(v["config"]["f_e"], 0.1);

    let full = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await.json();
    let history: Vec<f64> = full["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["value"].as_f64().unwrap())
        .collect();
    assert_eq!(history, [0.23, 0.4, 0.0, 0.1]);
    assert!(full["history"][0]["t_ms"].as_u64().unwrap() > 0);
    assert_eq!(full["history"][0]["parameter"], "f_e");
}

#[tokio::test]
async fn accept_freezes_the_session() {
    let app = app();
    let s = create(&app, "forest", "s_f", 0.57).await;
    let id = s["id"].as_str().unwrap();
    set(&app, id, json!({ "value": 3.0 })).await;
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/accept"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["value"], 3.0);
    let again = call(&app, "POST", &format!("/v1/sessions/{id}/accept"), None).await;
    assert_eq!(again.status, StatusCode::CONFLICT);
    assert_eq!(again.json()["kind"], "closed");
    let r = set(&app, id, json!({ "delta": 0.1 })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn export_aggregates_accepted_values() {
    let app = app();
    let r = call(&app, "GET", "/v1/export", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), json!([]));

    for v in [0.2, 0.2, 0.26] {
        let s = create(&app, "forest", "f_e", 0.34).await;
        let id = s["id"].as_str().unwrap();
        set(&app, id, json!({ "value": v })).await;
        call(&app, "POST", &format!("/v1/sessions/{id}/accept"), None).await;
    }
    // Open sessions are not exported.
    create(&app, "forest", "f_e", 0.34).await;

    let cells = call(&app, "GET", "/v1/export", None).await.json();
    let cells = cells.as_array().unwrap();
    assert_eq!(cells.len(), 1);
    let c = &cells[0];
    assert_eq!((c["stimulus"].as_str(), c["mode"].as_str(), c["n"].as_u64()), (Some("forest"), Some("f_e"), Some(3)));
    assert_eq!(c["blur_rate"], 0.34);
    assert!((c["mean"].as_f64().unwrap() - 0.22).abs() < 1e-12);
    assert!((c["sem"].as_f64().unwrap() - 0.02).abs() < 1e-12);
}

#[tokio::test]
async fn previews_are_side_by_side_and_deterministic() {
    let app = app_with(720, 360, 720);
    let body = json!({ "stimulus": "forest", "mode": "s_k", "blur_rate": 0.57, "setup": fine_setup() });
    let s = create_with(&app, body.clone()).await;
    let id = s["id"].as_str().unwrap();
    let uri = format!("/v1/sessions/{id}/preview.png?wait=true");

    let first = call(&app, "GET", &uri, None).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.header("content-type"), "image/png");
    assert_eq!(first.header(PREVIEW_STATE_HEADER), "ready");
    assert_eq!(first.header(PREVIEW_KEY_HEADER), s["preview_key"].as_str().unwrap());
    let img = image::load_from_memory(&first.body).unwrap().to_rgb8();
    assert_eq!((img.width(), img.height()), (720, 360));
    let reference = fovnoise::io::frame_to_rgb8(&scenes::natural_scene(720, 360, 1));
    for (x, y) in [(0, 0), (100, 200), (359, 359)] {
        assert_eq!(img.get_pixel(x, y), reference.get_pixel(x, y));
    }

    set(&app, id, json!({ "value": 40.0 })).await;
    let changed = call(&app, "GET", &uri, None).await;
    assert_ne!(changed.body, first.body);

    // Returning to the same value reproduces the same bytes.
    let d = set(&app, id, json!({ "value": 18.68 })).await.json();
    assert_eq!(d["preview_key"], s["preview_key"]);
    let again = call(&app, "GET", &uri, None).await;
    assert_eq!(again.body, first.body);

    // A second session with the same inputs renders identically.
    let twin = create_with(&app, body).await;
    let tid = twin["id"].as_str().unwrap();
    let r = call(&app, "GET", &format!("/v1/sessions/{tid}/preview.png?wait=true"), None).await;
    assert_eq!(r.body, first.body);
}

#[tokio::test]
async fn previews_are_downscaled_unless_full() {
    let app = app();
    let s = create(&app, "forest", "f_e", 0.34).await;
    let id = s["id"].as_str().unwrap();
    let r = call(&app, "GET", &format!("/v1/sessions/{id}/preview.png?wait=true"), None).await;
    let img = image::load_from_memory(&r.body).unwrap();
    assert_eq!((img.width(), img.height()), (320, 180));
    let full = call(&app, "GET", &format!("/v1/sessions/{id}/preview.png?full=true"), None).await;
    assert_eq!(full.header(PREVIEW_STATE_HEADER), "ready");
    let img = image::load_from_memory(&full.body).unwrap();
    assert_eq!((img.width(), img.height()), (640, 360));
}

#[tokio::test]
async fn stale_preview_is_flagged_while_rendering() {
    let app = app_with(720, 360, 720);
    let s = create_with(&app, json!({ "stimulus": "city", "mode": "s_k", "blur_rate": 0.57, "setup": fine_setup() })).await;
    let id = s["id"].as_str().unwrap();
    let uri = format!("/v1/sessions/{id}/preview.png");
    let first = call(&app, "GET", &format!("{uri}?wait=true"), None).await;
    let old_key = first.header(PREVIEW_KEY_HEADER).to_owned();

    let d = set(&app, id, json!({ "value": 10.0 })).await.json();
    let r = call(&app, "GET", &uri, None).await;
    assert_eq!(r.status, StatusCode::OK);
    match r.header(PREVIEW_STATE_HEADER) {
        "rendering" => {
            assert_eq!(r.header(PREVIEW_KEY_HEADER), old_key);
            assert_eq!(r.body, first.body);
        }
        "ready" => assert_eq!(r.header(PREVIEW_KEY_HEADER), d["preview_key"].as_str().unwrap()),
        other => panic!("state {other}"),
    }
    let r = call(&app, "GET", &format!("{uri}?wait=true"), None).await;
    assert_eq!(r.header(PREVIEW_STATE_HEADER), "ready");
    assert_eq!(r.header(PREVIEW_KEY_HEADER), d["preview_key"].as_str().unwrap());
}

#[tokio::test]
async fn history_replays_preview_sequence() {
    let app = app();
    let s = create(&app, "city", "blur_rate", 0.45).await;
    let id = s["id"].as_str().unwrap();
    assert_eq!(s["value"], 0.45);
    let mut keys = vec![s["preview_key"].as_str().unwrap().to_owned()];
    for v in [0.5, 0.68, 0.3] {
        keys.push(set(&app, id, json!({ "value": v })).await.json()["preview_key"].as_str().unwrap().to_owned());
    }
    let full = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await.json();
    let recorded: Vec<&str> = full["preview_keys"].as_array().unwrap().iter().map(|k| k.as_str().unwrap()).collect();
    assert_eq!(recorded, keys);

    // Rebuilding each preview key from the initial config plus history.
    let mut cfg = full["initial"].clone();
    let mut rebuilt = Vec::new();
    let key_for = |cfg: &Value| {
        let req = fovnoise_calib::preview::PreviewRequest {
            stimulus: "city".into(),
            setup: serde_json::from_value(full["setup"].clone()).unwrap(),
            config: serde_json::from_value(cfg.clone()).unwrap(),
            mode: fovnoise_calib::session::Mode::BlurRate,
            width: Some(320),
        };
        req.key()
    };
    rebuilt.push(key_for(&cfg));
    for ev in full["history"].as_array().unwrap() {
        cfg[ev["parameter"].as_str().unwrap()] = ev["value"].clone();
        rebuilt.push(key_for(&cfg));
    }
    assert_eq!(rebuilt, keys);
}

#[tokio::test]
async fn lists_stimuli() {
    let r = call(&app(), "GET", "/v1/stimuli", None).await.json();
    assert_eq!(r, json!([
        { "id": "city", "width": 640, "height": 360 },
        { "id": "forest", "width": 640, "height": 360 },
    ]));
}
