use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use skelmap_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config).unwrap())
}

fn app() -> Router {
    app_with(ServiceConfig { timeout: Duration::from_secs(600), ..Default::default() })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn session(app: &Router, shape: &str, n: usize, seed: u64) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "generator": { "shape": shape, "n": n, "seed": seed } }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_session_from_generator() {
    let app = app();
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "generator": { "shape": "circle", "n": 100, "seed": 7 } }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["n"], 100);
    let id = body["id"].as_str().unwrap();
    let (status, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["source"]["shape"], "circle");
    let (status, cloud) = call(&app, "GET", &format!("/sessions/{id}/cloud"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cloud["points"].as_array().unwrap().len(), 100);
}

#[tokio::test]
async fn csv_upload() {
    let app = app();
    let req = Request::post("/sessions")
        .header(header::CONTENT_TYPE, "text/csv")
        .body(Body::from("x,y,z\n0,0,0\n1,0,0\n0,1,0\n"))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "csv": "1,2\n3,4\n" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["n"].as_u64(), body["dim"].as_u64()), (Some(2), Some(2)));
}

#[tokio::test]
async fn unknown_session_and_job_are_404() {
    let app = app();
    assert_eq!(call(&app, "GET", "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "POST", "/sessions/nope/skeleton", Some(json!({}))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/jobs/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_parameters_name_the_precondition() {
    let app = app();
    let id = session(&app, "circle", 100, 7).await;
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(json!({ "p": 1.5 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["precondition"], "p");
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "generator": { "shape": "klein", "n": 10 } }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["precondition"], "shape");
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/tear"), Some(json!({ "edge": [0, 1] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["precondition"], "skeleton");
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/embed"), Some(json!({ "method": "isomap", "k": 1 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["precondition"], "graph_connected");
    assert!(body["component_sizes"].as_array().unwrap().len() > 1);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/persistence?target=bogus"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn skeleton_tear_and_cache() {
    let app = app();
    let id = session(&app, "circle", 200, 0).await;
    let req = json!({ "filter": "dtb", "k": 8, "n": 6, "p": 0.3, "eps": 0.3, "minpts": 5 });
    let (status, first) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["cycle_rank"], 1);
    let nodes = first["skeleton"]["nodes"].as_array().unwrap();
    assert!(nodes[0].get("members").is_some() && nodes[0].get("centroid").is_some());
    let (_, second) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(req)).await;
    assert_eq!(first, second);

    let edge = first["skeleton"]["edges"][0].clone();
    let cut = json!({ "edge": [edge[0], edge[1]], "t": 0.5, "radius": 1e-9 });
    let (status, torn) = call(&app, "POST", &format!("/sessions/{id}/tear"), Some(cut.clone())).await;
    assert_eq!(status, StatusCode::OK, "{torn}");
    assert_eq!(torn["removed_count"], 0);
    assert_eq!(torn["connected"], true);
    assert!(torn.get("embedding").is_some() && torn.get("quality").is_some());
    let (_, again) = call(&app, "POST", &format!("/sessions/{id}/tear"), Some(cut)).await;
    assert_eq!(torn, again);

    // A global plane through a circle crosses it twice.
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/tear"), Some(json!({ "edge": [edge[0], edge[1]], "radius": "global" }))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["component_sizes"].as_array().unwrap().len(), 2);
    assert_eq!(body["result"]["connected"], false);
}

#[tokio::test]
async fn embed_and_persistence() {
    let app = app();
    let id = session(&app, "swiss_roll_hole", 800, 0).await;
    let (status, sk) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(json!({ "n": 18, "eps": 2.0 }))).await;
    assert_eq!(status, StatusCode::OK, "{sk}");
    let req = json!({ "method": "l-isomap-homology", "k": 10, "d": 2 });
    let (status, e) = call(&app, "POST", &format!("/sessions/{id}/embed"), Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{e}");
    assert_eq!(e["embedding"]["method"], "l-isomap-homology");
    assert_eq!(e["embedding"]["landmarks"], sk["landmarks"]);
    assert!(e["report"]["rv"].as_f64().unwrap() < 0.1);
    assert_eq!(call(&app, "POST", &format!("/sessions/{id}/embed"), Some(req)).await.1, e);

    let hash = e["hash"].as_str().unwrap();
    let (status, pd) = call(&app, "GET", &format!("/sessions/{id}/persistence?target=embedding:{hash}"), None).await;
    assert_eq!(status, StatusCode::OK, "{pd}");
    assert_eq!(pd["diagrams"].as_array().unwrap().len(), 2);
    assert_eq!(pd["betti"][1]["count"], e["report"]["pb1_after"]);
    let (status, input) = call(&app, "GET", &format!("/sessions/{id}/persistence?target=input"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(input["betti"][1]["count"], e["report"]["pb1_before"]);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/persistence?target=embedding:0000"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = summary["artifacts"].as_array().unwrap().iter().map(|a| a["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["skeleton", "embedding", "persistence", "persistence"]);
}

#[tokio::test]
async fn projections() {
    let app = app();
    let id = session(&app, "figure_eight_bended", 400, 0).await;
    let (status, ranked) = call(&app, "GET", &format!("/sessions/{id}/project/search?m=20&subsample_size=96"), None).await;
    assert_eq!(status, StatusCode::OK, "{ranked}");
    let ranked = ranked.as_array().unwrap();
    assert_eq!(ranked.len(), 20);
    let scores: Vec<f64> = ranked.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));

    let dir = ranked[0]["direction"]["vector"].clone();
    let (status, p) = call(&app, "POST", &format!("/sessions/{id}/project"), Some(json!({ "direction": dir, "subsample_size": 96 }))).await;
    assert_eq!(status, StatusCode::OK, "{p}");
    assert_eq!(p["embedding"]["method"], "linear-projection");
    assert_eq!(p["report"]["wd1"], ranked[0]["wd1"]);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/project"), Some(json!({ "direction": [1.0, 0.0] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn slow_requests_become_jobs() {
    let app = app_with(ServiceConfig { timeout: Duration::ZERO, ..Default::default() });
    let id = session(&app, "swiss_roll", 600, 1).await;
    let req = json!({ "method": "isomap", "k": 8 });
    let (status, accepted) = call(&app, "POST", &format!("/sessions/{id}/embed"), Some(req.clone())).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{accepted}");
    let job = accepted["job"].as_str().unwrap();
    let mut result = None;
    for _ in 0..600 {
        let (status, body) = call(&app, "GET", &format!("/jobs/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if body["status"] == "done" {
            result = Some(body["result"].clone());
            break;
        }
        assert_eq!(body["status"], "running");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    let result = result.expect("job finished");
    // Now cached, so answered directly.
    let (status, direct) = call(&app, "POST", &format!("/sessions/{id}/embed"), Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(direct, result);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { data_dir: Some(dir.path().to_path_buf()), timeout: Duration::from_secs(600), ..Default::default() };
    let app = app_with(config.clone());
    let id = session(&app, "circle", 150, 3).await;
    let req = json!({ "k": 8, "n": 6, "eps": 0.3 });
    let (_, sk) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(req.clone())).await;
    let (_, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;

    let restarted = app_with(config);
    assert_eq!(call(&restarted, "GET", &format!("/sessions/{id}"), None).await.1, summary);
    assert_eq!(call(&restarted, "POST", &format!("/sessions/{id}/skeleton"), Some(req)).await.1, sk);
    let edge = sk["skeleton"]["edges"][0].clone();
    let (status, _) = call(&restarted, "POST", &format!("/sessions/{id}/tear"), Some(json!({ "edge": [edge[0], edge[1]], "radius": 1e-9 }))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn cors_allows_the_ui() {
    let app = app();
    let req = Request::get("/health").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).unwrap(), "*");
}

#[tokio::test]
async fn rank_on_cylinder_preserves_three_holes() {
    let app = app();
    let id = session(&app, "cylinder_holes(3)", 2000, 0).await;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/skeleton"), Some(json!({ "n": 10, "eps": 0.4 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, ranked) = call(&app, "GET", &format!("/sessions/{id}/tear/rank"), None).await;
    assert_eq!(status, StatusCode::OK, "{ranked}");
    let first = &ranked[0];
    assert_eq!(first["valid"], true);
    assert!(first["pb1"].as_u64().unwrap() >= 3, "{first}");
    for key in ["cut", "valid", "pb1", "wd1", "rv", "removed_count"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}
