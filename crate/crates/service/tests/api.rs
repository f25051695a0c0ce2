use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use alignlab::certify::{certify, verify_log_digest, CertificationPlan, CertifyOutcome, Judge};
use alignlab::envs::canonical_catalog;
use alignlab_service::{router, Store};

struct Api {
    app: Router,
    store: Arc<Store>,
    _dir: Option<tempfile::TempDir>,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path(), canonical_catalog().unwrap()).unwrap());
        Api {
            app: router(store.clone()),
            store,
            _dir: Some(dir),
        }
    }

    fn reopen(path: &std::path::Path) -> Self {
        let store = Arc::new(Store::open(path, canonical_catalog().unwrap()).unwrap());
        Api {
            app: router(store.clone()),
            store,
            _dir: None,
        }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(match body {
                Some(b) => Body::from(b.to_string()),
                None => Body::empty(),
            })
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    async fn create(&self, env: &str, policy: &str, delta: f64, nu: f64, seed: u64) -> (StatusCode, Value) {
        self.call(
            "POST",
            "/sessions",
            Some(json!({ "env_id": env, "policy_id": policy, "delta": delta, "nu": nu, "seed": seed })),
        )
        .await
    }

    async fn judge(&self, id: &str, index: u64, verdict: &str) -> (StatusCode, Value) {
        self.call(
            "POST",
            &format!("/sessions/{id}/judgments"),
            Some(json!({ "sequence_index": index, "verdict": verdict })),
        )
        .await
    }
}

#[tokio::test]
async fn create_reports_the_sample_size() {
    let api = Api::new();
    let (status, rec) = api.create("coin", "uniform", 0.1, 0.05, 1).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec["plan"]["m"], 30);
    assert_eq!(rec["status"], "open");
    assert_eq!(rec["judged"], 0);
}

#[tokio::test]
async fn duplicate_creates_are_distinct_sessions() {
    let api = Api::new();
    let (_, a) = api.create("coin", "uniform", 0.1, 0.05, 1).await;
    let (_, b) = api.create("coin", "uniform", 0.1, 0.05, 1).await;
    assert_ne!(a["id"], b["id"]);
    let (_, list) = api.call("GET", "/sessions", None).await;
    assert_eq!(list["sessions"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn bad_parameters_and_unknown_ids() {
    let api = Api::new();
    let (status, err) = api.create("coin", "uniform", 1.5, 0.05, 1).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_request");
    assert!(err["message"].as_str().unwrap().contains("delta"));
    let (_, list) = api.call("GET", "/sessions", None).await;
    assert!(list["sessions"].as_array().unwrap().is_empty());

    let (status, err) = api.create("nosuch", "uniform", 0.1, 0.05, 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");
    let (status, _) = api.create("coin", "nosuch", 0.1, 0.05, 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.call("GET", "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = api.call("POST", "/sessions", Some(json!({ "env_id": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["message"].is_string());
}

#[tokio::test]
async fn full_pass_and_digest_reverifies() {
    let api = Api::new();
    let (_, rec) = api.create("matrix", "drift", 0.1, 0.05, 42).await;
    let id = rec["id"].as_str().unwrap().to_string();
    let (status, pending) = api.call("GET", &format!("/sessions/{id}/certificate"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(pending["pending"], true);

    for i in 0..30 {
        let (_, next) = api.call("GET", &format!("/sessions/{id}/next"), None).await;
        assert_eq!(next["sequence_index"], i);
        assert_eq!(next["steps"].as_array().unwrap().len(), 6);
        assert!(next["steps"][0]["frame"]["mood"].is_string());
        let (status, _) = api.judge(&id, i, "aligned").await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, next) = api.call("GET", &format!("/sessions/{id}/next"), None).await;
    assert_eq!(next["exhausted"], true);
    let (status, cert) = api.call("GET", &format!("/sessions/{id}/certificate"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cert["outcome"]["result"], "pass");
    let digest = cert["judgment_digest"].as_str().unwrap();
    let log = api.store.data_dir().join(format!("{id}.jsonl"));
    assert!(verify_log_digest(&log, digest).unwrap());
    assert!(api.store.data_dir().join(format!("{id}.certificate.json")).exists());

    // same verdicts through the library give the same certificate
    let entry = canonical_catalog().unwrap().into_iter().find(|e| e.id() == "matrix").unwrap();
    let plan = CertificationPlan::new(0.1, 0.05, 42).unwrap();
    let lib = match certify(
        &entry.buffered_env,
        entry.policy("drift").unwrap(),
        &plan,
        Judge::Programmatic(&entry.verifier),
    )
    .unwrap()
    {
        CertifyOutcome::Certified(c) => c,
        other => panic!("{other:?}"),
    };
    let api_cert: alignlab::certify::Certificate = serde_json::from_value(cert).unwrap();
    assert_eq!(api_cert.comparable(), lib.comparable());
}

#[tokio::test]
async fn misaligned_first_verdict_fails_fast() {
    let api = Api::new();
    let (_, rec) = api.create("coin", "uniform", 0.1, 0.05, 3).await;
    let id = rec["id"].as_str().unwrap();
    let (_, rec) = api.judge(id, 0, "misaligned").await;
    assert_eq!(rec["status"], "failed");
    assert_eq!(rec["index"], 0);
    let (_, next) = api.call("GET", &format!("/sessions/{id}/next"), None).await;
    assert_eq!(next["exhausted"], true);
    let (status, err) = api.judge(id, 1, "aligned").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session_closed");
    let (status, cert) = api.call("GET", &format!("/sessions/{id}/certificate"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cert["outcome"], json!({ "result": "fail", "index": 0 }));
}

#[tokio::test]
async fn out_of_order_and_duplicate_judgments_conflict() {
    let api = Api::new();
    let (_, rec) = api.create("coin", "uniform", 0.1, 0.05, 3).await;
    let id = rec["id"].as_str().unwrap();
    let (status, err) = api.judge(id, 2, "aligned").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "out_of_order");
    api.judge(id, 0, "aligned").await;
    let (status, err) = api.judge(id, 0, "aligned").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "duplicate_judgment");
    let (status, _) = api.judge(id, 1, "maybe").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    {
        let api = Api::reopen(dir.path());
        let (_, rec) = api.create("cauldron", "carry", 0.3, 0.2, 5).await;
        id = rec["id"].as_str().unwrap().to_string();
        api.judge(&id, 0, "aligned").await;
        api.judge(&id, 1, "aligned").await;
    }
    let api = Api::reopen(dir.path());
    let (status, rec) = api.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["judged"], 2);
    assert_eq!(rec["status"], "open");
    let (_, next) = api.call("GET", &format!("/sessions/{id}/next"), None).await;
    assert_eq!(next["sequence_index"], 2);
    let m = rec["plan"]["m"].as_u64().unwrap();
    for i in 2..m {
        api.judge(&id, i, "aligned").await;
    }
    let api = Api::reopen(dir.path());
    let (_, rec) = api.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(rec["status"], "passed");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_judgments_are_serialized() {
    let api = Arc::new(Api::new());
    let (_, rec) = api.create("coin", "uniform", 0.1, 0.05, 8).await;
    let id = rec["id"].as_str().unwrap().to_string();
    // every task races to judge index 0; exactly one wins
    let mut handles = Vec::new();
    for _ in 0..8 {
        let api = api.clone();
        let id = id.clone();
        handles.push(tokio::spawn(async move { api.judge(&id, 0, "aligned").await.0 }));
    }
    let mut ok = 0;
    for h in handles {
        if h.await.unwrap() == StatusCode::OK {
            ok += 1;
        }
    }
    assert_eq!(ok, 1);
    let (_, rec) = api.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(rec["judged"], 1);
}

#[tokio::test]
async fn env_listing_and_preview() {
    let api = Api::new();
    let (_, envs) = api.call("GET", "/envs", None).await;
    let ids: Vec<&str> = envs["envs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["manifest"]["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["driving", "cauldron", "matrix", "coin"]);
    let (status, p) = api.call("GET", "/envs/driving/preview?policy=lockout&seed=3", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["steps"].as_array().unwrap().len(), 10);
    assert!(p["steps"][0]["frame"]["position"].is_number());
    let (_, again) = api.call("GET", "/envs/driving/preview?policy=lockout&seed=3", None).await;
    assert_eq!(p, again);
    let (status, _) = api.call("GET", "/envs/nosuch/preview", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
