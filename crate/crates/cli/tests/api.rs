use std::collections::BTreeMap;
use std::sync::Arc;

use adforge_cli::server::{router, AppState};
use adforge_cli::store::{Status, Store, LOG_FILE};
use adforge_cli::AppConfig;
use adforge_core::seq2seq::{Seq2Seq, TextPair, TrainConfig};
use adforge_core::{Ad, Domain, Models, Normalizer};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const MS_TARGET: &str = "save <CARDINAL> on <CONDITION/TREATMENT> care. browse now!";
const PH_TARGET: &str = "join <ORG> today.";

fn memorize(source: &str, target: &str) -> Seq2Seq {
    let pairs = [TextPair {
        source: source.into(),
        target: target.into(),
        query_id: "q".into(),
    }];
    let cfg = TrainConfig {
        d_emb: 12,
        d_hid: 24,
        epochs: 600,
        lr: 1e-2,
        min_freq: 1,
        stop_at_loss: Some(0.005),
        seed: 3,
        ..TrainConfig::default()
    };
    Seq2Seq::fit(&pairs, &cfg).unwrap().0
}

fn ms_ad() -> Ad {
    Ad {
        id: "m1".into(),
        query: "dry cough".into(),
        domain: Domain::MedicalSymptoms,
        titles: vec!["Dry Cough Help".into()],
        descriptions: vec!["Read more.".into()],
        impressions: 100,
        clicks: 3,
        url: None,
    }
}

fn ph_ad() -> Ad {
    Ad {
        id: "p1".into(),
        query: "quit smoking".into(),
        domain: Domain::PublicHealth,
        titles: vec!["Quit Smoking".into()],
        descriptions: vec!["Get support.".into()],
        ..ms_ad()
    }
}

fn models() -> Models {
    let n = Normalizer::default();
    let ms_src = n.normalize(&ms_ad()).unwrap().text;
    let ph_src = n.normalize(&ph_ad()).unwrap().text;
    Models {
        translators: BTreeMap::from([
            (Domain::MedicalSymptoms, memorize(&ms_src, MS_TARGET)),
            (Domain::PublicHealth, memorize(&ph_src, PH_TARGET)),
        ]),
        ..Models::default()
    }
}

struct Harness {
    state: Arc<AppState>,
    dir: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = AppConfig {
            fetch_timeout_secs: Some(2),
            ..AppConfig::default()
        };
        let store = Store::open(dir.path()).unwrap();
        let state = Arc::new(AppState::new(models(), store, config).unwrap());
        Harness { state, dir }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = router(self.state.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn item(&self, ad: &Ad) -> String {
        let (s, c) = self.call("POST", "/v1/campaigns", Some(json!({"name": "winter"}))).await;
        assert_eq!(s, StatusCode::CREATED);
        let cid = c["id"].as_str().unwrap().to_string();
        let (s, item) = self
            .call("POST", &format!("/v1/campaigns/{cid}/items"), Some(json!({"ad": ad})))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{item}");
        item["id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn finalize_with_fill_then_export() {
    let h = Harness::new();
    let id = h.item(&ms_ad()).await;

    let (s, err) = h.call("GET", &format!("/v1/items/{id}/export"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["code"], "InvalidTransition");

    let (s, item) = h
        .call(
            "POST",
            &format!("/v1/items/{id}/finalize"),
            Some(json!({"fills": {"CARDINAL": "13"}, "variant": "translated"})),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{item}");
    let text = item["finalized_text"].as_str().unwrap();
    assert_eq!(text, "Save 13 on Dry Cough care. Browse now!");
    assert!(!text.contains('<'));
    assert_eq!(item["status"], "reviewed");

    // same fills again: same state
    let (_, again) = h
        .call(
            "POST",
            &format!("/v1/items/{id}/finalize"),
            Some(json!({"fills": {"CARDINAL": "13"}, "variant": "translated"})),
        )
        .await;
    assert_eq!(again, item);

    let (s, exported) = h.call("GET", &format!("/v1/items/{id}/export"), None).await;
    assert_eq!(s, StatusCode::OK);
    for t in exported["titles"].as_array().unwrap() {
        assert!(t.as_str().unwrap().chars().count() <= 30);
    }
    for d in exported["descriptions"].as_array().unwrap() {
        assert!(d.as_str().unwrap().chars().count() <= 90);
    }
    let (_, item) = h.call("GET", &format!("/v1/items/{id}"), None).await;
    assert_eq!(item["status"], "exported");

    let (s, _) = h
        .call("POST", &format!("/v1/items/{id}/finalize"), Some(json!({"fills": {}})))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn default_fills_cardinal() {
    let h = Harness::new();
    let id = h.item(&ms_ad()).await;
    let (s, item) = h
        .call("POST", &format!("/v1/items/{id}/finalize"), Some(json!({"fills": {}})))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(item["variant"], "translated");
    assert_eq!(item["finalized_text"], "Save 10 on Dry Cough care. Browse now!");
}

#[tokio::test]
async fn unfilled_placeholder_is_422() {
    let h = Harness::new();
    let id = h.item(&ph_ad()).await;
    let (s, err) = h
        .call("POST", &format!("/v1/items/{id}/finalize"), Some(json!({"fills": {}})))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "UnfilledPlaceholder");
    let (_, item) = h.call("GET", &format!("/v1/items/{id}"), None).await;
    assert_eq!(item["status"], "draft");

    let (s, item) = h
        .call("POST", &format!("/v1/items/{id}/finalize"), Some(json!({"fills": {"<ORG>": "QuitLine"}})))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(item["finalized_text"], "Join QuitLine today.");
}

#[tokio::test]
async fn analyze_flags_petty_advantage() {
    let h = Harness::new();
    let (s, a) = h
        .call("POST", "/v1/analyze", Some(json!({"text": "Science diet coupons - Up to 60% Off Now"})))
        .await;
    assert_eq!(s, StatusCode::OK);
    let effects: Vec<&str> = a["effects"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(effects.contains(&"petty_advantage"), "{a}");
    assert!(a["features"]["fk_ease"].is_number());
}

#[tokio::test]
async fn translate_and_variants() {
    let h = Harness::new();
    let (s, t) = h.call("POST", "/v1/translate", Some(json!({"ad": ms_ad()}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(t["text"], MS_TARGET);
    assert_eq!(t["realized"], "Save 10 on Dry Cough care. Browse now!");

    let (s, v) = h.call("POST", "/v1/variants", Some(json!({"ad": ms_ad()}))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["translated"].is_object());
    assert!(v["generated"].is_null());
    assert!(v["annotations"]["human"].is_object());
}

#[tokio::test]
async fn extract_inline_html() {
    let h = Harness::new();
    let html = r#"<html><head><title>Guide</title></head><body><div class="content">
        <p>Warm drinks soothe a sore throat in winter months.</p></div></body></html>"#;
    let (s, c) = h.call("POST", "/v1/extract", Some(json!({"html": html}))).await;
    assert_eq!(s, StatusCode::OK, "{c}");
    assert_eq!(c["title"], "Guide");
}

#[tokio::test]
async fn fetch_failure_is_502() {
    let h = Harness::new();
    let (s, err) = h
        .call("POST", "/v1/extract", Some(json!({"url": "http://127.0.0.1:1/page"})))
        .await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(err["code"], "FetchFailed");
}

#[tokio::test]
async fn errors_are_structured() {
    let h = Harness::new();
    let (s, err) = h.call("GET", "/v1/items/i-999999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "NotFound");
    assert!(err["message"].is_string());

    let (s, err) = h.call("POST", "/v1/analyze", Some(json!({"wrong": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "BadRequest");

    let (s, err) = h.call("POST", "/v1/generate", Some(json!({"html": "<p>x</p>"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(err["code"], "ModelUnavailable");
}

#[tokio::test]
async fn campaign_crud() {
    let h = Harness::new();
    let id = h.item(&ms_ad()).await;
    let (_, list) = h.call("GET", "/v1/campaigns", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let cid = list[0]["id"].as_str().unwrap().to_string();
    let (_, items) = h.call("GET", &format!("/v1/campaigns/{cid}/items"), None).await;
    assert_eq!(items[0]["id"], id.as_str());

    let (s, _) = h.call("DELETE", &format!("/v1/campaigns/{cid}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = h.call("GET", &format!("/v1/items/{id}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.call("DELETE", &format!("/v1/campaigns/{cid}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn reads_do_not_touch_the_log() {
    let h = Harness::new();
    let id = h.item(&ms_ad()).await;
    let log = h.dir.path().join(LOG_FILE);
    let before = std::fs::read(&log).unwrap();
    h.call("GET", "/v1/campaigns", None).await;
    h.call("GET", &format!("/v1/items/{id}"), None).await;
    h.call("POST", "/v1/analyze", Some(json!({"text": "Browse now."}))).await;
    assert_eq!(std::fs::read(&log).unwrap(), before);
}

#[tokio::test]
async fn replay_reconstructs_state() {
    let h = Harness::new();
    let a = h.item(&ms_ad()).await;
    let b = h.item(&ph_ad()).await;
    h.call("POST", &format!("/v1/items/{a}/finalize"), Some(json!({"fills": {"CARDINAL": "5"}})))
        .await;
    h.call("GET", &format!("/v1/items/{a}/export"), None).await;
    h.call("POST", &format!("/v1/items/{b}/finalize"), Some(json!({"fills": {"ORG": "X"}})))
        .await;

    let (_, live_a) = h.call("GET", &format!("/v1/items/{a}"), None).await;
    let (_, live_b) = h.call("GET", &format!("/v1/items/{b}"), None).await;
    let reopened = Store::open(h.dir.path()).unwrap();
    assert_eq!(reopened.item(&a).unwrap().status, Status::Exported);
    assert_eq!(serde_json::to_value(reopened.item(&a).unwrap()).unwrap(), live_a);
    assert_eq!(serde_json::to_value(reopened.item(&b).unwrap()).unwrap(), live_b);
    assert_eq!(reopened.state().campaigns.len(), 2);
}

#[tokio::test]
async fn hot_swap_keeps_old_snapshot() {
    let h = Harness::new();
    let before = h.state.models();
    h.state.swap_models(Models::default());
    assert!(h.state.models().translators.is_empty());
    assert_eq!(before.translators.len(), 2);
    let (s, err) = h.call("POST", "/v1/translate", Some(json!({"ad": ms_ad()}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{err}");
}

#[tokio::test]
async fn ui_route_serves_html() {
    let h = Harness::new();
    let (s, body) = h.call("GET", "/ui", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("<html>"));
}
