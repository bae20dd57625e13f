use std::path::{Path, PathBuf};
use std::sync::Arc;

use annotrace::api::{router, ApiConfig, AppState};
use annotrace::views::{timeline_view, TimelineView};
use annotrace_core::curation::ClassificationLog;
use annotrace_core::ingest::{ingest, read_manifest, IngestOptions};
use annotrace_core::segment::Segmenter;
use annotrace_core::{Corpus, Release, Section};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const SELENO: &str = "the active-site selenocysteine is encoded by the opal codon, uga.";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .join("manifest.tsv")
}

fn load(name: &str) -> Corpus {
    let rows = read_manifest(&fixture(name)).unwrap();
    let mut corpus = Corpus::new();
    ingest(None, &mut corpus, &rows, &Segmenter::default(), IngestOptions::default()).unwrap();
    corpus
}

struct Api {
    app: Router,
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

fn api(corpus: Corpus) -> Api {
    let dir = tempfile::tempdir().unwrap();
    let log = ClassificationLog::open(&dir.path().join("log.jsonl")).unwrap();
    let state = Arc::new(AppState::new(corpus, log, ApiConfig::default()).unwrap());
    Api {
        app: router(state.clone()),
        state,
        _dir: dir,
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

fn assert_error(resp: &(StatusCode, Value), status: StatusCode) {
    assert_eq!(resp.0, status, "{}", resp.1);
    assert!(resp.1["code"].is_string() && resp.1["message"].is_string(), "{}", resp.1);
}

#[tokio::test]
async fn search_finds_exact_and_substring_matches() {
    let a = api(load("selenocysteine"));
    let (status, body) = get(&a.app, "/v1/sentences?q=The%20active-site%20SELENOCYSTEINE%20is%20encoded%20by%20the%20opal%20codon,%20UGA.").await;
    assert_eq!(status, StatusCode::OK);
    let id = a.state.corpus().sentence_id(SELENO).unwrap();
    assert_eq!(body["exact"], json!(id.0));
    assert_eq!(body["results"][0]["lifetime_clusters"], json!(84));

    let (_, body) = get(&a.app, "/v1/sentences?q=opal%20codon&limit=2").await;
    let texts: Vec<&str> = body["results"].as_array().unwrap().iter().map(|r| r["text"].as_str().unwrap()).collect();
    assert!(texts.iter().all(|t| t.contains("opal codon")));
    assert_eq!(texts.len(), 2);
    assert_eq!(body["truncated"], json!(true));

    assert_error(&get(&a.app, "/v1/sentences?q=%20").await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&get(&a.app, "/v1/sentences").await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&get(&a.app, "/v1/sentences?q=x&limit=0").await, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn selenocysteine_timeline_payload() {
    let a = api(load("selenocysteine"));
    let corpus = a.state.corpus();
    let id = corpus.sentence_id(SELENO).unwrap();
    let (status, body) = get(&a.app, &format!("/v1/sentences/{}/timeline", id.0)).await;
    assert_eq!(status, StatusCode::OK);
    let view: TimelineView = serde_json::from_value(body).unwrap();
    assert_eq!(view.peak.as_ref().unwrap().clusters, 54);
    assert_eq!(view.clusters.len(), 84);
    assert_eq!(view.rails.trembl.len(), 6);
    assert_eq!(view.rails.swissprot.len(), 36);
    assert!(view.rails.swissprot.iter().all(|r| r.section == "SwissProt"));
    assert!(view.rails.trembl.iter().all(|r| r.section == "TrEMBL"));
    // the two origins come first, each shown with all of its accessions
    let origins: Vec<&str> = view.clusters[..2].iter().map(|c| c.accessions[0].as_str()).collect();
    assert!(origins.contains(&"P07658") && origins.contains(&"P07203"), "{origins:?}");
    assert!(view.points.iter().any(|p| p.section == "TrEMBL"));
    let p = &view.points[0];
    assert_eq!(p.url, format!("https://www.uniprot.org/uniprotkb/{}/history", p.accession));
    assert_eq!(p.release_label, "9");
    assert_eq!(view.points.len(), view.counts.iter().map(|c| c.clusters as usize).sum::<usize>());
    // the payload is a direct rendering of the store's timeline
    assert_eq!(view, timeline_view(corpus, id, annotrace::views::DEFAULT_ENTRY_URL).unwrap());
    let tl = corpus.timeline(id).unwrap();
    let flat: Vec<(u32, u32)> = tl
        .tracks
        .iter()
        .flat_map(|t| t.ordinals.iter().map(move |o| (t.cluster.0, o.0)))
        .collect();
    let mut from_points: Vec<(u32, u32)> = view.points.iter().map(|p| (p.cluster_id.0, p.ordinal.0)).collect();
    let mut flat_sorted = flat.clone();
    flat_sorted.sort();
    from_points.sort();
    assert_eq!(from_points, flat_sorted);
}

#[tokio::test]
async fn timeline_errors() {
    let a = api(load("cyanide"));
    assert_error(&get(&a.app, "/v1/sentences/999999/timeline").await, StatusCode::NOT_FOUND);
    assert_error(&get(&a.app, "/v1/sentences/abc/timeline").await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&get(&a.app, "/v1/nowhere").await, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn pattern_listing_pages_and_filters() {
    let a = api(load("selenocysteine"));
    let (status, body) = get(&a.app, "/v1/patterns/transient_appearance").await;
    assert_eq!(status, StatusCode::OK);
    let total = body["total"].as_u64().unwrap();
    assert!(total >= 1);
    let ids: Vec<u64> = body["items"].as_array().unwrap().iter().map(|r| r["sentence_id"].as_u64().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    let (_, one) = get(&a.app, "/v1/patterns/transient_appearance?per_page=1&page=1").await;
    assert_eq!(one["items"].as_array().unwrap().len(), 1);
    assert_eq!(one["total"].as_u64(), Some(total));

    let (status, beyond) = get(&a.app, "/v1/patterns/missing_origin?page=999").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(beyond["items"], json!([]));
    assert!(beyond["total"].as_u64().unwrap() >= 1);

    let (_, latest) = get(&a.app, "/v1/patterns/missing_origin?latest=true").await;
    assert!(latest["total"].as_u64() <= beyond["total"].as_u64());

    assert_error(&get(&a.app, "/v1/patterns/bogus").await, StatusCode::BAD_REQUEST);
    assert_error(&get(&a.app, "/v1/patterns/transient?page=0").await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&get(&a.app, "/v1/patterns/transient?latest=maybe").await, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn stats_series_endpoint() {
    let a = api(load("cyanide"));
    let (status, body) = get(&a.app, "/v1/stats/trembl").await;
    assert_eq!(status, StatusCode::OK);
    let points = body["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["label"], "1");
    for p in points {
        for key in ["unique_fraction", "singleton_fraction", "unannotated_fraction"] {
            if let Some(x) = p[key].as_f64() {
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
    assert_error(&get(&a.app, "/v1/stats/pdb").await, StatusCode::NOT_FOUND);

    let empty = api(Corpus::new());
    let (_, body) = get(&empty.app, "/v1/stats/SwissProt").await;
    assert_eq!(body["points"], json!([]));
}

fn request(id: u32, classification: &str, path: Value) -> Value {
    json!({
        "sentence_id": id,
        "classification": classification,
        "decision_path": path,
        "analyst": "curator-1",
        "notes": "checked against the entry history",
    })
}

#[tokio::test]
async fn classifications_round_trip_and_keep_history() {
    let a = api(load("cyanide"));
    let id = a.state.corpus().sentence_ids().next().unwrap().0;
    let erroneous = request(id, "erroneous", json!({"q1": false, "q2": "yes", "q3": "yes", "q4": "yes"}));
    let (status, stored) = call(&a.app, Method::POST, "/v1/classifications", Some(erroneous)).await;
    assert_eq!(status, StatusCode::CREATED, "{stored}");
    assert_eq!(stored["classification"], "erroneous");

    let unsure = request(id, "possibly_erroneous", json!({"q2": "insufficient_evidence"}));
    let (status, second) = call(&a.app, Method::POST, "/v1/classifications", Some(unsure)).await;
    assert_eq!(status, StatusCode::CREATED, "{second}");
    // Q1 is answered by the server
    assert_eq!(second["decision_path"]["q1"], json!(false));

    let (status, listed) = get(&a.app, &format!("/v1/classifications?sentence_id={id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(listed["records"], json!([stored, second]));
    let (_, all) = get(&a.app, "/v1/classifications").await;
    assert_eq!(all["records"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn classification_errors() {
    let a = api(load("cyanide"));
    let id = a.state.corpus().sentence_ids().next().unwrap().0;
    let post = |v: Value| {
        let app = a.app.clone();
        async move { call(&app, Method::POST, "/v1/classifications", Some(v)).await }
    };
    let mismatch = request(id, "accurate", json!({"q2": "yes", "q3": "yes", "q4": "yes"}));
    assert_error(&post(mismatch).await, StatusCode::CONFLICT);
    let overlong = request(id, "accurate", json!({"q2": "no", "q3": "yes"}));
    assert_error(&post(overlong).await, StatusCode::CONFLICT);
    let incomplete = request(id, "erroneous", json!({"q2": "yes"}));
    assert_error(&post(incomplete).await, StatusCode::UNPROCESSABLE_ENTITY);
    let too_many = request(id, "too_many_results", json!({"q1": true}));
    assert_error(&post(too_many).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&post(request(99999, "accurate", json!({"q2": "no"}))).await, StatusCode::NOT_FOUND);
    assert_error(&post(json!({"nonsense": true})).await, StatusCode::UNPROCESSABLE_ENTITY);
    let mut anonymous = request(id, "accurate", json!({"q2": "no"}));
    anonymous["analyst"] = json!(" ");
    assert_error(&post(anonymous).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&get(&a.app, "/v1/classifications?sentence_id=x").await, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, all) = get(&a.app, "/v1/classifications").await;
    assert_eq!(all["records"], json!([]));
}

#[tokio::test]
async fn widely_reused_sentence_is_forced_to_too_many_results() {
    let mut corpus = Corpus::new();
    let r = corpus
        .register_release(Release::new(Section::SwissProt, "1", NaiveDate::from_ymd_opt(2000, 1, 1).unwrap()))
        .unwrap();
    for i in 0..150 {
        let c = corpus.upsert_entry(r, &[format!("P{i:05}")]).unwrap();
        corpus.add_occurrence("binds zinc.", c, r).unwrap();
    }
    let a = api(corpus);
    let claimed = request(0, "erroneous", json!({"q1": false, "q2": "yes", "q3": "yes", "q4": "yes"}));
    let (status, stored) = call(&a.app, Method::POST, "/v1/classifications", Some(claimed)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(stored["classification"], "too_many_results");
    assert_eq!(stored["decision_path"], json!({"q1": true}));
}

#[tokio::test]
async fn reads_do_not_change_the_corpus() {
    let a = api(load("cyanide"));
    let mut before = Vec::new();
    annotrace_core::store::write_occurrence_tsv(a.state.corpus(), &mut before).unwrap();
    for uri in ["/v1/sentences?q=cyanide", "/v1/sentences/0/timeline", "/v1/patterns/trembl_origin", "/v1/stats/SwissProt"] {
        assert_eq!(get(&a.app, uri).await.0, StatusCode::OK, "{uri}");
    }
    let mut after = Vec::new();
    annotrace_core::store::write_occurrence_tsv(a.state.corpus(), &mut after).unwrap();
    assert_eq!(before, after);
}
