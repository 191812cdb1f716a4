use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use reqwest::StatusCode;
use serde_json::{json, Value};

use seqlab_core::fixtures;
use seqlab_core::synth::{generate_synthetic_match, SynthConfig};
use seqlab_core::telemetry::to_jsonl;
use seqlab_server::{api, Workspace};

async fn start(root: &Path) -> (SocketAddr, Arc<Workspace>) {
    let ws = Arc::new(Workspace::open(root).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = api::router(ws.clone(), None);
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (addr, ws)
}

fn url(addr: SocketAddr, path: &str) -> String {
    format!("http://{addr}{path}")
}

fn synth(seed: u64) -> String {
    to_jsonl(&generate_synthetic_match(&SynthConfig::default(), seed).unwrap())
}

fn app_body(annotator: &str, player: &str, start: f64, end: f64, tag: &str) -> Value {
    json!({
        "annotator_id": annotator,
        "player_id": player,
        "start_s": start,
        "end_s": end,
        "label": "Team Fighting",
        "tag": tag,
    })
}

#[tokio::test(flavor = "multi_thread")]
async fn ingest_list_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let c = reqwest::Client::new();
    {
        let (addr, _) = start(dir.path()).await;
        let r = c.post(url(addr, "/api/matches")).body(fixtures::MATCH_PAPER).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let r = c.post(url(addr, "/api/matches")).body(fixtures::MATCH_PAPER).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::CONFLICT);

        let broken = fixtures::MATCH_PAPER.lines().take(3).collect::<Vec<_>>().join("\n") + "\n{\"type\":\"pos\",\n";
        let r = c.post(url(addr, "/api/matches")).body(broken).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::BAD_REQUEST);
        let body: Value = r.json().await.unwrap();
        assert_eq!(body["line"], 4);
    }
    let (addr, _) = start(dir.path()).await;
    let list: Value = c.get(url(addr, "/api/matches")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list["matches"][0]["match_id"], "paper-0001");
    assert_eq!(list["matches"].as_array().unwrap().len(), 1);

    let detail: Value = c.get(url(addr, "/api/matches/paper-0001")).send().await.unwrap().json().await.unwrap();
    assert_eq!(detail["players"].as_array().unwrap().len(), 10);
    assert!(detail["boundaries"]["early_end_s"].is_number());
    let missing = c.get(url(addr, "/api/matches/nope")).send().await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn events_and_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _) = start(dir.path()).await;
    let c = reqwest::Client::new();
    c.post(url(addr, "/api/matches")).body(fixtures::MATCH_PAPER).send().await.unwrap();

    let ev: Value = c
        .get(url(addr, "/api/matches/paper-0001/events?from=90&to=350&kinds=kill,death"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let events = ev["events"].as_array().unwrap();
    // three scripted kills in the window, each with its death
    assert_eq!(events.len(), 6);
    assert!(events.iter().all(|e| e["type"] == "kill" || e["type"] == "death"));

    let seqs: Value =
        c.get(url(addr, "/api/matches/paper-0001/sequences")).send().await.unwrap().json().await.unwrap();
    assert_eq!(seqs.as_array().unwrap().len(), 10);
    assert!(seqs[0]["states"][0][0].is_string());
    let late: Value = c
        .get(url(addr, "/api/matches/paper-0001/sequences?segment=late&dss=true"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(late[0]["segment"], "late");
    assert!(late[0]["runs"].is_array());
    let bad = c.get(url(addr, "/api/matches/paper-0001/sequences?segment=overtime")).send().await.unwrap();
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn annotation_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _) = start(dir.path()).await;
    let c = reqwest::Client::new();
    c.post(url(addr, "/api/matches")).body(fixtures::MATCH_PAPER).send().await.unwrap();
    let post = |body: Value| {
        let c = c.clone();
        async move { c.post(url(addr, "/api/matches/paper-0001/annotations")).json(&body).send().await.unwrap() }
    };

    let ok = post(app_body("ann", "r0", 10.0, 20.0, "Focus Target")).await;
    assert_eq!(ok.status(), StatusCode::CREATED);
    let stored: Value = ok.json().await.unwrap();
    assert_eq!(stored["tx"], 1);
    let id = stored["application_id"].as_str().unwrap().to_string();

    let overlap = post(app_body("ann", "r0", 15.0, 25.0, "Retaliation")).await;
    assert_eq!(overlap.status(), StatusCode::CONFLICT);
    let v: Value = overlap.json().await.unwrap();
    assert_eq!(v["violation"]["violation"], "overlap");
    let unknown = post(app_body("ann", "r1", 15.0, 25.0, "Ganking")).await;
    assert_eq!(unknown.status(), StatusCode::BAD_REQUEST);
    let no_player = post(app_body("ann", "zz", 15.0, 25.0, "Retaliation")).await;
    assert_eq!(no_player.status(), StatusCode::BAD_REQUEST);

    let list: Value =
        c.get(url(addr, "/api/annotations?annotator=ann")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list["applications"].as_array().unwrap().len(), 1);
    let d = c.delete(url(addr, &format!("/api/annotations/{id}"))).send().await.unwrap();
    assert_eq!(d.status(), StatusCode::OK);
    let d = c.delete(url(addr, &format!("/api/annotations/{id}"))).send().await.unwrap();
    assert_eq!(d.status(), StatusCode::NOT_FOUND);
    assert_eq!(post(app_body("ann", "r0", 15.0, 25.0, "Retaliation")).await.status(), StatusCode::CREATED);
}

#[tokio::test(flavor = "multi_thread")]
async fn rubric_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _) = start(dir.path()).await;
    let c = reqwest::Client::new();
    let r: Value = c.get(url(addr, "/api/rubric")).send().await.unwrap().json().await.unwrap();
    assert_eq!(r["labels"].as_array().unwrap().len(), 3);
    let put = c.put(url(addr, "/api/rubric")).body(fixtures::RUBRIC_ITER1).send().await.unwrap();
    assert_eq!(put.status(), StatusCode::OK);
    let r2: Value = c.get(url(addr, "/api/rubric")).send().await.unwrap().json().await.unwrap();
    assert_ne!(r, r2);
    let json_put = c.put(url(addr, "/api/rubric")).body(r.to_string()).send().await.unwrap();
    assert_eq!(json_put.status(), StatusCode::OK);
    let dup = "[[label]]\nname = \"A\"\n[[label]]\nname = \"A\"\n";
    assert_eq!(c.put(url(addr, "/api/rubric")).body(dup).send().await.unwrap().status(), StatusCode::BAD_REQUEST);
    drop(c);
    let reopened = Workspace::open(dir.path()).unwrap();
    assert_eq!(serde_json::to_value(&*reopened.rubric()).unwrap(), r);
}

#[tokio::test(flavor = "multi_thread")]
async fn derived_results_are_stable_and_track_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _) = start(dir.path()).await;
    let c = reqwest::Client::new();
    for seed in 0..3 {
        c.post(url(addr, "/api/matches")).body(synth(seed)).send().await.unwrap();
    }
    let get = |path: &'static str| {
        let c = c.clone();
        async move { c.get(url(addr, path)).send().await.unwrap().bytes().await.unwrap() }
    };
    for path in ["/api/mine?segment=early&top=5&min_support=0.2", "/api/dtw/embedding?segment=late&k=3", "/api/graph?segment=mid", "/api/report/segments"] {
        assert_eq!(get(path).await, get(path).await, "{path}");
    }
    let mine: Value = serde_json::from_slice(&get("/api/mine?segment=early&top=5&min_support=0.2").await).unwrap();
    assert_eq!(mine["frequent"]["total"], 30);
    let emb: Value = serde_json::from_slice(&get("/api/dtw/embedding?segment=late&k=3").await).unwrap();
    assert_eq!(emb["points"].as_array().unwrap().len(), 30);

    let before = get("/api/mine?segment=early&top=5&min_support=0.2").await;
    c.post(url(addr, "/api/matches")).body(synth(3)).send().await.unwrap();
    let after: Value = serde_json::from_slice(&get("/api/mine?segment=early&top=5&min_support=0.2").await).unwrap();
    assert_ne!(before, serde_json::to_vec(&after).unwrap());
    assert_eq!(after["frequent"]["total"], 40);

    let report0 = get("/api/report/segments").await;
    let body = json!({ "annotator_id": "x", "player_id": "r0", "start_s": 5.0, "end_s": 9.0, "label": "Team Fighting", "tag": "Retaliation" });
    c.post(url(addr, "/api/matches/synth-0/annotations")).json(&body).send().await.unwrap();
    let report1: Value = serde_json::from_slice(&get("/api/report/segments").await).unwrap();
    assert_ne!(report0, serde_json::to_vec(&report1).unwrap());
    assert_eq!(report1["labels"][0], json!({ "segment": "early", "label": "Team Fighting", "tag": null, "count": 1 }));

    let bad_k = c.get(url(addr, "/api/dtw/embedding?segment=late&k=0")).send().await.unwrap();
    assert_eq!(bad_k.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn static_index_is_served() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _) = start(dir.path()).await;
    let page = reqwest::get(url(addr, "/")).await.unwrap().text().await.unwrap();
    assert!(page.contains("/api/matches"));
}
